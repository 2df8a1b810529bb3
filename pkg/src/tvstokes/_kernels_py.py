"""Pure numpy implementation of the hot iteration kernels.

Same signatures as the compiled ``_ckernels`` module; :mod:`tvstokes.kernels`
picks one of the two at import time.
"""
from __future__ import annotations

import math

import numpy as np

from . import ops
from .spectral import dct_matrix, inverse_eigenvalues

BACKEND = "python"


class NumericalDivergence(ArithmeticError):
    """A Chambolle iterate stopped being finite."""


def chambolle_update(p: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    """(p + t psi) / (1 + t |psi|), with |.| the Euclidean norm over axis -3."""
    mag = np.sqrt(np.sum(psi * psi, axis=-3, keepdims=True))
    return (p + t * psi) / (1.0 + t * mag)


def weighted_update(v: np.ndarray, psi: np.ndarray, theta: np.ndarray, t: float) -> np.ndarray:
    """(theta v + t theta psi) / (theta + t |psi|); zero wherever theta == 0."""
    mag = np.sqrt(np.sum(psi * psi, axis=-3, keepdims=True))
    den = theta + t * mag
    num = theta * (v + t * psi)
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=(theta > 0) & (den > 0))
    return out


def _project(w: np.ndarray, h: float) -> np.ndarray:
    n2, n1 = w.shape[-2:]
    c2 = dct_matrix(n2).matrix
    c1 = dct_matrix(n1).matrix
    s = ops.div(w, h)
    phi = c2.T @ ((inverse_eigenvalues((n2, n1), h) * (c2 @ s @ c1.T))) @ c1
    return w - ops.grad(phi, h)


def _check(D: float) -> None:
    if not math.isfinite(D):
        raise NumericalDivergence("dual energy is not finite")


def ir_chambolle(p: np.ndarray, f: np.ndarray, h: float, t: float, max_it: int,
                 threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Chambolle iteration for min ||div p - f||^2 over |p| <= 1.

    Returns the last iterate and the energies of every iterate visited.  Stops
    once consecutive square-root energies differ by less than ``threshold`` or
    after ``max_it`` updates.
    """
    p = np.array(p, dtype=float)
    energies = []
    h2 = h * h
    for n in range(max_it + 1):
        r = ops.div(p, h) - f
        D = h2 * float(np.vdot(r, r))
        _check(D)
        energies.append(D)
        if n > 0 and abs(math.sqrt(energies[-2]) - math.sqrt(D)) < threshold:
            break
        if n == max_it:
            break
        p = chambolle_update(p, ops.grad(r, h), t)
    return p, np.asarray(energies)


def tfs_chambolle(p: np.ndarray, rhs: np.ndarray, h: float, t: float, max_it: int,
                  threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Chambolle iteration for min ||P multi_div p - rhs||^2 over row-wise |p_k| <= 1."""
    p = np.array(p, dtype=float)
    energies = []
    h2 = h * h
    for n in range(max_it + 1):
        r = _project(ops.multi_div(p, h), h) - rhs
        D = h2 * float(np.vdot(r, r))
        _check(D)
        energies.append(D)
        if n > 0 and abs(math.sqrt(energies[-2]) - math.sqrt(D)) < threshold:
            break
        if n == max_it:
            break
        p = chambolle_update(p, ops.multi_grad(r, h), t)
    return p, np.asarray(energies)
