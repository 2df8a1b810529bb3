"""Dual Chambolle solvers for tangent-field smoothing and image reconstruction.

Step 1 smooths the tangent field ``tau0`` of the noisy image under a
divergence-free constraint; step 2 rebuilds an image whose level lines follow
the smoothed field, either through the normal field ``xi`` (IRV1) or through
a potential ``g`` with ``grad g = tau_perp`` (IRV2).  All three subproblems are
solved in their dual form ``min ||Lambda p - f||^2`` over pointwise unit balls.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, ops
from .grid import ShapeError, inner_product, norm
from .kernels import NumericalDivergence
from .projection import project_global

__all__ = [
    "SolverConfig", "EnergyTrace", "InconsistentFieldError", "NumericalDivergence",
    "tfs_energy", "chambolle_tfs", "recover_tangent", "compute_xi", "integrate_g",
    "IntegrationReport", "chambolle_ir", "ir_energy", "irv1_data", "irv2_data",
    "recover_image_irv1", "recover_image_irv2",
]


class InconsistentFieldError(ValueError):
    """The field is too far from divergence-free to be integrated."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"divergence residual {residual:.3e} exceeds {tol:.1e}")
        self.residual = residual
        self.tol = tol


@dataclass(frozen=True)
class SolverConfig:
    delta: float = 0.15
    alpha: float = 10.0
    epsilon: float = 1e-3
    t: float = 0.125
    max_it: int = 100_000
    tol: float = 1e-7
    h: float = 1.0

    def __post_init__(self):
        if not 0 < self.t <= 0.125:
            raise ValueError(f"step size must lie in (0, 1/8], got {self.t}")
        for name in ("delta", "alpha", "epsilon", "tol", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_it < 0:
            raise ValueError(f"max_it must be non-negative, got {self.max_it}")

    @property
    def mu(self) -> float:
        return 1.0 / self.alpha


@dataclass
class EnergyTrace:
    """Dual energies of successive iterates, starting with the initial guess."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    @property
    def iterations(self) -> int:
        """Number of updates performed."""
        return max(len(self.values) - 1, 0)

    def sqrt_deltas(self) -> np.ndarray:
        """``|sqrt(D_{n-1}) - sqrt(D_n)|`` per entry (NaN for the first)."""
        root = np.sqrt(np.maximum(self.values, 0.0))
        out = np.full(len(root), np.nan)
        out[1:] = np.abs(np.diff(root))
        return out

    def max_increase(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(max(np.max(np.diff(self.values)), 0.0))

    def to_csv(self, fh=None) -> str:
        """Write ``iteration,energy,sqrt_energy_delta`` rows; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "energy", "sqrt_energy_delta"])
        for n, (e, d) in enumerate(zip(self.values, self.sqrt_deltas())):
            w.writerow([n, repr(float(e)), "" if math.isnan(d) else repr(float(d))])
        text = buf.getvalue()
        if fh is not None:
            if hasattr(fh, "write"):
                fh.write(text)
            else:
                with open(fh, "w", encoding="utf-8", newline="") as out:
                    out.write(text)
        return text


# --- step 1: tangent field smoothing -----------------------------------------

def tfs_energy(p: np.ndarray, tau0_proj: np.ndarray, delta: float, h: float = 1.0) -> float:
    """``||P multi_div p - tau0_proj / delta||^2`` with ``tau0_proj`` already projected."""
    r = project_global(ops.multi_div(p, h), h) - np.asarray(tau0_proj) / delta
    return inner_product(r, r, h)


def tfs_threshold(shape, cfg: SolverConfig) -> float:
    """Stopping threshold on consecutive square-root energies for step 1."""
    return math.sqrt(2.0 * cfg.h**2 * shape[0] * shape[1]) * cfg.tol


def ir_threshold(shape, cfg: SolverConfig) -> float:
    return math.sqrt(cfg.h**2 * shape[0] * shape[1]) * cfg.tol


def chambolle_tfs(tau0: np.ndarray, cfg: SolverConfig, p0: np.ndarray | None = None,
                  tau0_proj: np.ndarray | None = None) -> tuple[np.ndarray, EnergyTrace]:
    """Solve the step-1 dual problem on the extended grid.

    ``tau0`` has shape ``(2, N2+1, N1+1)``.  The projected data ``P tau0`` is
    computed once (pass ``tau0_proj`` to reuse it).  Returns the dual tensor
    field and the energy of every iterate.
    """
    tau0 = np.asarray(tau0, dtype=float)
    if tau0.ndim != 3 or tau0.shape[0] != 2:
        raise ShapeError(f"tangent field must have shape (2, n2, n1), got {tau0.shape}")
    if tau0_proj is None:
        tau0_proj = project_global(tau0, cfg.h)
    shape = tau0.shape[1:]
    if p0 is None:
        p0 = np.zeros((2, 2) + shape)
    p, energies = kernels.tfs_chambolle(p0, tau0_proj / cfg.delta, cfg.h, cfg.t,
                                        cfg.max_it, tfs_threshold(shape, cfg))
    return p, EnergyTrace(energies)


def recover_tangent(p: np.ndarray, tau0: np.ndarray, delta: float, h: float = 1.0) -> np.ndarray:
    """Smoothed tangent field ``P tau0 - delta P multi_div p``."""
    return project_global(np.asarray(tau0, dtype=float) - delta * ops.multi_div(p, h), h)


def compute_xi(tau: np.ndarray, epsilon: float) -> np.ndarray:
    """Regularized unit normal on the primal grid from a tangent field on the extended grid."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    tau = np.asarray(tau, dtype=float)
    tp = ops.perp(tau)[:, :-1, :-1]
    return tp / np.sqrt(np.sum(tp * tp, axis=0) + epsilon)


@dataclass(frozen=True)
class IntegrationReport:
    divergence_residual: float
    path_disagreement: float


def integrate_g(tau: np.ndarray, h: float = 1.0, tol: float = 1e-6,
                report: bool = False):
    """Potential ``g`` on the primal grid whose backward differences match ``tau_perp``.

    The x-component of ``tau_perp = (tau_y, -tau_x)`` is matched by
    ``(g[i,j] - g[i,j-1]) / h`` and the y-component by ``(g[i,j] - g[i-1,j]) / h``
    for every interior pair.  ``g[0,0] = 0``; integration runs down the
    first column, then along each row, and the mean is removed at the end.

    Raises :class:`InconsistentFieldError` when the divergence of ``tau`` on
    the extended grid exceeds ``tol`` in the h-weighted norm.  With
    ``report=True`` also returns an :class:`IntegrationReport` holding that
    residual and the disagreement with the row-first integration order.
    """
    tau = np.asarray(tau, dtype=float)
    residual = norm(ops.div(tau, h), h)
    if residual > tol:
        raise InconsistentFieldError(residual, tol)
    tp = ops.perp(tau)[:, :-1, :-1]
    gx, gy = tp[0], tp[1]
    n2, n1 = gx.shape

    g = np.zeros((n2, n1))
    g[1:, 0] = np.cumsum(h * gy[1:, 0])
    g[:, 1:] = g[:, :1] + np.cumsum(h * gx[:, 1:], axis=1)

    alt = np.zeros((n2, n1))
    alt[0, 1:] = np.cumsum(h * gx[0, 1:])
    alt[1:, :] = alt[:1, :] + np.cumsum(h * gy[1:, :], axis=0)

    g -= g.mean()
    alt -= alt.mean()
    if report:
        return g, IntegrationReport(residual, norm(g - alt, h))
    return g


# --- step 2: image reconstruction --------------------------------------------

def ir_energy(p: np.ndarray, f: np.ndarray, h: float = 1.0) -> float:
    r = ops.div(p, h) - f
    return inner_product(r, r, h)


def chambolle_ir(f: np.ndarray, cfg: SolverConfig,
                 p0: np.ndarray | None = None) -> tuple[np.ndarray, EnergyTrace]:
    """Solve ``min ||div p - f||^2`` over ``|p| <= 1`` on the primal grid."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 2:
        raise ShapeError(f"data must be a scalar field, got shape {f.shape}")
    if p0 is None:
        p0 = np.zeros((2,) + f.shape)
    p, energies = kernels.ir_chambolle(p0, f, cfg.h, cfg.t, cfg.max_it,
                                       ir_threshold(f.shape, cfg))
    return p, EnergyTrace(energies)


def irv1_data(d0: np.ndarray, xi: np.ndarray, alpha: float, h: float = 1.0) -> np.ndarray:
    """Dual data ``alpha d0 - div xi`` for IRV1."""
    return alpha * np.asarray(d0, dtype=float) - ops.div(xi, h)


def irv2_data(d0: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    """Dual data ``alpha (d0 - g)`` for IRV2."""
    return alpha * (np.asarray(d0, dtype=float) - g)


def recover_image_irv1(p: np.ndarray, xi: np.ndarray, d0: np.ndarray, alpha: float,
                       h: float = 1.0) -> np.ndarray:
    return np.asarray(d0, dtype=float) - (ops.div(p, h) + ops.div(xi, h)) / alpha


def recover_image_irv2(p: np.ndarray, d0: np.ndarray, alpha: float, h: float = 1.0) -> np.ndarray:
    return np.asarray(d0, dtype=float) - ops.div(p, h) / alpha
