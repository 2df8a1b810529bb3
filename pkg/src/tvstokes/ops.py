"""Finite-difference operators on primal and extended grids.

All operators act on the two trailing axes and broadcast over leading
channel axes.  ``grad``/``div`` are adjoint up to sign in the h-weighted
inner product of :mod:`tvstokes.grid`:  <grad u, p> = -<u, div p>.
"""
from __future__ import annotations

import enum

import numpy as np

from .grid import Rect, ShapeError


class Axis(enum.Enum):
    X = -1  # columns
    Y = -2  # rows


def _axis(axis) -> int:
    if isinstance(axis, Axis):
        return axis.value
    if axis in ("x", "X"):
        return -1
    if axis in ("y", "Y"):
        return -2
    raise ValueError(f"unknown axis {axis!r}")


def _sl(ax: int, s: slice) -> tuple:
    return (Ellipsis, s) if ax == -1 else (Ellipsis, s, slice(None))


def forward_diff(d: np.ndarray, axis, h: float = 1.0) -> np.ndarray:
    """(d[k+1] - d[k]) / h with a zero last entry along ``axis``."""
    ax = _axis(axis)
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    out[_sl(ax, slice(None, -1))] = d[_sl(ax, slice(1, None))] - d[_sl(ax, slice(None, -1))]
    if h != 1.0:
        out /= h
    return out


def backward_diff(d: np.ndarray, axis, h: float = 1.0) -> np.ndarray:
    """Negative adjoint of :func:`forward_diff`.

    First entry d[0]/h, interior (d[k] - d[k-1])/h, last entry -d[N-2]/h.
    A single-point axis gives 0 (the forward difference is 0 there too).
    """
    ax = _axis(axis)
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    if d.shape[ax] == 1:
        return out
    out[_sl(ax, slice(0, 1))] = d[_sl(ax, slice(0, 1))]
    out[_sl(ax, slice(1, -1))] = d[_sl(ax, slice(1, -1))] - d[_sl(ax, slice(None, -2))]
    out[_sl(ax, slice(-1, None))] = -d[_sl(ax, slice(-2, -1))]
    if h != 1.0:
        out /= h
    return out


def neumann_backward_diff(d: np.ndarray, axis, h: float = 1.0) -> np.ndarray:
    """Backward differences of a primal image, placed on the extended grid.

    The output has one more row and column than ``d``.  Along ``axis`` the
    first and last positions are zero (Neumann), interior positions hold the
    backward difference; along the other axis the extra trailing line repeats
    the last primal line (the mirrored row/column).
    """
    ax = _axis(axis)
    d = np.asarray(d, dtype=float)
    n2, n1 = d.shape[-2:]
    out = np.zeros(d.shape[:-2] + (n2 + 1, n1 + 1))
    if ax == -1:
        diff = (d[..., :, 1:] - d[..., :, :-1]) / h     # (n2, n1-1)
        out[..., :n2, 1:n1] = diff
        out[..., n2, 1:n1] = diff[..., n2 - 1, :]
    else:
        diff = (d[..., 1:, :] - d[..., :-1, :]) / h     # (n2-1, n1)
        out[..., 1:n2, :n1] = diff
        out[..., 1:n2, n1] = diff[..., :, n1 - 1]
    return out


def grad(d: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Forward-difference gradient; output gains a leading axis ``(x, y)``."""
    return np.stack([forward_diff(d, Axis.X, h), forward_diff(d, Axis.Y, h)])


def div(v: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Backward-difference divergence of a vector field ``v[0], v[1]``."""
    return backward_diff(v[0], Axis.X, h) + backward_diff(v[1], Axis.Y, h)


def multi_grad(v: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Row-wise gradient of a vector field: shape (2, n2, n1) -> (2, 2, n2, n1)."""
    return np.stack([grad(v[0], h), grad(v[1], h)])


def multi_div(p: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Row-wise divergence of a tensor field: (2, 2, n2, n1) -> (2, n2, n1)."""
    return np.stack([div(p[0], h), div(p[1], h)])


def laplacian(d: np.ndarray, h: float = 1.0) -> np.ndarray:
    return div(grad(d, h), h)


def tangent_field(d0: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Rotated gradient ``(-D_y d0, D_x d0)`` on the extended grid."""
    return np.stack([-neumann_backward_diff(d0, Axis.Y, h),
                     neumann_backward_diff(d0, Axis.X, h)])


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate a vector field by -90 degrees: (v1, v2) -> (v2, -v1)."""
    return np.stack([v[1], -v[0]])


# --- windowed evaluation ------------------------------------------------------
#
# The domain-decomposition solvers hold fields only on a sub-rectangle of the
# global grid.  These helpers evaluate the *global* operator on a window,
# reading nothing outside the rectangle the data lives on.

def _window_diff(a: np.ndarray, ax: int, lo: int, dlo: int, dhi: int, n: int,
                 h: float, backward: bool) -> np.ndarray:
    src = np.moveaxis(a, ax, 0)
    m = src.shape[0]
    idx = np.arange(dlo, dhi)
    if backward:
        cur_w = ((idx < n - 1) & (n > 1)).astype(float)
        prev_w = ((idx >= 1) & (n > 1)).astype(float)
        cur_i, prev_i = idx - lo, idx - 1 - lo
        need = np.concatenate([cur_i[cur_w > 0], prev_i[prev_w > 0]])
    else:
        cur_w = (idx < n - 1).astype(float)
        prev_w = cur_w
        cur_i, prev_i = idx + 1 - lo, idx - lo
        need = np.concatenate([cur_i[cur_w > 0], prev_i[cur_w > 0]])
    if need.size and (need.min() < 0 or need.max() >= m):
        raise ShapeError("window needs data outside the rectangle it lives on")
    cur = np.take(src, np.clip(cur_i, 0, m - 1), axis=0)
    prev = np.take(src, np.clip(prev_i, 0, m - 1), axis=0)
    shape = (-1,) + (1,) * (src.ndim - 1)
    res = (cur_w.reshape(shape) * cur - prev_w.reshape(shape) * prev) / h
    return np.moveaxis(res, 0, ax)


def _crop(a: np.ndarray, src: Rect, dst: Rect, ax: int) -> np.ndarray:
    """Crop ``a`` (living on ``src``) to ``dst`` along the axis other than ``ax``."""
    if ax == -1:
        return a[..., dst.r0 - src.r0:dst.r1 - src.r0, :]
    return a[..., :, dst.c0 - src.c0:dst.c1 - src.c0]


def div_window(v: np.ndarray, src: Rect, dst: Rect, h: float = 1.0) -> np.ndarray:
    """``R_dst div E_src v`` computed from the data on ``src`` only.

    Valid when every backward stencil on ``dst`` reaches into ``src`` or
    off-support zeros it already accounts for; raises otherwise.
    """
    n2, n1 = src.parent
    vx = _crop(v[0], src, dst, -1)
    vy = _crop(v[1], src, dst, -2)
    return (_window_diff(vx, -1, src.c0, dst.c0, dst.c1, n1, h, True)
            + _window_diff(vy, -2, src.r0, dst.r0, dst.r1, n2, h, True))


def grad_window(d: np.ndarray, src: Rect, dst: Rect, h: float = 1.0) -> np.ndarray:
    """``R_dst grad E_src d`` from the data on ``src`` only."""
    n2, n1 = src.parent
    dx = _crop(d, src, dst, -1)
    dy = _crop(d, src, dst, -2)
    return np.stack([_window_diff(dx, -1, src.c0, dst.c0, dst.c1, n1, h, False),
                     _window_diff(dy, -2, src.r0, dst.r0, dst.r1, n2, h, False)])
