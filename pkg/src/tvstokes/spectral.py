"""DCT matrices and the Moore-Penrose inverse of the Neumann Laplacian.

The 2D DCT is applied as ``C_rows @ d @ C_cols.T`` with explicit orthogonal
matrices.  Besides the full-grid pseudoinverse this module evaluates the
block ``R_B pinv(Lap) E_A`` of the pseudoinverse from DCT sub-blocks only, so
that no intermediate is larger than a constant times the biggest tile.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Rect, ShapeError


class TilingError(ValueError):
    """Tilings do not partition the grid as required."""


@dataclass(frozen=True)
class DctPlan:
    n: int
    matrix: np.ndarray = field(repr=False)


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> DctPlan:
    """Orthogonal DCT-II matrix ``C_n`` (row k: sqrt(2/n) cos(k(2j+1)pi/2n))."""
    if n < 1:
        raise ShapeError(f"DCT size must be positive, got {n}")
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.sqrt(2.0 / n) * np.cos(k * (2 * j + 1) * np.pi / (2 * n))
    c[0, :] = np.sqrt(1.0 / n)
    c.setflags(write=False)
    return DctPlan(n, c)


def dct2(d: np.ndarray) -> np.ndarray:
    n2, n1 = d.shape[-2:]
    return dct_matrix(n2).matrix @ d @ dct_matrix(n1).matrix.T


def idct2(d: np.ndarray) -> np.ndarray:
    n2, n1 = d.shape[-2:]
    return dct_matrix(n2).matrix.T @ d @ dct_matrix(n1).matrix


def sigma(n: int, h: float = 1.0) -> np.ndarray:
    """Square roots of the 1D Neumann Laplacian eigenvalues, ascending, sigma[0]=0."""
    return 2.0 / h * np.sin(np.arange(n) * np.pi / (2 * n))


@lru_cache(maxsize=64)
def _inverse_eigenvalues(n2: int, n1: int, h: float) -> np.ndarray:
    s2 = sigma(n2, h) ** 2
    s1 = sigma(n1, h) ** 2
    eig = s2[:, None] + s1[None, :]
    eig[0, 0] = 1.0
    inv = -1.0 / eig
    inv[0, 0] = 0.0
    inv.setflags(write=False)
    return inv


def inverse_eigenvalues(shape, h: float = 1.0) -> np.ndarray:
    """Spectral multipliers of pinv(Lap): -1/(s2_i^2 + s1_j^2), zero at the constant mode.

    Row frequency ``i`` pairs with the row count and column frequency ``j``
    with the column count.
    """
    n2, n1 = shape
    return _inverse_eigenvalues(int(n2), int(n1), float(h))


def laplacian_pinv(d: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Moore-Penrose inverse of the Neumann Laplacian applied to ``d``."""
    d = np.asarray(d, dtype=float)
    return idct2(inverse_eigenvalues(d.shape[-2:], h) * dct2(d))


@lru_cache(maxsize=4096)
def _block(n: int, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    blk = np.ascontiguousarray(dct_matrix(n).matrix[r0:r1, c0:c1])
    blk.setflags(write=False)
    return blk


def dct_block(plan: DctPlan, rows, cols) -> np.ndarray:
    """Sub-block ``C_n[rows, cols]``; ``rows``/``cols`` are 0-based ranges or slices."""
    r0, r1 = _range_bounds(rows, plan.n)
    c0, c1 = _range_bounds(cols, plan.n)
    return _block(plan.n, r0, r1, c0, c1)


def _range_bounds(rng, n: int) -> tuple[int, int]:
    if isinstance(rng, slice):
        lo, hi, step = rng.indices(n)
        if step != 1:
            raise ShapeError("DCT blocks need contiguous index ranges")
    elif isinstance(rng, range):
        if rng.step != 1:
            raise ShapeError("DCT blocks need contiguous index ranges")
        lo, hi = rng.start, rng.stop
    else:
        lo, hi = rng
    if not 0 <= lo < hi <= n:
        raise ShapeError(f"range {lo}:{hi} outside 0:{n}")
    return lo, hi


def check_partition(parts, n: int) -> None:
    """Raise unless ``parts`` are consecutive non-empty intervals covering 0..n."""
    pos = 0
    for lo, hi in parts:
        if lo != pos or hi <= lo:
            raise TilingError(f"intervals {parts} do not partition 0:{n}")
        pos = hi
    if pos != n:
        raise TilingError(f"intervals {parts} do not partition 0:{n}")


def laplacian_pinv_block(d_k: np.ndarray, a_rect: Rect, lam_rows, lam_cols, b_rect: Rect,
                         h: float = 1.0, workers: int | None = None) -> np.ndarray:
    """``R_B pinv(Lap) E_A d_k`` summed over the tiles of the lambda tiling.

    ``lam_rows``/``lam_cols`` are the row and column intervals of the
    intermediate tiling (their products tile the grid).  Each summand maps
    ``d_k`` through four DCT blocks and the tile's own spectral multipliers;
    summands are independent and are reduced in row-major tile order, so the
    result does not depend on ``workers``.
    """
    n2, n1 = a_rect.parent
    if tuple(b_rect.parent) != (n2, n1):
        raise TilingError("input and output rectangles live on different grids")
    if tuple(np.shape(d_k)) != a_rect.shape:
        raise ShapeError(f"block data {np.shape(d_k)} does not match rect {a_rect.shape}")
    check_partition(lam_rows, n2)
    check_partition(lam_cols, n1)
    inv = inverse_eigenvalues((n2, n1), h)
    tasks = [(lr, lc) for lr in lam_rows for lc in lam_cols]

    def summand(task):
        (y0, y1), (x0, x1) = task
        fwd_y = _block(n2, y0, y1, a_rect.r0, a_rect.r1)      # lam_y x A_y
        fwd_x = _block(n1, x0, x1, a_rect.c0, a_rect.c1)      # lam_x x A_x
        coef = fwd_y @ d_k @ fwd_x.T
        coef *= inv[y0:y1, x0:x1]
        back_y = _block(n2, y0, y1, b_rect.r0, b_rect.r1)     # lam_y x B_y
        back_x = _block(n1, x0, x1, b_rect.c0, b_rect.c1)     # lam_x x B_x
        return back_y.T @ coef @ back_x

    if workers and workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(summand, tasks))
    else:
        parts = [summand(t) for t in tasks]
    out = np.zeros(b_rect.shape)
    for part in parts:
        out += part
    return out
