"""Orthogonal projection onto discretely divergence-free vector fields.

``project_global`` applies ``I - grad pinv(Lap) div`` on the whole extended
grid.  ``project_local`` evaluates the block ``R_{m+} P E_{k+}`` of the same
operator from data on ``Omega~_{k,+}`` alone, routing the pseudoinverse
through DCT sub-blocks of three disjoint tilings.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import ops
from .grid import Rect, is_disjoint_cover, transfer
from .spectral import TilingError, check_partition, laplacian_pinv, laplacian_pinv_block

Intervals = tuple[tuple[int, int], ...]


def project_global(w: np.ndarray, h: float = 1.0) -> np.ndarray:
    """``w - grad pinv(Lap) div w`` for a vector field on the extended grid."""
    w = np.asarray(w, dtype=float)
    return w - ops.grad(laplacian_pinv(ops.div(w, h), h), h)


def split_interval(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    """Cut ``lo:hi`` into ``parts`` consecutive, near-equal, non-empty pieces."""
    n = hi - lo
    if parts < 0 or (parts > 0 and n < parts) or (parts == 0 and n != 0):
        raise TilingError(f"cannot cut {lo}:{hi} into {parts} non-empty pieces")
    out, pos = [], lo
    for i in range(parts):
        size = n // parts + (1 if i < n % parts else 0)
        out.append((pos, pos + size))
        pos += size
    return out


def partition_with(n: int, fixed: tuple[int, int], index: int, count: int) -> Intervals:
    """Partition ``0:n`` into ``count`` intervals whose ``index``-th one is ``fixed``."""
    lo, hi = fixed
    before = split_interval(0, lo, index)
    after = split_interval(hi, n, count - index - 1)
    parts = tuple(before + [(lo, hi)] + after)
    check_partition(parts, n)
    return parts


@dataclass(frozen=True)
class TilingTriple:
    """Three product tilings of the extended grid used by the localized projection.

    Each tiling is given by its row and column intervals (0-based, half-open);
    tile ``(t2, t1)`` is ``rows[t2] x cols[t1]``.  ``k`` marks the A-tile that
    carries the input, ``m`` the B-tile that receives the output.
    """

    shape: tuple[int, int]
    a_rows: Intervals
    a_cols: Intervals
    at_rows: Intervals
    at_cols: Intervals
    b_rows: Intervals
    b_cols: Intervals
    k: tuple[int, int]
    m: tuple[int, int]

    def __post_init__(self):
        n2, n1 = self.shape
        for rows, cols in ((self.a_rows, self.a_cols), (self.at_rows, self.at_cols),
                           (self.b_rows, self.b_cols)):
            check_partition(rows, n2)
            check_partition(cols, n1)

    @staticmethod
    def _tiles(rows, cols, shape) -> dict[tuple[int, int], Rect]:
        return {(a, b): Rect(r[0], r[1], c[0], c[1], shape)
                for a, r in enumerate(rows) for b, c in enumerate(cols)}

    @cached_property
    def a_tiles(self):
        return self._tiles(self.a_rows, self.a_cols, self.shape)

    @cached_property
    def atilde_tiles(self):
        return self._tiles(self.at_rows, self.at_cols, self.shape)

    @cached_property
    def b_tiles(self):
        return self._tiles(self.b_rows, self.b_cols, self.shape)

    @cached_property
    def a_k(self) -> Rect:
        return self.a_tiles[self.k]

    @cached_property
    def b_m(self) -> Rect:
        return self.b_tiles[self.m]

    def is_valid(self) -> bool:
        return all(is_disjoint_cover(t.values(), self.shape)
                   for t in (self.a_tiles, self.atilde_tiles, self.b_tiles))


def embeds(inner: Rect, outer: Rect) -> bool:
    """Whether the grid operators of ``outer`` act like the global ones on ``inner``.

    This needs one spare row below and one spare column to the right of
    ``inner`` unless ``outer`` already reaches the bottom/right grid edge.
    ``rect_minus(outer) == inner`` is the tightest case.
    """
    n2, n1 = outer.parent
    return (outer.contains(inner)
            and (inner.r1 < outer.r1 or outer.r1 == n2)
            and (inner.c1 < outer.c1 or outer.c1 == n1))


def laplacian_pinv_tiled(d_k: np.ndarray, tilings: TilingTriple, h: float = 1.0,
                         workers: int | None = None) -> np.ndarray:
    """``R_{B_m} pinv(Lap) E_{A_k} d_k`` for the distinguished tiles of ``tilings``."""
    return laplacian_pinv_block(d_k, tilings.a_k, tilings.at_rows, tilings.at_cols,
                                tilings.b_m, h, workers)


def project_local(w_k: np.ndarray, k_plus: Rect, m_plus: Rect, tilings: TilingTriple,
                  h: float = 1.0, workers: int | None = None) -> np.ndarray:
    """``R_{m_plus} P E_{k_plus} w_k`` without touching any full-grid array.

    The identity part is a plain transfer between rectangles; the gradient part
    runs the divergence on ``A_k``, the blockwise pseudoinverse into ``B_m`` and
    the gradient on ``B_m``.
    """
    a_k, b_m = tilings.a_k, tilings.b_m
    if not embeds(k_plus, a_k):
        raise TilingError(f"A-tile {a_k.one_based} does not embed {k_plus.one_based}")
    if not embeds(m_plus, b_m):
        raise TilingError(f"B-tile {b_m.one_based} does not embed {m_plus.one_based}")
    w_k = np.asarray(w_k, dtype=float)
    div_a = ops.div(transfer(w_k, k_plus, a_k), h)
    phi_b = laplacian_pinv_tiled(div_a, tilings, h, workers)
    grad_b = ops.grad(phi_b, h)
    return transfer(w_k, k_plus, m_plus) - grad_b[(..., *m_plus.relative_to(b_m))]
