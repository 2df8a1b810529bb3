"""Overlapping domain decomposition for the dual problems.

The grid is covered by ``m2 x m1`` overlapping rectangles.  Each outer sweep
solves, for every subdomain at once, a weighted local dual problem whose
pointwise bound is the subdomain's partition-of-unity weight, and then
relaxes the sum of the local solutions with the coloring weight ``alpha_hat``.

For step 2 (``div`` on the primal grid) a local solve only needs the data in
a one-pixel halo around the subdomain.  For step 1 the divergence-free
projection is global; the localized inner loop evaluates the blocks
``R_{m+} P E_{k+}`` through :func:`tvstokes.projection.project_local`, so
every array it allocates lives on a subdomain or a tile.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from . import kernels, ops
from .grid import Grid, Rect, inner_product, rect_plus, transfer
from .projection import (TilingTriple, partition_with, project_global, project_local,
                         split_interval)
from .solvers import EnergyTrace

Index = tuple[int, int]


class LayoutError(ValueError):
    """Subdomain counts, sizes and overlaps do not fit the grid."""


def _axis_intervals(n: int, count: int, overlap: int) -> tuple[tuple[int, int], ...]:
    if count < 1:
        raise LayoutError(f"need at least one subdomain per axis, got {count}")
    if count == 1:
        return ((0, n),)
    if overlap < 2:
        raise LayoutError(f"overlap must be at least 2 grid points, got {overlap}")
    total = n + (count - 1) * overlap
    sizes = [total // count + (1 if i < total % count else 0) for i in range(count)]
    if min(sizes) < overlap + 2:
        raise LayoutError(f"axis of {n} points cannot hold {count} subdomains "
                          f"with overlap {overlap}")
    out, lo = [], 0
    for size in sizes:
        out.append((lo, lo + size))
        lo += size - overlap
    for lo_, hi in out:
        # a subdomain ending two points before the edge leaves no room for
        # the double stripe extension used by the localized projection
        if hi == n - 2:
            raise LayoutError(f"subdomain {lo_}:{hi} ends two points before the edge {n}")
    return tuple(out)


@dataclass(frozen=True)
class DdLayout:
    """Overlapping subdomains on the extended grid.

    ``row_intervals``/``col_intervals`` are 0-based half-open; subdomain
    ``(m2, m1)`` is their product.  The primal subdomains are the
    intersections with the primal grid.
    """

    shape: tuple[int, int]
    m2: int
    m1: int
    overlap_y: int
    overlap_x: int
    row_intervals: tuple[tuple[int, int], ...]
    col_intervals: tuple[tuple[int, int], ...]

    @property
    def primal_shape(self) -> tuple[int, int]:
        return (self.shape[0] - 1, self.shape[1] - 1)

    @property
    def indices(self) -> list[Index]:
        """Subdomain indices in row-major order (the fixed reduction order)."""
        return [(a, b) for a in range(self.m2) for b in range(self.m1)]

    def rect(self, m: Index) -> Rect:
        (r0, r1), (c0, c1) = self.row_intervals[m[0]], self.col_intervals[m[1]]
        return Rect(r0, r1, c0, c1, self.shape)

    def primal_rect(self, m: Index) -> Rect:
        r = self.rect(m).clip_to(self.primal_shape)
        if r is None:  # pragma: no cover - excluded by the size checks
            raise LayoutError(f"subdomain {m} does not meet the primal grid")
        return r

    def rects(self, primal: bool = False) -> list[Rect]:
        get = self.primal_rect if primal else self.rect
        return [get(m) for m in self.indices]


def build_layout(grid: Grid, m2: int, m1: int, overlap_y: int, overlap_x: int) -> DdLayout:
    """Near-uniform ``m2 x m1`` layout on ``grid.extended`` with exact overlaps.

    Along an axis of ``n`` points the pieces have total length
    ``n + (m - 1) * overlap``, split as evenly as possible with the remainder
    going to the first pieces; consecutive pieces share ``overlap`` points.
    """
    shape = grid.extended.shape
    rows = _axis_intervals(shape[0], m2, overlap_y)
    cols = _axis_intervals(shape[1], m1, overlap_x)
    return DdLayout(shape, m2, m1, overlap_y, overlap_x, rows, cols)


def _ramp(n: int, intervals, overlap: int) -> np.ndarray:
    """1D weights: linear ramps of slope 1/(overlap+1) across each overlap band."""
    w = np.zeros((len(intervals), n))
    x = np.arange(n)
    last = len(intervals) - 1
    for i, (lo, hi) in enumerate(intervals):
        up = (x - lo + 1) / (overlap + 1) if i > 0 else np.ones(n)
        down = (hi - x) / (overlap + 1) if i < last else np.ones(n)
        w[i, lo:hi] = np.minimum(np.minimum(up, down), 1.0)[lo:hi]
    return w


@dataclass(frozen=True)
class PartitionOfUnity:
    """Weights ``theta[m2, m1]`` on the extended grid, summing to one."""

    thetas: np.ndarray

    def theta(self, m: Index) -> np.ndarray:
        return self.thetas[m]

    def primal(self, m: Index) -> np.ndarray:
        return self.thetas[m][:-1, :-1]


def build_partition_of_unity(layout: DdLayout) -> PartitionOfUnity:
    wy = _ramp(layout.shape[0], layout.row_intervals, layout.overlap_y)
    wx = _ramp(layout.shape[1], layout.col_intervals, layout.overlap_x)
    th = wy[:, None, :, None] * wx[None, :, None, :]
    th = th / th.sum(axis=(0, 1))
    th.setflags(write=False)
    return PartitionOfUnity(th)


def alpha_hat_for(m1: int, m2: int) -> float:
    """Relaxation weight from the number of colors of the layout."""
    if m1 < 1 or m2 < 1:
        raise LayoutError("subdomain counts must be positive")
    if m1 == 1 and m2 == 1:
        return 1.0
    if m1 == 1 or m2 == 1:
        return 0.5
    return 0.25


@lru_cache(maxsize=None)
def build_tilings(layout: DdLayout, k: Index, m: Index) -> TilingTriple:
    """Tilings for the block ``R_{m+} P E_{k+}``.

    The A-tile at ``k`` is ``rect_plus`` of ``Omega~_{k,+}``; the other rows and
    columns of the A-tiling split the leftover ranges as evenly as possible.
    The B-tiling is built the same way around ``m``; the intermediate tiling
    is a plain even ``m2 x m1`` split.
    """
    n2, n1 = layout.shape

    def around(idx: Index):
        a = rect_plus(rect_plus(layout.rect(idx)))
        return (partition_with(n2, (a.r0, a.r1), idx[0], layout.m2),
                partition_with(n1, (a.c0, a.c1), idx[1], layout.m1))

    a_rows, a_cols = around(k)
    b_rows, b_cols = around(m)
    at_rows = tuple(split_interval(0, n2, layout.m2))
    at_cols = tuple(split_interval(0, n1, layout.m1))
    return TilingTriple((n2, n1), a_rows, a_cols, at_rows, at_cols, b_rows, b_cols, k, m)


# --- problems -------------------------------------------------------------------

@dataclass(frozen=True)
class DdProblem:
    """Dual problem ``min ||Lambda p - data||^2``.

    ``kind == "tfs"``: ``Lambda = P multi_div`` on the extended grid and
    ``data = P tau0 / delta``.  ``kind == "ir"``: ``Lambda = div`` on the
    primal grid and ``data`` is the assembled IRV1/IRV2 right-hand side.
    """

    kind: Literal["tfs", "ir"]
    data: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tfs", "ir"):
            raise ValueError(f"unknown problem kind {self.kind!r}")

    def dual_shape(self) -> tuple[int, ...]:
        n2, n1 = self.data.shape[-2:]
        return (2, 2, n2, n1) if self.kind == "tfs" else (2, n2, n1)

    def residual(self, p: np.ndarray) -> np.ndarray:
        if self.kind == "tfs":
            return project_global(ops.multi_div(p, self.h), self.h) - self.data
        return ops.div(p, self.h) - self.data

    def energy(self, p: np.ndarray) -> float:
        r = self.residual(p)
        return inner_product(r, r, self.h)

    def measure(self) -> float:
        n2, n1 = self.data.shape[-2:]
        return self.h**2 * n2 * n1


@dataclass(frozen=True)
class DdConfig:
    alpha_hat: float | None = None
    max_it: int = 1000
    max_inner_it: int = 10
    outer_tol: float = 1e-10
    t: float = 0.125
    workers: int | None = None
    localized: bool = True

    def __post_init__(self):
        if self.alpha_hat is not None and not 0 < self.alpha_hat <= 1:
            raise ValueError(f"alpha_hat must lie in (0, 1], got {self.alpha_hat}")
        if not 0 < self.t <= 0.125:
            raise ValueError(f"step size must lie in (0, 1/8], got {self.t}")
        if self.max_inner_it < 1 or self.max_it < 0:
            raise ValueError("iteration caps must be positive")


def _others(p: np.ndarray, layout: DdLayout, pou: PartitionOfUnity, m: Index,
            primal: bool) -> np.ndarray:
    """``sum_{l != m} theta_l p`` on the full grid, summed in row-major order."""
    out = np.zeros_like(p)
    for l in layout.indices:
        if l != m:
            out += (pou.primal(l) if primal else pou.theta(l)) * p
    return out


# --- inner loops -----------------------------------------------------------------

def inner_full(problem: DdProblem, m: Index, p: np.ndarray, layout: DdLayout,
               pou: PartitionOfUnity, t: float, max_inner_it: int,
               v0: np.ndarray | None = None, trace: list | None = None) -> np.ndarray:
    """Weighted Chambolle inner loop evaluated on the whole grid (reference path).

    For step 1 this is the loop with the precomputed ``omega0``; returns the
    full-grid iterate after ``max_inner_it`` updates.  When ``trace`` is a
    list every iterate is appended to it.
    """
    h = problem.h
    primal = problem.kind == "ir"
    theta = pou.primal(m) if primal else pou.theta(m)
    rest = _others(p, layout, pou, m, primal)
    v = np.zeros_like(p) if v0 is None else np.array(v0, dtype=float)
    if problem.kind == "tfs":
        omega0 = problem.data - project_global(ops.multi_div(rest, h), h)
        for _ in range(max_inner_it):
            psi = ops.multi_grad(project_global(ops.multi_div(v, h), h) - omega0, h)
            v = kernels.weighted_update(v, psi, theta, t)
            if trace is not None:
                trace.append(v)
    else:
        for _ in range(max_inner_it):
            psi = ops.grad(ops.div(v + rest, h) - problem.data, h)
            v = kernels.weighted_update(v, psi, theta, t)
            if trace is not None:
                trace.append(v)
    return v


def inner_ir(m: Index, p: np.ndarray, f: np.ndarray, layout: DdLayout,
             pou: PartitionOfUnity, t: float, max_inner_it: int,
             v0: np.ndarray | None = None, h: float = 1.0) -> np.ndarray:
    """Local step-2 inner loop on ``Omega_m`` reading ``p`` and ``f`` on a one-pixel halo.

    ``v0`` and the result live on the primal subdomain rectangle.
    """
    sub = layout.primal_rect(m)
    halo = sub.grow(1, 1, 1, 1)
    res_rect = sub.grow(0, 1, 0, 1)
    theta_h = pou.primal(m)[halo.slices]
    theta_s = pou.primal(m)[sub.slices]
    rest = (1.0 - theta_h) * p[(..., *halo.slices)]
    f_loc = f[res_rect.slices]
    inside = sub.relative_to(halo)
    v = np.zeros((2,) + sub.shape) if v0 is None else np.array(v0, dtype=float)
    w = np.empty_like(rest)
    for _ in range(max_inner_it):
        np.copyto(w, rest)
        w[(..., *inside)] += v
        r = ops.div_window(w, halo, res_rect, h) - f_loc
        psi = ops.grad_window(r, res_rect, sub, h)
        v = kernels.weighted_update(v, psi, theta_s, t)
    return v


def assemble_omega0(m: Index, p: np.ndarray, f: np.ndarray, layout: DdLayout,
                    pou: PartitionOfUnity, h: float = 1.0,
                    workers: int | None = None) -> np.ndarray:
    """``R_{m+}(f - P multi_div sum_{k != m} theta_k p)`` from per-subdomain blocks.

    Each contribution ``k`` only reads ``theta_k p`` on ``Omega~_k`` and runs
    through the localized projection from ``Omega~_{k,+}`` to ``Omega~_{m,+}``.
    """
    m_plus = rect_plus(layout.rect(m))
    out = np.array(f[(..., *m_plus.slices)], dtype=float)
    for k in layout.indices:
        if k == m:
            continue
        sub_k = layout.rect(k)
        w = pou.theta(k)[sub_k.slices] * p[(..., *sub_k.slices)]
        if not w.any():
            continue
        k_plus = rect_plus(sub_k)
        u = ops.multi_div(transfer(w, sub_k, k_plus), h)
        out -= project_local(u, k_plus, m_plus, build_tilings(layout, k, m), h, workers)
    return out


def inner_tfs_local(m: Index, omega0_loc: np.ndarray, layout: DdLayout,
                    pou: PartitionOfUnity, t: float, max_inner_it: int,
                    v0: np.ndarray | None = None, h: float = 1.0,
                    workers: int | None = None, trace: list | None = None) -> np.ndarray:
    """Localized step-1 inner loop; iterates live on ``Omega~_m``.

    ``omega0_loc`` lives on ``Omega~_{m,+}`` (see :func:`assemble_omega0`).
    When ``trace`` is a list every iterate is appended to it.
    """
    sub = layout.rect(m)
    sub_plus = rect_plus(sub)
    tilings = build_tilings(layout, m, m)
    theta_s = pou.theta(m)[sub.slices]
    inside = sub.relative_to(sub_plus)
    v = np.zeros((2, 2) + sub.shape) if v0 is None else np.array(v0, dtype=float)
    for _ in range(max_inner_it):
        u = ops.multi_div(transfer(v, sub, sub_plus), h)
        r = project_local(u, sub_plus, sub_plus, tilings, h, workers) - omega0_loc
        psi = ops.multi_grad(r, h)[(..., *inside)]
        v = kernels.weighted_update(v, psi, theta_s, t)
        if trace is not None:
            trace.append(v)
    return v


# --- outer loop ------------------------------------------------------------------

@dataclass
class DdResult:
    p: np.ndarray
    trace: EnergyTrace
    outer_iterations: int


def dd_solve(problem: DdProblem, layout: DdLayout, pou: PartitionOfUnity,
             cfg: DdConfig = DdConfig(), p0: np.ndarray | None = None,
             callback: Callable[[int, np.ndarray, float], bool | None] | None = None) -> DdResult:
    """Parallel overlapping decomposition for ``problem``.

    The trace holds the global dual energy of every outer iterate; it is
    evaluated on the full grid for monitoring only.  Local solves of one
    sweep run in a thread pool and are combined in row-major subdomain order,
    so results do not depend on scheduling.  ``callback(n, p, energy)`` runs
    after every sweep; a true return value stops the iteration.
    """
    h = problem.h
    primal = problem.kind == "ir"
    rect = layout.primal_rect if primal else layout.rect
    theta = pou.primal if primal else pou.theta
    alpha_hat = cfg.alpha_hat if cfg.alpha_hat is not None else alpha_hat_for(layout.m1, layout.m2)
    p = np.zeros(problem.dual_shape()) if p0 is None else np.array(p0, dtype=float)
    if p.shape != problem.dual_shape():
        raise ValueError(f"initial dual field has shape {p.shape}, expected {problem.dual_shape()}")
    q = {m: theta(m)[rect(m).slices] * p[(..., *rect(m).slices)] for m in layout.indices}
    measure = problem.measure()
    energies = [problem.energy(p)]

    def local(m: Index) -> np.ndarray:
        if problem.kind == "ir":
            return inner_ir(m, p, problem.data, layout, pou, cfg.t, cfg.max_inner_it, q[m], h)
        if cfg.localized:
            omega0 = assemble_omega0(m, p, problem.data, layout, pou, h)
            return inner_tfs_local(m, omega0, layout, pou, cfg.t, cfg.max_inner_it, q[m], h)
        full = inner_full(problem, m, p, layout, pou, cfg.t, cfg.max_inner_it,
                          transfer(q[m], rect(m), Rect.full(layout.shape)))
        return full[(..., *rect(m).slices)]

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers and cfg.workers > 1 else None
    n = 0
    try:
        for n in range(1, cfg.max_it + 1):
            if pool is None:
                results = [local(m) for m in layout.indices]
            else:
                results = list(pool.map(local, layout.indices))
            new = (1.0 - alpha_hat) * p
            for m, qm in zip(layout.indices, results):
                q[m] = qm
                new[(..., *rect(m).slices)] += alpha_hat * qm
            p = new
            e = problem.energy(p)
            if not math.isfinite(e):
                raise kernels.NumericalDivergence(f"outer energy not finite at sweep {n}")
            energies.append(e)
            if callback is not None and callback(n, p, e):
                break
            if abs(energies[-2] ** 2 - e**2) / measure < cfg.outer_tol:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return DdResult(p, EnergyTrace(energies), n)


def dd_trace_csv(trace: EnergyTrace, reference: float | None = None, fh=None) -> str:
    """CSV ``n,energy,relative_gap`` of an outer trace (gap empty without reference)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "energy", "relative_gap"])
    for n, e in enumerate(trace.values):
        if reference is None:
            gap = ""
        else:
            gap = repr(float((e - reference) / (abs(reference) if reference != 0 else 1.0)))
        w.writerow([n, repr(float(e)), gap])
    text = buf.getvalue()
    if fh is not None:
        if hasattr(fh, "write"):
            fh.write(text)
        else:
            with open(fh, "w", encoding="utf-8", newline="") as out:
                out.write(text)
    return text
