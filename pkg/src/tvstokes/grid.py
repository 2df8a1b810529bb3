"""Pixel grids, discrete function spaces and rectangle algebra.

Fields are plain ``float64`` numpy arrays whose two trailing axes are the
grid rows and columns.  Leading axes hold the channels:

* scalar field  ``(n2, n1)``
* vector field  ``(2, n2, n1)``        -- components ``(x, y)``
* tensor field  ``(2, 2, n2, n1)``     -- two rows, each a vector field

Row index ``i`` runs vertically (y), column index ``j`` horizontally (x).
Rectangles are stored 0-based and half-open (``rows = slice(r0, r1)``);
:meth:`Rect.from_one_based` and :attr:`Rect.one_based` translate to the
1-based inclusive indices used in the mathematical write-up.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Field or rectangle dimensions do not fit together."""


class DegenerateRectError(ShapeError):
    """A stripe removal would leave an empty rectangle."""


@dataclass(frozen=True)
class Grid:
    """Primal pixel grid with ``n2`` rows, ``n1`` columns and mesh width ``h``."""

    n1: int
    n2: int
    h: float = 1.0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ShapeError(f"grid needs at least one pixel, got {self.n2}x{self.n1}")
        if not self.h > 0:
            raise ShapeError(f"mesh width must be positive, got {self.h}")

    @classmethod
    def of(cls, field: np.ndarray, h: float = 1.0) -> "Grid":
        n2, n1 = np.shape(field)[-2:]
        return cls(n1=int(n1), n2=int(n2), h=h)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def extended(self) -> "Grid":
        """The dual grid with one extra row and column."""
        return Grid(self.n1 + 1, self.n2 + 1, self.h)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def measure(self) -> float:
        """Area ``h^2 * #points`` used by the stopping rules."""
        return self.h**2 * self.size


def inner_product(u: np.ndarray, v: np.ndarray, h: float = 1.0) -> float:
    """h^2-weighted sum of componentwise products (any channel layout)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ShapeError(f"shape mismatch {u.shape} vs {v.shape}")
    return float(h * h * np.vdot(u, v))


def norm(u: np.ndarray, h: float = 1.0) -> float:
    return float(np.sqrt(inner_product(u, u, h)))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned index rectangle inside a parent grid of shape ``parent``.

    ``r0:r1`` and ``c0:c1`` are 0-based half-open row/column ranges.
    """

    r0: int
    r1: int
    c0: int
    c1: int
    parent: tuple[int, int]

    def __post_init__(self):
        pr, pc = self.parent
        if not (0 <= self.r0 < self.r1 <= pr and 0 <= self.c0 < self.c1 <= pc):
            raise ShapeError(f"rectangle {self.bounds} outside parent {self.parent}")

    @classmethod
    def from_one_based(cls, i1: int, i2: int, j1: int, j2: int, parent) -> "Rect":
        """Build from 1-based inclusive bounds ``i1..i2`` x ``j1..j2``."""
        return cls(i1 - 1, i2, j1 - 1, j2, tuple(parent))

    @classmethod
    def full(cls, parent) -> "Rect":
        parent = tuple(parent)
        return cls(0, parent[0], 0, parent[1], parent)

    @property
    def one_based(self) -> tuple[int, int, int, int]:
        """1-based inclusive ``(i1, i2, j1, j2)``."""
        return (self.r0 + 1, self.r1, self.c0 + 1, self.c1)

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        return (self.r0, self.r1, self.c0, self.c1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r1 - self.r0, self.c1 - self.c0)

    @property
    def area(self) -> int:
        return (self.r1 - self.r0) * (self.c1 - self.c0)

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.r0, self.r1), slice(self.c0, self.c1))

    @property
    def rows(self) -> range:
        return range(self.r0, self.r1)

    @property
    def cols(self) -> range:
        return range(self.c0, self.c1)

    def contains(self, other: "Rect") -> bool:
        return (self.r0 <= other.r0 and other.r1 <= self.r1
                and self.c0 <= other.c0 and other.c1 <= self.c1)

    def intersect(self, other: "Rect") -> "Rect | None":
        r0, r1 = max(self.r0, other.r0), min(self.r1, other.r1)
        c0, c1 = max(self.c0, other.c0), min(self.c1, other.c1)
        if r0 >= r1 or c0 >= c1:
            return None
        return Rect(r0, r1, c0, c1, self.parent)

    def relative_to(self, outer: "Rect") -> tuple[slice, slice]:
        """Slices locating ``self`` inside an array living on ``outer``."""
        if not outer.contains(self):
            raise ShapeError(f"{self.bounds} not inside {outer.bounds}")
        return (slice(self.r0 - outer.r0, self.r1 - outer.r0),
                slice(self.c0 - outer.c0, self.c1 - outer.c0))

    def grow(self, top: int = 0, bottom: int = 0, left: int = 0, right: int = 0) -> "Rect":
        """Enlarge by the given margins, clipped to the parent."""
        pr, pc = self.parent
        return Rect(max(self.r0 - top, 0), min(self.r1 + bottom, pr),
                    max(self.c0 - left, 0), min(self.c1 + right, pc), self.parent)

    def clip_to(self, shape) -> "Rect | None":
        """Intersection with the top-left ``shape`` block, re-parented to it."""
        r1, c1 = min(self.r1, shape[0]), min(self.c1, shape[1])
        if self.r0 >= r1 or self.c0 >= c1:
            return None
        return Rect(self.r0, r1, self.c0, c1, tuple(shape))


def rect_plus(r: Rect) -> Rect:
    """Append the one-pixel stripe below and to the right, where the parent allows.

    The row ``i2+1`` is added when ``i2 < N~2`` and the column ``j2+1`` when
    ``j2 < N~1`` (1-based), the corner pixel included so the result stays
    rectangular.
    """
    pr, pc = r.parent
    return Rect(r.r0, min(r.r1 + 1, pr), r.c0, min(r.c1 + 1, pc), r.parent)


def rect_minus(r: Rect) -> Rect:
    """Drop the last row (if ``i2 < N~2``) and last column (if ``j2 < N~1``)."""
    pr, pc = r.parent
    r1 = r.r1 - 1 if r.r1 < pr else r.r1
    c1 = r.c1 - 1 if r.c1 < pc else r.c1
    if r1 <= r.r0 or c1 <= r.c0:
        raise DegenerateRectError(f"removing stripes from {r.one_based} leaves nothing")
    return Rect(r.r0, r1, r.c0, c1, r.parent)


def restrict(u: np.ndarray, r: Rect) -> np.ndarray:
    """Values of ``u`` on ``r`` (a copy); channel axes are preserved."""
    u = np.asarray(u)
    if tuple(u.shape[-2:]) != tuple(r.parent):
        raise ShapeError(f"field grid {u.shape[-2:]} is not the parent {r.parent}")
    return u[(..., *r.slices)].copy()


def extend(u: np.ndarray, r: Rect, parent=None) -> np.ndarray:
    """Zero-extension of a field living on ``r`` to the parent grid."""
    u = np.asarray(u, dtype=float)
    parent = tuple(r.parent if parent is None else parent)
    if parent != tuple(r.parent):
        raise ShapeError(f"rectangle parent {r.parent} differs from {parent}")
    if tuple(u.shape[-2:]) != r.shape:
        raise ShapeError(f"field shape {u.shape[-2:]} does not match rect {r.shape}")
    out = np.zeros(u.shape[:-2] + parent)
    out[(..., *r.slices)] = u
    return out


def transfer(u: np.ndarray, src: Rect, dst: Rect) -> np.ndarray:
    """``R_dst E_src u``: move a field from one rectangle onto another."""
    out = np.zeros(np.shape(u)[:-2] + dst.shape)
    common = src.intersect(dst)
    if common is not None:
        out[(..., *common.relative_to(dst))] = u[(..., *common.relative_to(src))]
    return out


def is_disjoint_cover(rects: Iterable[Rect], shape) -> bool:
    """True iff the rectangles tile ``shape`` without overlap."""
    count = np.zeros(tuple(shape), dtype=int)
    for r in rects:
        count[r.slices] += 1
    return bool(np.all(count == 1))


# --- binary field dump ("TVSF") -------------------------------------------------

_MAGIC = b"TVSF"
_HEADER = struct.Struct("<4sBIId")


def write_tvsf(path, field: np.ndarray, h: float = 1.0) -> None:
    """Write a field as magic, u8 channels, u32 n2, u32 n1, f64 h, then f64 data.

    Channels are the flattened leading axes (1 scalar, 2 vector, 4 tensor).
    """
    field = np.asarray(field, dtype="<f8")
    n2, n1 = field.shape[-2:]
    channels = int(np.prod(field.shape[:-2], dtype=int))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, channels, n2, n1, float(h)))
        fh.write(np.ascontiguousarray(field).tobytes())


def read_tvsf(path) -> tuple[np.ndarray, float]:
    """Inverse of :func:`write_tvsf`; returns ``(field, h)`` with channel shape restored."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ShapeError("truncated TVSF header")
    magic, channels, n2, n1, h = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ShapeError(f"bad magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != channels * n2 * n1:
        raise ShapeError(f"expected {channels * n2 * n1} values, found {data.size}")
    lead: Sequence[int] = {1: (), 2: (2,), 4: (2, 2)}.get(channels, (channels,))
    return data.reshape(tuple(lead) + (n2, n1)).astype(float), h
