"""Grids, axis-parallel rectangles, summed-area tables and set measures.

Everything lives on a finite uniform lattice. A rectangle is a product of
half-open cell ranges ``[lo_i, hi_i)``; integrals are cell sums multiplied by
the grid's ``cell_volume``. Sets (level sets, unions of rectangles, the
pieces ``E_k`` of a selection) are boolean numpy arrays of the grid shape and
are called masks throughout the package.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

Shape = Tuple[int, ...]


class GridError(ValueError):
    """Invalid grid contents or geometry."""


class DimensionError(GridError):
    """Operation is not defined in this dimension."""


class DegenerateWeightError(GridError):
    """A weight vanishes somewhere it must be strictly positive."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Nonnegative finite values on an n-dimensional uniform lattice.

    The array is copied and frozen on construction.
    """

    values: np.ndarray
    cell_volume: float = 1.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim < 1:
            raise GridError("a grid needs at least one axis")
        if any(s < 1 for s in v.shape):
            raise GridError(f"every axis needs at least one cell, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("grid values must be finite")
        if np.any(v < 0):
            raise GridError("grid values must be nonnegative")
        cv = float(self.cell_volume)
        if not (cv > 0 and np.isfinite(cv)):
            raise GridError(f"cell_volume must be positive, got {self.cell_volume}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "cell_volume", cv)

    @classmethod
    def from_flat(cls, shape: Sequence[int], flat: Sequence[float], cell_volume: float = 1.0) -> "Grid":
        shape = tuple(int(s) for s in shape)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise GridError(f"{flat.size} values do not fill shape {shape}")
        return cls(flat.reshape(shape), cell_volume)

    @classmethod
    def from_signed(cls, values, cell_volume: float = 1.0) -> "Grid":
        """Ingest arbitrary real data as ``|f|``."""
        return cls(np.abs(np.asarray(values, dtype=np.float64)), cell_volume)

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> Shape:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0))

    def total(self) -> float:
        return float(self.values.sum()) * self.cell_volume

    def with_values(self, values) -> "Grid":
        return Grid(values, self.cell_volume)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.cell_volume == other.cell_volume
            and self.shape == other.shape
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"Grid(shape={self.shape}, cell_volume={self.cell_volume})"


GridLike = Union[Grid, np.ndarray, Sequence]


def as_grid(obj: GridLike, cell_volume: float = 1.0) -> Grid:
    """Coerce to a Grid, taking absolute values of raw array input."""
    if isinstance(obj, Grid):
        return obj
    return Grid.from_signed(obj, cell_volume)


@dataclass(frozen=True)
class Rect:
    """Axis-parallel rectangle of whole cells, half-open per axis."""

    lo: Tuple[int, ...]
    hi: Tuple[int, ...]

    def __post_init__(self) -> None:
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise GridError(f"lo/hi length mismatch: {lo} vs {hi}")
        if any(a >= b for a, b in zip(lo, hi)):
            raise GridError(f"empty rectangle lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> Tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def cells(self) -> int:
        return int(np.prod(self.sides))

    def slices(self) -> Tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in zip(self.lo, self.hi))

    def within(self, shape: Sequence[int]) -> bool:
        return len(shape) == self.n and all(
            0 <= a and b <= s for a, b, s in zip(self.lo, self.hi, shape)
        )

    def contains(self, point: Sequence[int]) -> bool:
        return all(a <= x < b for a, b, x in zip(self.lo, self.hi, point))

    def intersect(self, other: "Rect") -> Optional["Rect"]:
        lo = tuple(max(a, c) for a, c in zip(self.lo, other.lo))
        hi = tuple(min(b, d) for b, d in zip(self.hi, other.hi))
        if any(a >= b for a, b in zip(lo, hi)):
            return None
        return Rect(lo, hi)

    def clip(self, shape: Sequence[int]) -> Optional["Rect"]:
        return self.intersect(Rect((0,) * len(shape), tuple(shape)))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, d: dict) -> "Rect":
        return cls(tuple(d["lo"]), tuple(d["hi"]))


def full_rect(shape: Sequence[int]) -> Rect:
    return Rect((0,) * len(shape), tuple(shape))


def iter_rects(shape: Sequence[int]) -> Iterator[Rect]:
    """Every in-domain rectangle, last axis varying fastest."""
    per_axis = [[(a, b) for a in range(s) for b in range(a + 1, s + 1)] for s in shape]
    for combo in itertools.product(*per_axis):
        yield Rect(tuple(c[0] for c in combo), tuple(c[1] for c in combo))


def random_rect(shape: Sequence[int], rng: np.random.Generator, max_side: Optional[Sequence[int]] = None) -> Rect:
    lo, hi = [], []
    for i, s in enumerate(shape):
        cap = s if max_side is None else min(s, int(max_side[i]))
        side = int(rng.integers(1, cap + 1))
        a = int(rng.integers(0, s - side + 1))
        lo.append(a)
        hi.append(a + side)
    return Rect(tuple(lo), tuple(hi))


def random_rects(shape: Sequence[int], count: int, rng: np.random.Generator, max_side=None) -> list:
    return [random_rect(shape, rng, max_side) for _ in range(count)]


# --- summed-area tables -----------------------------------------------------


class PrefixSum:
    """Inclusion-exclusion summed-area table with a zero halo.

    ``sums[i_1, ..., i_n]`` is the sum of the values over the box
    ``[0, i_1) x ... x [0, i_n)``, so every axis has one extra entry.
    """

    def __init__(self, g: GridLike) -> None:
        g = as_grid(g)
        s = np.zeros(tuple(x + 1 for x in g.shape), dtype=np.float64)
        s[tuple(slice(1, None) for _ in g.shape)] = g.values
        for axis in range(g.n):
            np.cumsum(s, axis=axis, out=s)
        s.setflags(write=False)
        self.sums = s
        self.shape = tuple(x + 1 for x in g.shape)
        self.grid_shape = g.shape
        self.cell_volume = g.cell_volume
        n = g.n
        self._corners = [
            (tuple(c), (-1) ** (n - sum(c))) for c in itertools.product((0, 1), repeat=n)
        ]

    def _check(self, R: Rect) -> None:
        if not R.within(self.grid_shape):
            raise GridError(f"{R} is not inside grid of shape {self.grid_shape}")

    def raw_sum(self, R: Rect) -> float:
        self._check(R)
        total = 0.0
        for corner, sign in self._corners:
            idx = tuple(R.hi[i] if c else R.lo[i] for i, c in enumerate(corner))
            total += sign * self.sums[idx]
        return total

    def rect_sum(self, R: Rect) -> float:
        """Integral of the grid over R."""
        return self.raw_sum(R) * self.cell_volume

    def rect_average(self, R: Rect) -> float:
        return max(self.raw_sum(R) / R.cells, 0.0)


def build_prefix(g: GridLike) -> PrefixSum:
    return PrefixSum(g)


def rect_average(P: PrefixSum, R: Rect) -> float:
    return P.rect_average(R)


def prefix_along(a: np.ndarray, axis: int) -> np.ndarray:
    """Cumulative sum along one axis with a leading zero."""
    pad = [(0, 0)] * a.ndim
    pad[axis] = (1, 0)
    return np.cumsum(np.pad(a, pad), axis=axis)


def all_rect_sums(values: np.ndarray) -> np.ndarray:
    """Sums over every in-domain rectangle at once.

    Output axis ``i`` enumerates the intervals ``[a, b)`` of input axis ``i``
    in ``np.triu_indices(L_i + 1, 1)`` order. Cost and memory are
    ``prod_i L_i (L_i + 1) / 2``.
    """
    out = np.asarray(values, dtype=np.float64)
    for axis in range(out.ndim):
        p = prefix_along(out, axis)
        a, b = np.triu_indices(out.shape[axis] + 1, 1)
        out = np.take(p, b, axis=axis) - np.take(p, a, axis=axis)
    return out


def all_rect_counts(shape: Sequence[int]) -> np.ndarray:
    """Cell counts matching the layout of :func:`all_rect_sums`."""
    out = np.ones((), dtype=np.float64)
    for s in shape:
        a, b = np.triu_indices(s + 1, 1)
        out = np.multiply.outer(out, (b - a).astype(np.float64))
    return out


# --- slice / projection / dilation ------------------------------------------


def _need_2d(R: Rect) -> None:
    if R.n < 2:
        raise DimensionError("slicing and parallel projection need n >= 2")


def slice_rect(R: Rect, t: int) -> Optional[Rect]:
    """Section of R by the hyperplane ``x_n = t``; None when it misses."""
    _need_2d(R)
    if R.lo[-1] <= t < R.hi[-1]:
        return Rect(R.lo[:-1], R.hi[:-1])
    return None


def project_parallel(R: Rect) -> Rect:
    _need_2d(R)
    return Rect(R.lo[:-1], R.hi[:-1])


def project_perp(R: Rect) -> Tuple[int, int]:
    """Last-axis interval ``(lo, hi)``."""
    return R.lo[-1], R.hi[-1]


def product(parallel: Rect, perp: Tuple[int, int]) -> Rect:
    return Rect(parallel.lo + (perp[0],), parallel.hi + (perp[1],))


def dilate_interval(a: int, b: int) -> Tuple[int, int]:
    d = b - a
    return a - d, b + d


def dilate_perp(R: Rect) -> Rect:
    """Triple the last side about its center; may leave the domain."""
    a, b = dilate_interval(R.lo[-1], R.hi[-1])
    return Rect(R.lo[:-1] + (a,), R.hi[:-1] + (b,))


# --- masks and measures -----------------------------------------------------


def rasterize(rects: Iterable[Rect], shape: Sequence[int]) -> np.ndarray:
    """Mask of the union of rects, clipped to the domain."""
    m = np.zeros(tuple(shape), dtype=bool)
    for R in rects:
        c = R.clip(shape)
        if c is not None:
            m[c.slices()] = True
    return m


def multiplicity(rects: Iterable[Rect], shape: Sequence[int]) -> np.ndarray:
    """Integer count of rects covering each cell."""
    m = np.zeros(tuple(shape), dtype=np.int64)
    for R in rects:
        c = R.clip(shape)
        if c is not None:
            m[c.slices()] += 1
    return m


def union_measure(rects: Iterable[Rect], clip: Sequence[int]) -> int:
    return int(np.count_nonzero(rasterize(rects, clip)))


def mask_measure(m: np.ndarray, w: Optional[Grid] = None, cell_volume: Optional[float] = None) -> float:
    """``w(m)``, or the Lebesgue measure of m when no weight is given."""
    m = np.asarray(m, dtype=bool)
    if w is None:
        cv = 1.0 if cell_volume is None else cell_volume
        return float(np.count_nonzero(m)) * cv
    if w.shape != m.shape:
        raise GridError(f"mask shape {m.shape} does not match weight shape {w.shape}")
    return float(np.sum(w.values[m])) * w.cell_volume
