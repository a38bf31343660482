"""Greedy sparse selection of rectangles and the quantities built on it.

A selection keeps a rectangle when at most an ``epsilon`` fraction of it is
covered by the last-axis dilations of the rectangles kept before it, after
ordering the input by decreasing last-axis length. All set measures are exact
cell counts on the rasterized masks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .grid import (
    DimensionError,
    Grid,
    GridError,
    GridLike,
    Rect,
    as_grid,
    dilate_perp,
    mask_measure,
    multiplicity,
    project_parallel,
    rasterize,
)
from .operators import strong_maximal


def perp_length(R: Rect) -> int:
    return R.hi[-1] - R.lo[-1]


def _rect_mask(R: Rect, shape) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[R.slices()] = True
    return m


@dataclass(frozen=True, eq=False)
class Selection:
    input: Tuple[Rect, ...]
    chosen: Tuple[Rect, ...]
    epsilon: float
    shape: Tuple[int, ...]

    @cached_property
    def pieces(self) -> List[np.ndarray]:
        """Disjointified sets ``E_k = R_k minus the earlier chosen rectangles``."""
        seen = np.zeros(self.shape, dtype=bool)
        out = []
        for R in self.chosen:
            E = _rect_mask(R, self.shape) & ~seen
            seen[R.slices()] = True
            out.append(E)
        return out

    @cached_property
    def omega(self) -> np.ndarray:
        return rasterize(self.chosen, self.shape)

    @cached_property
    def omega_input(self) -> np.ndarray:
        return rasterize(self.input, self.shape)

    @cached_property
    def multiplicity(self) -> np.ndarray:
        return multiplicity(self.chosen, self.shape)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "shape": list(self.shape),
            "chosen": [R.to_dict() for R in self.chosen],
            "input": [R.to_dict() for R in self.input],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Selection":
        chosen = tuple(Rect.from_dict(r) for r in d["chosen"])
        inp = tuple(Rect.from_dict(r) for r in d.get("input", d["chosen"]))
        if "shape" in d:
            shape = tuple(int(s) for s in d["shape"])
        else:
            shape = tuple(int(x) for x in np.max([R.hi for R in inp], axis=0))
        return cls(inp, chosen, float(d["epsilon"]), shape)


def greedy_select(rects: Sequence[Rect], epsilon: float, domain: Union[Grid, Sequence[int]]) -> Selection:
    """Sparse subfamily: each kept rectangle is at most an ``epsilon`` fraction covered by earlier dilations.

    ``domain`` is a grid or a shape; it only fixes the lattice the dilated
    rectangles are clipped to.
    """
    if not 0 < epsilon < 1:
        raise GridError(f"epsilon must lie in (0, 1), got {epsilon}")
    shape = domain.shape if isinstance(domain, Grid) else tuple(int(s) for s in domain)
    rects = tuple(rects)
    if not rects:
        raise GridError("greedy_select needs at least one rectangle")
    for R in rects:
        if not R.within(shape):
            raise GridError(f"{R} is not inside the domain {shape}")
    ordered = sorted(rects, key=perp_length, reverse=True)  # stable
    dilated = np.zeros(shape, dtype=bool)
    chosen = []
    for S in ordered:
        if np.count_nonzero(dilated[S.slices()]) <= epsilon * S.cells:
            chosen.append(S)
            D = dilate_perp(S).clip(shape)
            dilated[D.slices()] = True
    return Selection(rects, tuple(chosen), float(epsilon), shape)


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_ratio: float
    location: dict
    checked: int

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "worst_ratio": self.worst_ratio,
            "location": self.location,
            "checked": self.checked,
        }


def check_p2(sel: Selection) -> CheckReport:
    """Sparseness: decreasing last sides and small overlap with earlier dilations."""
    ordered = all(perp_length(a) >= perp_length(b) for a, b in zip(sel.chosen, sel.chosen[1:]))
    dilated = np.zeros(sel.shape, dtype=bool)
    worst, where = 0.0, {}
    for k, R in enumerate(sel.chosen):
        ratio = np.count_nonzero(dilated[R.slices()]) / R.cells
        if ratio > worst:
            worst, where = ratio, {"k": k}
        D = dilate_perp(R).clip(sel.shape)
        dilated[D.slices()] = True
    if not ordered:
        where = dict(where, ordering="violated")
    return CheckReport("sparseness", ordered and worst <= sel.epsilon, worst, where, len(sel.chosen))


def check_p1_slices(sel: Selection) -> CheckReport:
    """Undilated sparseness of the sliced family at every last-axis level ``t``."""
    if len(sel.shape) < 2:
        raise DimensionError("slices need n >= 2")
    worst, where, checked = 0.0, {}, 0
    for t in range(sel.shape[-1]):
        union = np.zeros(sel.shape[:-1], dtype=bool)
        for k, R in enumerate(sel.chosen):
            if not R.lo[-1] <= t < R.hi[-1]:
                continue
            T = project_parallel(R)
            ratio = np.count_nonzero(union[T.slices()]) / T.cells
            checked += 1
            if ratio > worst:
                worst, where = ratio, {"k": k, "t": t}
            union[T.slices()] = True
    return CheckReport("slice-sparseness", worst <= sel.epsilon, worst, where, checked)


def apply_T(f: GridLike, sel: Selection) -> Grid:
    """``sum_k avg_{R_k} f * 1_{E_k}``."""
    f = as_grid(f)
    out = np.zeros(sel.shape)
    for R, E in zip(sel.chosen, sel.pieces):
        out[E] += np.mean(f.values[R.slices()])
    return f.with_values(out)


def apply_T_star(f: GridLike, sel: Selection) -> Grid:
    """``sum_k (|R_k|^-1 int_{E_k} f) * 1_{R_k}``."""
    f = as_grid(f)
    out = np.zeros(sel.shape)
    for R, E in zip(sel.chosen, sel.pieces):
        out[R.slices()] += np.sum(f.values[E]) / R.cells
    return f.with_values(out)


def recmass_check(sel: Selection, w: GridLike) -> CheckReport:
    """Minimum of ``w(E_k) / w(R_k)``; passes when it lies in [1/2, 1]."""
    w = as_grid(w)
    worst, where, top = math.inf, {}, 0.0
    for k, (R, E) in enumerate(zip(sel.chosen, sel.pieces)):
        ratio = float(np.sum(w.values[E]) / np.sum(w.values[_rect_mask(R, sel.shape)]))
        top = max(top, ratio)
        if ratio < worst:
            worst, where = ratio, {"k": k}
    return CheckReport("recmass", 0.5 <= worst and top <= 1.0, worst, where, len(sel.chosen))


def overlap_norm_ratio(sel: Selection, w: GridLike, p: float) -> float:
    """``(int_Omega m^p w)^(1/p) / w(Omega)^(1/p)`` with m the multiplicity."""
    if not p > 1:
        raise GridError(f"p must exceed 1, got {p}")
    w = as_grid(w)
    om = sel.omega
    m = sel.multiplicity[om].astype(np.float64)
    num = float(np.sum(m**p * w.values[om]))
    return (num / float(np.sum(w.values[om]))) ** (1.0 / p)


def rect_average_floor(w: GridLike, sel: Selection) -> np.ndarray:
    """Cellwise max of ``avg_{R_k} w`` over chosen rectangles containing the cell.

    Sums are taken over boolean masks exactly as in :func:`apply_T_star`, so
    a lone rectangle reproduces ``T* w`` bit for bit.
    """
    w = as_grid(w)
    out = np.zeros(sel.shape)
    for R in sel.chosen:
        avg = np.sum(w.values[_rect_mask(R, sel.shape)]) / R.cells
        region = out[R.slices()]
        np.maximum(region, avg, out=region)
    return out


def exp_functional_Q(
    sel: Selection,
    w: GridLike,
    theta: float,
    delta: float,
    Mw: Optional[np.ndarray] = None,
) -> float:
    """Normalized exponential functional of ``T* w / M w`` over ``{T* w > delta M w}``.

    ``M w`` is floored by the chosen rectangles' own averages so that the
    bound ``avg_R w <= M w`` also holds in floating point.
    """
    w = as_grid(w)
    n = len(sel.shape)
    if n < 2:
        raise DimensionError("the exponential functional needs n >= 2")
    if not (theta > 0 and delta > 0):
        raise GridError("theta and delta must be positive")
    if Mw is None:
        Mw = strong_maximal(w).values
    M = np.maximum(Mw, rect_average_floor(w, sel))
    Tw = apply_T_star(w, sel).values
    region = sel.omega & (Tw > delta * M)
    ratio = Tw[region] / M[region]
    with np.errstate(over="ignore"):
        integrand = np.expm1(theta * ratio ** (1.0 / (n - 1))) * M[region]
    return float(np.sum(integrand)) * w.cell_volume / mask_measure(sel.omega, w)


def cover_ratio(sel: Selection, w: GridLike) -> float:
    w = as_grid(w)
    return mask_measure(sel.omega_input, w) / mask_measure(sel.omega, w)
