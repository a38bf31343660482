"""Strong Muckenhoupt diagnostics for weights on a grid.

All constants are exact maxima over the finite family of in-domain
rectangles. The A_infinity doubling pair ``(c, delta)`` cannot be computed
exactly, so it is fitted as an upper envelope over random (R, S) samples and
then validated on those samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .grid import (
    DegenerateWeightError,
    DimensionError,
    Grid,
    GridError,
    GridLike,
    all_rect_counts,
    all_rect_sums,
    as_grid,
    random_rect,
)
from .operators import strong_maximal


class SamplingError(RuntimeError):
    """Random sampling kept producing degenerate data."""


def _positive(w: GridLike) -> Grid:
    w = as_grid(w)
    if not w.is_positive():
        raise DegenerateWeightError("weight must be strictly positive on every cell")
    return w


def ap_star_constant(w: GridLike, p: float) -> float:
    """``max_R avg_R(w) * avg_R(w^(1-p'))^(p-1)`` over all rectangles."""
    if not p > 1:
        raise GridError(f"A_p constant needs p > 1, got {p}")
    w = _positive(w)
    dual = w.values ** (-1.0 / (p - 1.0))
    counts = all_rect_counts(w.shape)
    a = all_rect_sums(w.values) / counts
    b = all_rect_sums(dual) / counts
    return float(np.max(a * b ** (p - 1.0)))


def a1_star_constant(w: GridLike) -> float:
    """Smallest C with ``M_n w <= C w`` on every cell."""
    w = _positive(w)
    return float(np.max(strong_maximal(w).values / w.values))


def _sample_pair(w: np.ndarray, rng: np.random.Generator) -> Tuple[float, float]:
    """One ``(|S|/|R|, w(S)/w(R))`` pair with S inside R."""
    R = random_rect(w.shape, rng)
    block = w[R.slices()]
    if rng.random() < 0.5:
        S = random_rect(block.shape, rng)
        sub = block[S.slices()]
        return S.cells / R.cells, float(sub.sum() / block.sum())
    keep = rng.random(block.shape) < rng.random()
    if not keep.any():
        keep.flat[rng.integers(block.size)] = True
    return np.count_nonzero(keep) / R.cells, float(block[keep].sum() / block.sum())


def doubling_samples(w: GridLike, samples: int, seed: int) -> np.ndarray:
    """``samples x 2`` array of measure and weight ratios for random S in R."""
    w = _positive(w)
    rng = np.random.default_rng(seed)
    return np.array([_sample_pair(w.values, rng) for _ in range(samples)])


def fit_envelope(pairs: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope in log-log, clamped to (0, 1], lifted to an envelope."""
    x = np.log(pairs[:, 0])
    y = np.log(pairs[:, 1])
    if np.ptp(x) == 0:
        raise SamplingError("all sampled subsets have full measure")
    slope = float(np.polyfit(x, y, 1)[0])
    delta = min(max(slope, 1e-3), 1.0)
    # margin absorbs the log/exp round trip so the envelope holds on every sample
    c = math.exp(float(np.max(y - delta * x))) * (1.0 + 1e-12)
    return c, delta


def doubling_fit(w: GridLike, samples: int = 1000, seed: int = 0) -> Tuple[float, float]:
    """Empirical ``(c, delta)`` with ``w(S)/w(R) <= c (|S|/|R|)^delta`` on every sample."""
    if samples < 100:
        raise GridError("doubling_fit needs at least 100 samples")
    for attempt in range(4):
        pairs = doubling_samples(w, samples, seed + attempt)
        try:
            return fit_envelope(pairs)
        except SamplingError:
            continue
    raise SamplingError("degenerate sampling after 3 retries")


def epsilon_for_weight(fit: Tuple[float, float], safety: float = 0.5) -> float:
    """Sparseness parameter with ``c * eps^delta <= 1/2``, shrunk by ``safety``."""
    c, delta = fit
    if not (c > 0 and delta > 0 and 0 < safety <= 1):
        raise GridError(f"bad fit {fit} or safety {safety}")
    eps = safety * (1.0 / (2.0 * c)) ** (1.0 / delta)
    return min(eps, 0.5)


def slice_uniformity(w: GridLike, p: float) -> float:
    """Worst A_p constant among the slices ``w(., t)`` along the last axis."""
    w = _positive(w)
    if w.n < 2:
        raise DimensionError("slice uniformity needs n >= 2")
    return max(ap_star_constant(w.values[..., t], p) for t in range(w.shape[-1]))


def p0_search(w: GridLike, budget: Sequence[float], ceiling: float = 1e6) -> float:
    """Smallest p in ``budget`` whose A_p constant stays below ``ceiling``.

    Constants grow as p decreases, so the scan stops at the first failure.
    Returns ``inf`` when even the largest p fails.
    """
    best = math.inf
    for p in sorted(budget, reverse=True):
        if ap_star_constant(w, p) < ceiling:
            best = p
        else:
            break
    return best


def _index_grids(shape: Sequence[int]):
    return np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")


def generate_weight(kind: str, shape: Sequence[int], **params) -> Grid:
    """Strictly positive test weights.

    kinds: ``constant(value)``, ``power(alpha)`` with
    ``w = prod_k (i_k + 1/2)^alpha_k``, ``checkerboard(a, b)`` (``a`` on cells
    with even index sum), ``product(factors)`` from one 1-D array per axis,
    ``lognormal(sigma, seed)`` iid ``exp(sigma Z)``, ``spike(height, cell)``
    giving ``1 + height`` at one cell and 1 elsewhere.
    """
    shape = tuple(int(s) for s in shape)
    if kind == "constant":
        v = np.full(shape, float(params.get("value", 1.0)))
    elif kind == "power":
        alpha = np.broadcast_to(np.asarray(params.get("alpha", 0.0), dtype=float), (len(shape),))
        v = np.ones(shape)
        for a, idx in zip(alpha, _index_grids(shape)):
            v = v * (idx + 0.5) ** a
    elif kind == "checkerboard":
        a, b = float(params.get("a", 1.0)), float(params.get("b", 2.0))
        v = np.where(sum(_index_grids(shape)) % 2 == 0, a, b)
    elif kind == "product":
        factors = [np.asarray(u, dtype=float) for u in params["factors"]]
        if tuple(len(u) for u in factors) != shape:
            raise GridError("product factors must match the shape")
        v = np.ones(shape)
        for axis, u in enumerate(factors):
            v = v * u.reshape([-1 if i == axis else 1 for i in range(len(shape))])
    elif kind == "lognormal":
        rng = np.random.default_rng(int(params.get("seed", 0)))
        v = np.exp(float(params.get("sigma", 0.5)) * rng.standard_normal(shape))
    elif kind == "spike":
        v = np.ones(shape)
        cell = tuple(params.get("cell", (0,) * len(shape)))
        v[cell] += float(params.get("height", 1.0))
    else:
        raise GridError(f"unknown weight kind {kind!r}")
    if not np.all(v > 0) or not np.all(np.isfinite(v)):
        raise GridError(f"{kind} parameters {params} produce a non-positive weight")
    return Grid(v, float(params.get("cell_volume", 1.0)))


@dataclass
class WeightProfile:
    w: Grid
    ap_constants: Dict[float, float]
    a1_constant: float
    doubling_fit: Tuple[float, float]
    epsilon: float
    p0: float
    slice_constants: Dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else "inf"

        return {
            "shape": list(self.w.shape),
            "ap_constants": {repr(p): c for p, c in sorted(self.ap_constants.items())},
            "a1_constant": num(self.a1_constant),
            "doubling_fit": {"c": self.doubling_fit[0], "delta": self.doubling_fit[1]},
            "epsilon": self.epsilon,
            "p0": num(self.p0),
            "slice_constants": {repr(p): c for p, c in sorted(self.slice_constants.items())},
        }


def weight_profile(
    w: GridLike,
    ps: Sequence[float] = (4.0, 2.0, 1.5, 1.25, 1.1),
    samples: int = 2000,
    seed: int = 0,
    safety: float = 0.5,
    ceiling: float = 1e6,
) -> WeightProfile:
    w = _positive(w)
    aps = {float(p): ap_star_constant(w, p) for p in ps}
    fit = doubling_fit(w, samples, seed)
    slices = {float(p): slice_uniformity(w, p) for p in ps} if w.n >= 2 else {}
    p0 = math.inf
    for p in sorted(aps, reverse=True):
        if aps[p] >= ceiling:
            break
        p0 = p
    return WeightProfile(
        w=w,
        ap_constants=aps,
        a1_constant=a1_star_constant(w),
        doubling_fit=fit,
        epsilon=epsilon_for_weight(fit, safety),
        p0=p0,
        slice_constants=slices,
    )


def generate_field(kind: str, shape: Sequence[int], **params) -> Grid:
    """Nonnegative test functions; zeros allowed.

    Same kinds as :func:`generate_weight` except that ``spike(height, cell)``
    is ``height`` at one cell and 0 elsewhere, plus ``zero`` and
    ``indicator(lo, hi, height)``.
    """
    shape = tuple(int(s) for s in shape)
    cv = float(params.get("cell_volume", 1.0))
    if kind == "zero":
        return Grid(np.zeros(shape), cv)
    if kind == "spike":
        v = np.zeros(shape)
        v[tuple(params.get("cell", (0,) * len(shape)))] = float(params.get("height", 1.0))
        return Grid(v, cv)
    if kind == "indicator":
        v = np.zeros(shape)
        sl = tuple(slice(a, b) for a, b in zip(params["lo"], params["hi"]))
        v[sl] = float(params.get("height", 1.0))
        return Grid(v, cv)
    return generate_weight(kind, shape, **params)
