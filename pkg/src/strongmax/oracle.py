"""Brute-force reference transforms.

Every rectangle is enumerated and summed directly from the grid, with no
prefix sums and no band recursion. These are slow (quartic in the side length
for n = 2) and exist to cross-check the fast operators.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .grid import Grid, GridLike, as_grid, iter_rects


def brute_strong_maximal(f: GridLike, w: Optional[GridLike] = None) -> Grid:
    f = as_grid(f)
    v = f.values
    wv = None if w is None else as_grid(w).values
    out = np.zeros(f.shape)
    for R in iter_rects(f.shape):
        sl = R.slices()
        if wv is None:
            avg = np.sum(v[sl]) / R.cells
        else:
            avg = np.sum(v[sl] * wv[sl]) / np.sum(wv[sl])
        region = out[sl]
        np.maximum(region, avg, out=region)
    return f.with_values(out)


def brute_cube_maximal(f: GridLike) -> Grid:
    f = as_grid(f)
    v = f.values
    out = np.zeros(f.shape)
    for R in iter_rects(f.shape):
        if len(set(R.sides)) != 1:
            continue
        sl = R.slices()
        region = out[sl]
        np.maximum(region, np.sum(v[sl]) / R.cells, out=region)
    return f.with_values(out)


def brute_a1_constant(w: GridLike) -> float:
    """``max_R avg_R w / min_R w`` by direct enumeration."""
    v = as_grid(w).values
    return max(float(np.mean(v[R.slices()]) / np.min(v[R.slices()])) for R in iter_rects(v.shape))


def brute_ap_constant(w: GridLike, p: float) -> float:
    v = as_grid(w).values
    dual = v ** (-1.0 / (p - 1.0))
    best = 0.0
    for R in iter_rects(v.shape):
        sl = R.slices()
        best = max(best, float(np.mean(v[sl]) * np.mean(dual[sl]) ** (p - 1.0)))
    return best
