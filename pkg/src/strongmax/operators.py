"""Exact maximal transforms on grids.

The strong maximal function is computed by sweeping over every last-axis
band ``[a, b)``: summing the band collapses the problem to one dimension
fewer, and the recursion bottoms out in a one-dimensional interval scan. All
operators here work on a ratio ``sum_R num / sum_R den``; the unweighted
transform uses ``den = 1`` and the weighted one ``num = f*w, den = w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import (
    DegenerateWeightError,
    DimensionError,
    Grid,
    GridError,
    GridLike,
    Rect,
    as_grid,
    mask_measure,
    prefix_along,
)


def _running_max(x: np.ndarray, axis: int, reverse: bool = False):
    """Running maximum along ``axis`` and the index where it was first reached.

    With ``reverse`` the scan runs from the end, so entry ``j`` holds the
    maximum over indices ``>= j``.
    """
    x = np.moveaxis(x, axis, -1)
    if reverse:
        x = x[..., ::-1]
    acc = np.maximum.accumulate(x, axis=-1)
    L = x.shape[-1]
    record = np.empty(x.shape, dtype=bool)
    record[..., 0] = True
    record[..., 1:] = x[..., 1:] > acc[..., :-1]
    idx = np.maximum.accumulate(np.where(record, np.arange(L), 0), axis=-1)
    if reverse:
        acc = acc[..., ::-1]
        idx = (L - 1 - idx)[..., ::-1]
    return np.moveaxis(acc, -1, axis), np.moveaxis(idx, -1, axis)


def _max_ratio_1d(num: np.ndarray, den: np.ndarray, track: bool):
    """Interval scan along the last axis, batched over leading axes."""
    L = num.shape[-1]
    pn = prefix_along(num, -1)
    pd = prefix_along(den, -1)
    sn = pn[..., None, :] - pn[..., :-1, None]  # [..., a, b] = sum over [a, b)
    sd = pd[..., None, :] - pd[..., :-1, None]
    valid = np.triu(np.ones((L, L + 1), dtype=bool), 1)
    avg = np.full(sn.shape, -np.inf)
    np.divide(sn, sd, out=avg, where=np.broadcast_to(valid, sn.shape))
    suf, b_idx = _running_max(avg, -1, reverse=True)  # max over b >= j
    best, a_idx = _running_max(suf, -2)  # then over a <= i
    cells = np.arange(L)
    out = best[..., cells, cells + 1]
    if not track:
        return out, None
    a_star = a_idx[..., cells, cells + 1]
    b_cols = b_idx[..., :, cells + 1]  # [..., a, i]
    b_star = np.take_along_axis(b_cols, a_star[..., None, :], axis=-2)[..., 0, :]
    arg = np.stack([a_star, b_star], axis=-1)[..., None, :]
    return out, arg


def _max_ratio(num: np.ndarray, den: np.ndarray, k: int, track: bool):
    """Maximal ratio over rectangles in the last ``k`` axes of ``num``/``den``.

    Returns the transform and, when ``track`` is set, an integer array of
    shape ``num.shape + (k, 2)`` giving ``(lo, hi)`` per axis of one
    maximizing rectangle. Bands are visited with ``a`` ascending; a later
    band replaces an earlier one only on strict improvement.
    """
    if k == 1:
        return _max_ratio_1d(num, den, track)
    Lk = num.shape[-1]
    pn = prefix_along(num, -1)
    pd = prefix_along(den, -1)
    out = np.full(num.shape, -np.inf)
    arg = np.zeros(num.shape + (k, 2), dtype=np.int64) if track else None
    for a in range(Lk):
        bn = np.moveaxis(pn[..., a + 1:] - pn[..., a:a + 1], -1, -k)
        bd = np.moveaxis(pd[..., a + 1:] - pd[..., a:a + 1], -1, -k)
        sub, subarg = _max_ratio(bn, bd, k - 1, track)
        suf, j_idx = _running_max(sub, -k, reverse=True)
        cand = np.moveaxis(suf, -k, -1)  # aligned with t = a .. Lk-1
        cur = out[..., a:]
        upd = cand > cur
        out[..., a:] = np.where(upd, cand, cur)
        if track:
            j = np.moveaxis(j_idx, -k, -1)
            inner = np.moveaxis(subarg, -k - 2, -3)  # band axis next to (k-1, 2)
            picked = np.take_along_axis(inner, j[..., None, None], axis=-3)
            new = np.empty(cand.shape + (k, 2), dtype=np.int64)
            new[..., : k - 1, :] = picked
            new[..., k - 1, 0] = a
            new[..., k - 1, 1] = a + 1 + j
            arg[..., a:, :, :] = np.where(upd[..., None, None], new, arg[..., a:, :, :])
    return out, arg


@dataclass(frozen=True, eq=False)
class MaximalResult:
    grid: Grid
    family: str
    weighted_by: Optional[Grid] = None
    argmax: Optional[np.ndarray] = None

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    def witness(self, cell: Sequence[int]) -> Rect:
        """A maximizing rectangle containing ``cell`` (needs ``track=True``)."""
        if self.argmax is None:
            raise ValueError("transform was computed without argmax tracking")
        lohi = self.argmax[tuple(cell)]
        return Rect(tuple(lohi[:, 0]), tuple(lohi[:, 1]))


def _check_weight(f: Grid, w: Grid) -> None:
    if w.shape != f.shape:
        raise GridError(f"weight shape {w.shape} does not match {f.shape}")
    if not w.is_positive():
        raise DegenerateWeightError("weight must be strictly positive on every cell")


def strong_maximal(f: GridLike, w: Optional[GridLike] = None, track: bool = False) -> MaximalResult:
    """Exact (weighted) strong maximal function over in-domain rectangles."""
    f = as_grid(f)
    if w is None:
        num, den = f.values, np.ones(f.shape)
    else:
        w = as_grid(w, f.cell_volume)
        _check_weight(f, w)
        num, den = f.values * w.values, w.values
    out, arg = _max_ratio(num, den, f.n, track)
    return MaximalResult(f.with_values(np.maximum(out, 0.0)), "strong", w, arg)


def hl_maximal_1d(f: GridLike) -> Grid:
    f = as_grid(f)
    if f.n != 1:
        raise DimensionError(f"expected a 1-D grid, got n={f.n}")
    return directional_maximal(f, 0)


def directional_maximal(f: GridLike, axis: int) -> Grid:
    """One-dimensional maximal function along ``axis`` (0-based) of every line."""
    f = as_grid(f)
    if not 0 <= axis < f.n:
        raise GridError(f"axis {axis} out of range for n={f.n}")
    v = np.moveaxis(f.values, axis, -1)
    out, _ = _max_ratio_1d(v, np.ones(v.shape), False)
    return f.with_values(np.maximum(np.moveaxis(out, -1, axis), 0.0))


def composition_maximal(f: GridLike, order: Optional[Sequence[int]] = None) -> Grid:
    f = as_grid(f)
    order = list(range(f.n)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(f.n)):
        raise GridError(f"order {order} is not a permutation of the axes")
    g = f
    for axis in order:
        g = directional_maximal(g, axis)
    return g


def cube_maximal(f: GridLike) -> MaximalResult:
    """Maximal average over in-domain cubes (equal side lengths in cells)."""
    f = as_grid(f)
    v = f.values
    out = np.full(f.shape, -np.inf)
    for s in range(1, min(f.shape) + 1):
        sums = v
        for axis in range(f.n):
            p = prefix_along(sums, axis)
            hi = np.take(p, np.arange(s, p.shape[axis]), axis=axis)
            lo = np.take(p, np.arange(0, p.shape[axis] - s), axis=axis)
            sums = hi - lo
        spread = sums / float(s) ** f.n
        # cell x is covered by cube origins in [x - s + 1, x]
        for axis in range(f.n):
            pad = [(0, 0)] * f.n
            pad[axis] = (s - 1, s - 1)
            padded = np.pad(spread, pad, constant_values=-np.inf)
            win = np.lib.stride_tricks.sliding_window_view(padded, s, axis=axis)
            spread = np.take(win.max(axis=-1), np.arange(f.shape[axis]), axis=axis)
        out = np.maximum(out, spread)
    return MaximalResult(f.with_values(np.maximum(out, 0.0)), "cube")


def level_measure(g, lam: float, w: Optional[Grid] = None) -> float:
    """``w({g > lam})`` with strict inequality; Lebesgue measure when w is None."""
    if not lam > 0:
        raise GridError(f"level must be positive, got {lam}")
    if isinstance(g, MaximalResult):
        g = g.grid
    g = as_grid(g)
    return mask_measure(g.values > lam, w, g.cell_volume)
