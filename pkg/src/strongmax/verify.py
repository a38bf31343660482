"""Empirical harnesses for the maximal inequalities.

Each harness evaluates both sides of an inequality on a grid and reports the
ratio LHS / RHS. Nothing here certifies a constant: the reports record
empirical suprema together with the inputs that produced them.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .covering import (
    Selection,
    cover_ratio,
    exp_functional_Q,
    greedy_select,
    overlap_norm_ratio,
)
from .grid import DimensionError, Grid, GridError, GridLike, Rect, as_grid, mask_measure, random_rect
from .operators import cube_maximal, strong_maximal


class InconsistencyError(RuntimeError):
    """Both sides of an inequality disagree in a way valid inputs cannot produce."""


def phi_n(t, n: int):
    """Orlicz scale ``t (1 + (log+ t)^(n-1))``; plain ``t`` when n == 1."""
    t = np.asarray(t, dtype=np.float64)
    if n <= 1:
        return t * 1.0
    with np.errstate(divide="ignore"):
        logp = np.where(t > 1.0, np.log(np.where(t > 1.0, t, 1.0)), 0.0)
    return t * (1.0 + logp ** (n - 1))


def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0:
        return 0.0
    if rhs == 0:
        raise InconsistencyError(f"right-hand side vanishes while left-hand side is {lhs}")
    return lhs / rhs


# --- single evaluations -----------------------------------------------------


def fs_endpoint_terms(f: GridLike, w: GridLike, lam: float, Mf=None, Mw=None) -> Tuple[float, float]:
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    if not lam > 0:
        raise GridError("lambda must be positive")
    Mf = strong_maximal(f).values if Mf is None else Mf
    Mw = strong_maximal(w).values if Mw is None else Mw
    lhs = mask_measure(Mf > lam, w)
    rhs = float(np.sum(phi_n(f.values / lam, f.n) * Mw)) * f.cell_volume
    return lhs, rhs


def fs_endpoint_ratio(f: GridLike, w: GridLike, lam: float) -> float:
    return _ratio(*fs_endpoint_terms(f, w, lam))


def jmz_terms(f: GridLike, lam: float, Mf=None) -> Tuple[float, float]:
    f = as_grid(f)
    if not lam > 0:
        raise GridError("lambda must be positive")
    Mf = strong_maximal(f).values if Mf is None else Mf
    lhs = float(np.count_nonzero(Mf > lam)) * f.cell_volume
    rhs = float(np.sum(phi_n(f.values / lam, f.n))) * f.cell_volume
    return lhs, rhs


def jmz_ratio(f: GridLike, lam: float) -> float:
    return _ratio(*jmz_terms(f, lam))


def weighted_endpoint_terms(f: GridLike, w: GridLike, lam: float, Mwf=None) -> Tuple[float, float]:
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    if not lam > 0:
        raise GridError("lambda must be positive")
    Mwf = strong_maximal(f, w).values if Mwf is None else Mwf
    lhs = mask_measure(Mwf > lam, w)
    rhs = float(np.sum(phi_n(f.values / lam, f.n) * w.values)) * f.cell_volume
    return lhs, rhs


def weighted_endpoint_ratio(f: GridLike, w: GridLike, lam: float) -> float:
    return _ratio(*weighted_endpoint_terms(f, w, lam))


def hl_fs_endpoint_terms(f: GridLike, w: GridLike, lam: float, MQf=None, MQw=None) -> Tuple[float, float]:
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    if not lam > 0:
        raise GridError("lambda must be positive")
    MQf = cube_maximal(f).values if MQf is None else MQf
    MQw = cube_maximal(w).values if MQw is None else MQw
    lhs = mask_measure(MQf > lam, w)
    rhs = float(np.sum(f.values / lam * MQw)) * f.cell_volume
    return lhs, rhs


def hl_fs_endpoint_ratio(f: GridLike, w: GridLike, lam: float) -> float:
    return _ratio(*hl_fs_endpoint_terms(f, w, lam))


def fs_lp_terms(f: GridLike, w: GridLike, p: float, Mf=None, Mw=None) -> Tuple[float, float]:
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    if not p > 1:
        raise GridError("p must exceed 1")
    Mf = strong_maximal(f).values if Mf is None else Mf
    Mw = strong_maximal(w).values if Mw is None else Mw
    lhs = float(np.sum(Mf**p * w.values)) * f.cell_volume
    rhs = float(np.sum(f.values**p * Mw)) * f.cell_volume
    return lhs, rhs


def fs_lp_ratio(f: GridLike, w: GridLike, p: float) -> float:
    return _ratio(*fs_lp_terms(f, w, p))


# --- reports ----------------------------------------------------------------


@dataclass
class Report:
    inequality: str
    inputs: dict
    sweep: dict
    ratios: List[dict]
    sup_ratio: float
    runtime_ms: int = 0
    passed: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "inequality": self.inequality,
            "inputs": self.inputs,
            "sweep": self.sweep,
            "ratios": self.ratios,
            "sup_ratio": self.sup_ratio,
        }
        if self.passed is not None:
            d["passed"] = self.passed
        if self.extra:
            d["extra"] = self.extra
        if timing:
            d["runtime_ms"] = self.runtime_ms
        return d

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["inequality", "params", "lhs", "rhs", "ratio"])
        for row in self.ratios:
            params = ";".join(f"{k}={v!r}" for k, v in sorted(row["params"].items()))
            writer.writerow([self.inequality, params, repr(row["lhs"]), repr(row["rhs"]), repr(row["ratio"])])
        return buf.getvalue()


def _row(params: dict, lhs: float, rhs: float) -> dict:
    return {"params": params, "lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs)}


def _finish(inequality, inputs, sweep, rows, start, **kw) -> Report:
    sup = max((r["ratio"] for r in rows), default=0.0)
    elapsed = int(round((time.perf_counter() - start) * 1000))
    return Report(inequality, inputs, sweep, rows, sup, elapsed, **kw)


def default_lambdas(f: GridLike, count: int = 17) -> List[float]:
    """Log-spaced levels from ``min positive f / 4`` to ``4 max f``."""
    v = as_grid(f).values
    pos = v[v > 0]
    if pos.size == 0:
        return [1.0]
    return np.geomspace(pos.min() / 4.0, pos.max() * 4.0, count).tolist()


ENDPOINTS = ("fs_endpoint", "jmz", "weighted_endpoint", "hl_fs_endpoint")


def endpoint_sweep(
    inequality: str,
    f: GridLike,
    w: Optional[GridLike] = None,
    lambdas: Optional[Sequence[float]] = None,
    inputs: Optional[dict] = None,
    threads: int = 1,
) -> Report:
    """Sweep one endpoint inequality over levels, reusing the maximal transforms."""
    start = time.perf_counter()
    f = as_grid(f)
    w = Grid(np.ones(f.shape), f.cell_volume) if w is None else as_grid(w, f.cell_volume)
    lambdas = default_lambdas(f) if lambdas is None else [float(x) for x in lambdas]
    if inequality == "fs_endpoint":
        Mf, Mw = strong_maximal(f).values, strong_maximal(w).values
        terms: Callable = lambda lam: fs_endpoint_terms(f, w, lam, Mf, Mw)
    elif inequality == "jmz":
        Mf = strong_maximal(f).values
        terms = lambda lam: jmz_terms(f, lam, Mf)
    elif inequality == "weighted_endpoint":
        Mwf = strong_maximal(f, w).values
        terms = lambda lam: weighted_endpoint_terms(f, w, lam, Mwf)
    elif inequality == "hl_fs_endpoint":
        MQf, MQw = cube_maximal(f).values, cube_maximal(w).values
        terms = lambda lam: hl_fs_endpoint_terms(f, w, lam, MQf, MQw)
    else:
        raise GridError(f"unknown endpoint inequality {inequality!r}")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(terms, lambdas))
    rows = [_row({"lambda": lam}, lhs, rhs) for lam, (lhs, rhs) in zip(lambdas, results)]
    return _finish(inequality, inputs or {"shape": list(f.shape)}, {"lambda": lambdas}, rows, start)


def lp_sweep(f: GridLike, w: GridLike, ps: Sequence[float] = (1.5, 2.0, 4.0), inputs=None) -> Report:
    start = time.perf_counter()
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    Mf, Mw = strong_maximal(f).values, strong_maximal(w).values
    rows = [_row({"p": float(p)}, *fs_lp_terms(f, w, p, Mf, Mw)) for p in ps]
    return _finish("fs_lp", inputs or {"shape": list(f.shape)}, {"p": [float(p) for p in ps]}, rows, start)


# --- operator norms ---------------------------------------------------------


def _trial_functions(shape, trials: int, rng: np.random.Generator) -> List[np.ndarray]:
    out = [np.ones(shape)]
    for i in range(max(trials - 1, 0)):
        kind = i % 3
        if kind == 0:
            f = np.zeros(shape)
            f[tuple(int(rng.integers(s)) for s in shape)] = 1.0
        elif kind == 1:
            f = np.zeros(shape)
            f[random_rect(shape, rng).slices()] = 1.0
        else:
            f = np.exp(rng.standard_normal(shape))
        out.append(f)
    return out


def _weighted_norm_ratios(w: Grid, p: float, funcs) -> List[float]:
    ratios = []
    for f in funcs:
        Mf = strong_maximal(f, w).values
        ratios.append((np.sum(Mf**p * w.values) / np.sum(f**p * w.values)) ** (1.0 / p))
    return ratios


def opnorm_probe(w: GridLike, p: float, trials: int = 16, seed: int = 0) -> float:
    """Empirical lower bound on the norm of the weighted strong maximal on ``L^p(w)``.

    The constant function is always among the trials, so the result is >= 1.
    """
    if not p > 1:
        raise GridError("p must exceed 1")
    w = as_grid(w)
    funcs = _trial_functions(w.shape, trials, np.random.default_rng(seed))
    return float(max(_weighted_norm_ratios(w, p, funcs)))


def opnorm_sweep(w: GridLike, ps=(1.25, 1.5, 2.0, 4.0), trials: int = 16, seed: int = 0, inputs=None) -> Report:
    start = time.perf_counter()
    w = as_grid(w)
    rows = []
    for p in ps:
        probe = opnorm_probe(w, p, trials, seed)
        scale = (p - 1.0) ** (-w.n)
        rows.append({"params": {"p": float(p)}, "lhs": probe, "rhs": scale, "ratio": probe / scale})
    rep = _finish("opnorm", inputs or {"shape": list(w.shape)}, {"p": [float(p) for p in ps]}, rows, start)
    rep.extra = {"probe": {repr(float(r["params"]["p"])): r["lhs"] for r in rows}}
    return rep


# --- the elementary exponential-Young inequality ----------------------------


def _young_parts(theta: float, n: int, s: np.ndarray, t: np.ndarray):
    with np.errstate(over="ignore"):
        exp_part = np.expm1(theta * t ** (1.0 / (n - 1)))
    return phi_n(s, n), exp_part


def _young_need(theta, n, s, t):
    """Smallest c making the inequality hold at each (s, t) with s > 0."""
    phi, ex = _young_parts(theta, n, s, t)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return (np.multiply.outer(s, t) - ex[None, :]) / phi[:, None]


def _young_axis(points: int, upper: float) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-6, upper, points - 1)])


def young_max_need(theta: float, n: int, points: int, upper: float = 1e6, chunk: int = 256):
    """Maximum of the required constant over a log-spaced grid, with its location."""
    s = _young_axis(points, upper)[1:]
    t = _young_axis(points, upper)
    best, where = -math.inf, (0, 0)
    for i in range(0, s.size, chunk):
        need = _young_need(theta, n, s[i:i + chunk], t)
        k = int(np.nanargmax(need))
        val = float(need.flat[k])
        if val > best:
            r, c = divmod(k, t.size)
            best, where = val, (i + r, c)
    return best, s, t, where


def young_violations(c: float, theta: float, n: int, points: int, upper: float = 1e6, chunk: int = 256) -> int:
    """Count grid points where ``st > c s(1+(log+ s)^(n-1)) + exp(theta t^(1/(n-1))) - 1``."""
    s = _young_axis(points, upper)
    t = _young_axis(points, upper)
    bad = 0
    for i in range(0, s.size, chunk):
        ss = s[i:i + chunk]
        phi, ex = _young_parts(theta, n, ss, t)
        lhs = np.multiply.outer(ss, t)
        rhs = c * phi[:, None] + ex[None, :]
        bad += int(np.count_nonzero(lhs > rhs))
    return bad


def young_constant(theta: float, n: int, points: int = 1000, upper: float = 1e6, refine_rounds: int = 6) -> float:
    """Smallest c with ``st <= c s(1+(log+ s)^(n-1)) + exp(theta t^(1/(n-1))) - 1`` on [0, upper]^2.

    Coarse log grid, then zooming refinement around the maximizer, then a
    check on a grid ten times denser per axis; on failure c is raised by 10%
    up to five times.
    """
    if not theta > 0:
        raise GridError("theta must be positive")
    if n < 2:
        raise DimensionError("the exponential-Young inequality needs n >= 2")
    best, s, t, (i, j) = young_max_need(theta, n, points, upper)
    lo_s, hi_s = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
    lo_t, hi_t = t[max(j - 1, 1)], t[min(j + 1, t.size - 1)]
    for _ in range(refine_rounds):
        ss = np.geomspace(lo_s, hi_s, 41)
        tt = np.geomspace(lo_t, hi_t, 41)
        need = _young_need(theta, n, ss, tt)
        k = int(np.nanargmax(need))
        r, q = divmod(k, tt.size)
        best = max(best, float(need[r, q]))
        lo_s, hi_s = ss[max(r - 1, 0)], ss[min(r + 1, ss.size - 1)]
        lo_t, hi_t = tt[max(q - 1, 0)], tt[min(q + 1, tt.size - 1)]
    c = max(best, 0.0)
    for _ in range(6):
        if young_violations(c, theta, n, points * 10, upper) == 0:
            return c
        c *= 1.1
    raise InconsistencyError(f"no verified constant for theta={theta}, n={n}")


def young_report(thetas=(0.5, 1.0), ns=(2, 3), points: int = 1000) -> Report:
    start = time.perf_counter()
    rows = []
    for n in ns:
        for theta in thetas:
            c = young_constant(theta, n, points)
            bad = young_violations(c, theta, n, points * 10)
            rows.append({"params": {"theta": theta, "n": n}, "lhs": c, "rhs": 1.0, "ratio": c, "violations": bad})
    passed = all(r["violations"] == 0 for r in rows)
    return _finish("young", {}, {"theta": list(thetas), "n": list(ns)}, rows, start, passed=passed)


# --- sharpness --------------------------------------------------------------


def sharpness_probe(N_values: Sequence[float], shape=(64, 64), lam: float = 1.0, cell=None) -> Report:
    """Spike ``N 1_cell`` against the log scale and against the linear scale.

    ``r_log`` divides the level-set measure by the Orlicz right-hand side,
    ``r_lin`` by ``N / lam``. Passes when ``r_lin`` at least doubles across
    the sweep while ``max r_log / min r_log < 1.5``.
    """
    start = time.perf_counter()
    shape = tuple(shape)
    n = len(shape)
    cell = (0,) * n if cell is None else tuple(cell)
    rows, r_lin, r_log = [], [], []
    for N in N_values:
        f = np.zeros(shape)
        f[cell] = float(N)
        lhs, rhs = jmz_terms(f, lam)
        lin = float(N) / lam
        rows.append({"params": {"N": float(N)}, "lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "r_lin": _ratio(lhs, lin)})
        r_log.append(_ratio(lhs, rhs))
        r_lin.append(_ratio(lhs, lin))
    grows = r_lin[0] > 0 and r_lin[-1] >= 2.0 * r_lin[0]
    stable = min(r_log) > 0 and max(r_log) / min(r_log) < 1.5
    rep = _finish(
        "sharpness",
        {"shape": list(shape), "cell": list(cell), "lambda": lam},
        {"N": [float(N) for N in N_values]},
        rows,
        start,
        passed=bool(grows and stable),
    )
    rep.extra = {"r_lin": r_lin, "r_log": r_log}
    return rep


# --- the selection pipeline -------------------------------------------------


def extract_witnesses(f: GridLike, lam: float) -> List[Rect]:
    """One maximizing rectangle per cell of ``{M f > lam}``, deduplicated in scan order.

    Each witness is re-checked by direct summation; a cell whose transform
    exceeds ``lam`` only through rounding gets no witness.
    """
    if not lam > 0:
        raise GridError("lambda must be positive")
    f = as_grid(f)
    M = strong_maximal(f, track=True)
    found: Dict[Rect, None] = {}
    for cell in zip(*np.nonzero(M.values > lam)):
        R = M.witness(cell)
        if R not in found and np.sum(f.values[R.slices()]) / R.cells > lam:
            found[R] = None
    return list(found)


@dataclass
class PipelineResult:
    selection: Selection
    level_set: np.ndarray
    w_level_set: float
    w_omega: float

    @property
    def constant(self) -> float:
        return _ratio(self.w_level_set, self.w_omega)


def selection_pipeline(f: GridLike, w: GridLike, lam: float, epsilon: float) -> PipelineResult:
    """Witnesses of ``{M f > lam}`` fed through the greedy selection."""
    f = as_grid(f)
    w = as_grid(w, f.cell_volume)
    F = strong_maximal(f).values > lam
    witnesses = extract_witnesses(f, lam)
    if not witnesses:
        empty = Selection((), (), epsilon, f.shape)
        return PipelineResult(empty, F, mask_measure(F, w), 0.0)
    sel = greedy_select(witnesses, epsilon, f.shape)
    return PipelineResult(sel, F, mask_measure(F, w), mask_measure(sel.omega, w))


def overlap_report(sel: Selection, w: GridLike, ps=(2.0, 4.0, 8.0, 16.0), inputs=None) -> Report:
    start = time.perf_counter()
    n = len(sel.shape)
    rows = []
    for p in ps:
        r = overlap_norm_ratio(sel, w, p)
        rows.append({"params": {"p": float(p)}, "lhs": r, "rhs": float(p) ** (n - 1), "ratio": r / float(p) ** (n - 1)})
    return _finish("overlap", inputs or {"shape": list(sel.shape)}, {"p": [float(p) for p in ps]}, rows, start)


def covering_report(sel: Selection, w: GridLike, thetas=(0.025, 0.05, 0.1), delta: float = 1.0, inputs=None) -> Report:
    start = time.perf_counter()
    w = as_grid(w)
    Mw = strong_maximal(w).values
    rows = []
    for theta in thetas:
        q = exp_functional_Q(sel, w, theta, delta, Mw)
        rows.append({"params": {"theta": float(theta), "delta": delta}, "lhs": q, "rhs": 1.0, "ratio": q})
    rep = _finish("covering", inputs or {"shape": list(sel.shape)}, {"theta": [float(t) for t in thetas]}, rows, start)
    rep.extra = {"cover_ratio": cover_ratio(sel, w)}
    return rep
