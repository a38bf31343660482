import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strongmax.grid import DimensionError, Grid, GridError, Rect, dilate_perp, random_rects
from strongmax.operators import strong_maximal
from strongmax.covering import (
    Selection,
    apply_T,
    apply_T_star,
    check_p1_slices,
    check_p2,
    cover_ratio,
    exp_functional_Q,
    greedy_select,
    overlap_norm_ratio,
    perp_length,
    recmass_check,
)
from strongmax.weights import doubling_fit, epsilon_for_weight, generate_weight

SHAPE = (32, 32)


def _family(seed, count=50, shape=SHAPE, max_side=None):
    return random_rects(shape, count, np.random.default_rng(seed), max_side)


def test_identical_rects_keep_first():
    R = Rect((2, 2), (6, 5))
    sel = greedy_select([R, Rect(R.lo, R.hi)], 0.1, (10, 10))
    assert sel.chosen == (R,)


def test_far_apart_rects_both_kept():
    A = Rect((0, 0), (3, 2))
    B = Rect((5, 10), (8, 12))
    assert dilate_perp(A).intersect(dilate_perp(B)) is None
    assert set(greedy_select([A, B], 0.1, (10, 14)).chosen) == {A, B}


def test_greedy_orders_by_last_side_stably():
    rects = [Rect((0, 0), (1, 1)), Rect((3, 0), (4, 4)), Rect((6, 0), (7, 1))]
    sel = greedy_select(rects, 0.1, (8, 20))
    assert sel.chosen == (rects[1], rects[0], rects[2])


def test_greedy_errors():
    R = Rect((0, 0), (2, 2))
    with pytest.raises(GridError):
        greedy_select([R], 0.0, (4, 4))
    with pytest.raises(GridError):
        greedy_select([R], 1.0, (4, 4))
    with pytest.raises(GridError):
        greedy_select([], 0.1, (4, 4))
    with pytest.raises(GridError):
        greedy_select([Rect((0, 0), (5, 2))], 0.1, (4, 4))


def _replay(rects, eps, shape):
    """Independent greedy run: per-cell membership tests, no masks."""
    order = sorted(range(len(rects)), key=lambda i: -perp_length(rects[i]))
    kept = []
    for i in order:
        S = rects[i]
        stars = [dilate_perp(R) for R in kept]
        hit = 0
        for x in range(S.lo[0], S.hi[0]):
            for y in range(S.lo[1], S.hi[1]):
                hit += any(D.contains((x, y)) for D in stars)
        if hit <= eps * S.cells:
            kept.append(S)
        else:
            assert hit > eps * S.cells
    return tuple(kept)


@pytest.mark.parametrize("seed", range(3))
def test_greedy_replay_oracle(seed):
    rects = _family(seed)
    sel = greedy_select(rects, 0.1, SHAPE)
    assert sel.chosen == _replay(rects, 0.1, SHAPE)
    assert check_p2(sel).passed
    assert check_p2(sel).worst_ratio <= 0.1


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
def test_slices_inherit_sparseness(seed, eps):
    sel = greedy_select(_family(seed), eps, SHAPE)
    rep = check_p1_slices(sel)
    assert rep.passed and rep.worst_ratio <= eps


def test_slices_3d():
    rects = _family(1, 40, (10, 10, 10))
    sel = greedy_select(rects, 0.1, (10, 10, 10))
    assert check_p1_slices(sel).passed


def test_constructed_violation():
    A = Rect((0, 0), (6, 6))
    B = Rect((1, 1), (6, 6))
    sel = Selection((A, B), (A, B), 0.1, (8, 8))
    rep = check_p2(sel)
    assert not rep.passed and rep.worst_ratio > 0.1 and rep.location == {"k": 1}
    assert not check_p2(Selection((A, B), (B, Rect((0, 0), (1, 7))), 0.1, (8, 8))).passed
    with pytest.raises(DimensionError):
        check_p1_slices(Selection((), (), 0.1, (8,)))


def test_selection_invariants(rng):
    sel = greedy_select(_family(7), 0.1, SHAPE)
    total = np.zeros(SHAPE, dtype=int)
    for E in sel.pieces:
        total += E
    assert total.max() == 1
    assert np.array_equal(total.astype(bool), sel.omega)
    assert np.all(sel.multiplicity[sel.omega] >= 1)
    assert greedy_select(sel.chosen, 0.1, SHAPE).chosen == sel.chosen


def test_selection_json_roundtrip():
    sel = greedy_select(_family(2, 10), 0.2, SHAPE)
    back = Selection.from_dict(json.loads(json.dumps(sel.to_dict())))
    assert back.chosen == sel.chosen and back.input == sel.input
    assert back.shape == sel.shape and back.epsilon == sel.epsilon


def test_single_rect_T_star():
    R = Rect((1, 2), (4, 6))
    sel = greedy_select([R], 0.1, (6, 8))
    ind = np.zeros((6, 8))
    ind[R.slices()] = 1
    assert np.array_equal(apply_T_star(np.ones((6, 8)), sel).values, ind)
    w = np.arange(1.0, 49).reshape(6, 8)
    assert np.allclose(apply_T_star(w, sel).values, w[R.slices()].mean() * ind, rtol=1e-12)


def test_duality(rng):
    for seed in range(20):
        sel = greedy_select(_family(seed, 20), 0.2, SHAPE)
        f = rng.random(SHAPE)
        g = rng.random(SHAPE)
        lhs = np.sum(apply_T(f, sel).values * g)
        rhs = np.sum(apply_T_star(g, sel).values * f)
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_T_below_maximal(rng):
    f = rng.random(SHAPE)
    M = strong_maximal(f).values
    for seed in range(5):
        sel = greedy_select(_family(seed), 0.1, SHAPE)
        assert np.all(apply_T(f, sel).values <= M * (1 + 1e-12))


def test_recmass_trivial_cases():
    R = Rect((0, 0), (4, 4))
    w = np.exp(np.random.default_rng(0).standard_normal((10, 10)))
    assert recmass_check(greedy_select([R], 0.1, (10, 10)), w).worst_ratio == 1.0
    sel = greedy_select([R, Rect((6, 6), (8, 10))], 0.1, (10, 10))
    rep = recmass_check(sel, w)
    assert rep.passed and rep.worst_ratio == 1.0


def _calibrated(seed, count=50):
    w = generate_weight("lognormal", SHAPE, sigma=0.5, seed=seed)
    eps = epsilon_for_weight(doubling_fit(w, 1000, seed), 0.5)
    return greedy_select(_family(100 + seed, count), eps, SHAPE), w


@pytest.mark.parametrize("seed", range(3))
def test_recmass_calibrated(seed):
    sel, w = _calibrated(seed)
    assert recmass_check(sel, w).passed


@pytest.mark.parametrize("seed", range(3))
def test_T_star_sandwich_and_maximal_bound(seed):
    sel, w = _calibrated(seed)
    assert recmass_check(sel, w).passed
    full = np.zeros(SHAPE)
    for R in sel.chosen:
        full[R.slices()] += w.values[R.slices()].sum() / R.cells
    Tw = apply_T_star(w, sel).values
    assert np.all(0.5 * full <= Tw * (1 + 1e-12))
    assert np.all(Tw <= full * (1 + 1e-12))
    Mw = strong_maximal(w).values
    assert np.all(Tw <= 2 * Mw * sel.multiplicity)


def test_overlap_trivial():
    w = generate_weight("lognormal", (12, 12), seed=1)
    one = greedy_select([Rect((0, 0), (3, 5))], 0.1, (12, 12))
    two = greedy_select([Rect((0, 0), (3, 2)), Rect((6, 8), (9, 10))], 0.1, (12, 12))
    for p in (2, 4, 8, 16):
        assert overlap_norm_ratio(one, w, p) == pytest.approx(1.0, rel=1e-12)
        assert overlap_norm_ratio(two, w, p) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(GridError):
        overlap_norm_ratio(one, w, 1.0)


def test_overlap_growth():
    sel, w = _calibrated(0)
    scaled = [overlap_norm_ratio(sel, w, p) / p for p in (2, 4, 8, 16)]
    assert all(s > 0 for s in scaled)
    assert max(scaled) < 3 * scaled[0]


def test_Q_single_rect_is_zero(rng):
    w = np.exp(rng.standard_normal((9, 9)))
    for lo, hi in [((0, 0), (9, 9)), ((2, 3), (5, 4)), ((4, 4), (5, 5))]:
        sel = greedy_select([Rect(lo, hi)], 0.1, (9, 9))
        assert exp_functional_Q(sel, w, 0.05, 1.0) == 0.0


def test_Q_decreases_with_theta():
    sel, w = _calibrated(1, 100)
    qs = [exp_functional_Q(sel, w, t, 0.5) for t in (0.2, 0.1, 0.05, 0.01, 0.001)]
    assert all(np.isfinite(qs))
    assert all(a >= b for a, b in zip(qs, qs[1:]))
    assert qs[0] > 0 and qs[-1] < 0.01 * qs[0]


def test_Q_errors():
    sel = greedy_select([Rect((0,), (2,))], 0.1, (4,))
    with pytest.raises(DimensionError):
        exp_functional_Q(sel, np.ones(4), 0.1, 1.0)


def test_cover_ratio():
    rects = [Rect((0, 0), (3, 3)), Rect((5, 5), (8, 9))]
    assert cover_ratio(greedy_select(rects, 0.1, (10, 10)), np.ones((10, 10))) == 1.0
    dup = [rects[0], rects[0], rects[0]]
    assert cover_ratio(greedy_select(dup, 0.1, (10, 10)), np.ones((10, 10))) == 1.0
    sel, w = _calibrated(2, 100)
    assert 1.0 <= cover_ratio(sel, w) < np.inf


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.sampled_from([0.05, 0.1, 0.25, 0.5]))
def test_greedy_properties(seed, eps):
    shape = (12, 10)
    rects = random_rects(shape, 15, np.random.default_rng(seed))
    sel = greedy_select(rects, eps, shape)
    assert check_p2(sel).passed
    assert check_p1_slices(sel).passed
    assert greedy_select(sel.chosen, eps, shape).chosen == sel.chosen
