import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strongmax.grid import DegenerateWeightError, Grid, GridError, Rect
from strongmax.operators import (
    composition_maximal,
    cube_maximal,
    directional_maximal,
    hl_maximal_1d,
    level_measure,
    strong_maximal,
)
from strongmax.oracle import brute_cube_maximal, brute_strong_maximal


def _intervals(L):
    return [(a, b) for a in range(L) for b in range(a + 1, L + 1)]


def test_constant_is_fixed():
    assert np.array_equal(strong_maximal(np.ones((5, 4))).values, np.ones((5, 4)))
    assert np.array_equal(cube_maximal(np.ones((5, 4))).values, np.ones((5, 4)))
    assert np.array_equal(composition_maximal(np.ones((3, 3, 3))).values, np.ones((3, 3, 3)))


def test_1d_indicator():
    L = 12
    f = np.zeros(L)
    f[0] = 1
    # every interval containing i and 0 starts at 0; shortest one wins
    expect = [max(f[a:b].mean() for a, b in _intervals(L) if a <= i < b) for i in range(L)]
    assert np.allclose(expect, 1 / (np.arange(L) + 1), rtol=0, atol=1e-15)
    assert np.allclose(strong_maximal(f).values, expect, rtol=1e-12, atol=0)


def test_2d_corner_spike():
    f = np.zeros((8, 8))
    f[0, 0] = 1
    i, j = np.indices((8, 8))
    assert np.allclose(brute_strong_maximal(f).values, 1 / ((i + 1) * (j + 1)), rtol=1e-12, atol=0)
    assert np.allclose(strong_maximal(f).values, 1 / ((i + 1) * (j + 1)), rtol=1e-12, atol=0)


def test_hl_hand_enumeration():
    f = np.array([0.0, 0, 4, 0])
    expect = [max(f[a:b].mean() for a, b in _intervals(4) if a <= i < b) for i in range(4)]
    assert np.allclose(expect, [4 / 3, 2, 4, 2])
    assert np.allclose(hl_maximal_1d(f).values, expect, rtol=1e-12)
    with pytest.raises(Exception):
        hl_maximal_1d(np.ones((2, 2)))


def test_directional_constant_lines():
    f = np.repeat(np.arange(1.0, 6.0)[:, None], 4, axis=1)
    assert np.array_equal(directional_maximal(f, 1).values, f)
    with pytest.raises(GridError):
        directional_maximal(f, 2)


def test_composition_1d_is_hl(rng):
    f = rng.random(13)
    assert np.array_equal(composition_maximal(f).values, hl_maximal_1d(f).values)


@pytest.mark.parametrize("shape", [(7,), (5, 9), (4, 5, 6)])
def test_matches_brute_force(rng, shape):
    for _ in range(3):
        f = rng.random(shape) * 10
        fast = strong_maximal(f).values
        slow = brute_strong_maximal(f).values
        assert np.max(np.abs(fast - slow) / slow) <= 1e-12


def test_weighted_matches_brute_force(rng):
    f = rng.random((6, 7))
    w = np.exp(rng.standard_normal((6, 7)))
    fast = strong_maximal(f, w).values
    slow = brute_strong_maximal(f, w).values
    assert np.max(np.abs(fast - slow) / slow) <= 1e-12


def test_unit_weight_is_bit_identical(rng):
    f = rng.random((9, 11))
    assert np.array_equal(strong_maximal(f, np.ones((9, 11))).values, strong_maximal(f).values)


def test_weight_errors():
    with pytest.raises(DegenerateWeightError):
        strong_maximal(np.ones((3, 3)), np.zeros((3, 3)))
    with pytest.raises(GridError):
        strong_maximal(np.ones((3, 3)), np.ones((3, 4)))


def test_witness_is_maximizing(rng):
    f = rng.random((6, 5))
    M = strong_maximal(f, track=True)
    for cell in itertools.product(range(6), range(5)):
        R = M.witness(cell)
        assert R.contains(cell)
        assert f[R.slices()].mean() == pytest.approx(M.values[cell], rel=1e-12)
    with pytest.raises(ValueError):
        strong_maximal(f).witness((0, 0))


def test_cube_spike_oracle():
    f = np.zeros((8, 8))
    f[3, 5] = 1.0
    assert np.allclose(cube_maximal(f).values, brute_cube_maximal(f).values, rtol=1e-12, atol=0)


def test_domination_chain(rng):
    for _ in range(20):
        f = rng.random((8, 8))
        strong = strong_maximal(f).values
        tol = 1e-12 * strong
        assert np.all(composition_maximal(f).values >= strong - tol)
        assert np.all(cube_maximal(f).values <= strong + tol)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(0.01, 100))
def test_positive_homogeneity(seed, c):
    f = np.random.default_rng(seed).random((5, 6))
    assert np.allclose(strong_maximal(c * f).values, c * strong_maximal(f).values, rtol=1e-12, atol=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_and_bounds(seed):
    r = np.random.default_rng(seed)
    f = r.random((4, 7))
    g = f + r.random((4, 7))
    Mf = strong_maximal(f).values
    assert np.all(strong_maximal(g).values >= Mf * (1 - 1e-12))
    assert np.all(Mf >= f * (1 - 1e-12))
    assert np.all(Mf <= f.max() * (1 + 1e-12))


def test_abs_on_ingestion():
    f = np.array([[-1.0, 2.0], [0.0, -3.0]])
    assert np.array_equal(strong_maximal(f).values, strong_maximal(np.abs(f)).values)


def test_level_measure():
    g = Grid(np.ones((8, 8)))
    assert level_measure(g, 2.0) == 0
    assert level_measure(g, 0.5, Grid(np.ones((8, 8)))) == 64
    assert level_measure(g, 1.0) == 0  # strict inequality
    with pytest.raises(GridError):
        level_measure(g, 0.0)


def test_level_measure_monotone(rng):
    g = Grid(rng.random((10, 10)))
    vals = [level_measure(g, lam) for lam in np.linspace(0.01, 1.2, 40)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_dominates_directional_and_averages(rng):
    f = rng.random((6, 7))
    M = strong_maximal(f).values
    for axis in range(2):
        assert np.all(M >= directional_maximal(f, axis).values * (1 - 1e-12))
    for _ in range(50):
        R = Rect((int(rng.integers(6)), int(rng.integers(7))), (6, 7))
        avg = f[R.slices()].mean()
        assert np.all(M[R.slices()] >= avg * (1 - 1e-12))
