
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from alignflow.errors import EnvelopeViolation, StateExit
from alignflow.odi_oracle import (DeltaGame, OdiSeries, OdiSystem, check_delta_game, check_lemma,
                                  flock_bound, integrate_delta_game, integrate_odi, linear_upper_rate,
                                  smooth_weight)


@pytest.mark.parametrize("boundary", ["upper", "lower", "interior"])
def test_linear_equal_coefficients_matches_matrix_exponential(boundary):
    # with c1 = c2 and lam = Lam every boundary choice is the same linear system
    sys = OdiSystem("linear", boundary, x0=1.0, y0=2.0, lam=1.0, Lam=1.0, c1=3.0, c2=3.0, seed=5)
    s = integrate_odi(sys, 10.0, n_out=101)
    A = np.array([[-3.0, 1.0], [-1.0, 0.0]])
    ref = np.array([expm(A * t) @ [1.0, 2.0] for t in s.t])
    np.testing.assert_allclose(s.X, ref[:, 0], rtol=1e-7, atol=1e-12)
    np.testing.assert_allclose(s.Y, ref[:, 1], rtol=1e-7, atol=1e-12)
    assert check_lemma(sys, s).passed


def test_linear_lower_branch_rate_between_bounds():
    sys = OdiSystem("linear", "lower", x0=1.0, y0=2.0, lam=1.0, Lam=1.0, c1=2.0, c2=0.5)
    s = integrate_odi(sys, 60.0, n_out=3000)
    rep = check_lemma(sys, s)
    assert linear_upper_rate(sys) == 0.5
    assert 0.5 - 1e-6 <= rep.measured["late_rate"] <= 2.0 + 1e-6


def test_underdamped_linear_exits():
    sys = OdiSystem("linear", "upper", x0=1.0, y0=0.0, lam=4.0, Lam=4.0, c1=0.5, c2=0.5)
    with pytest.raises(StateExit) as info:
        integrate_odi(sys, 50.0)
    assert 0 < info.value.time < 50
    s = integrate_odi(sys, 50.0, on_exit="truncate")
    assert s.exited and s.t[-1] <= s.exit_time


@pytest.mark.parametrize("boundary", ["upper", "lower"])
def test_basic_without_barrier_has_decreasing_gap(boundary):
    sys = OdiSystem("basic", boundary, x0=1.0, y0=1.0, lam=1.0, barrier=lambda x: 0.0)
    s = integrate_odi(sys, 20.0, on_exit="truncate")
    keep = s.X > 0
    assert np.all(np.diff(s.Y[keep]) < 0)


def test_flock_bound_holds_for_interior_trajectories():
    for seed in range(5):
        sys = OdiSystem("flock", "interior", x0=1.0, y0=0.5, r=2.0, seed=seed)
        s = integrate_odi(sys, 50.0, on_exit="truncate")
        assert s.X.max() <= flock_bound(sys)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_singular_equality_trajectories_have_predicted_exponents(alpha):
    sys = OdiSystem("singular", "upper", x0=1.0, y0=1.0, lam=0.5, Lam=1.0, c1=1.5, c2=1.0, alpha=alpha)
    s = integrate_odi(sys, 1e4, log_grid=True)
    rep = check_lemma(sys, s)
    assert abs(rep.measured["X_exponent"] - 1 / alpha) <= 0.1 / alpha
    assert rep.measured["h_band"]


def test_delta_game_bound():
    game = DeltaGame(1.0, 0.5)
    t, L = integrate_delta_game(game)
    rep = check_delta_game(game, t, L)
    assert rep.passed and game.exponent == 2.0
    assert np.all(L * (1 + t) ** 2 <= game.bound_constant * (1 + 1e-8))


def test_delta_game_rejects_small_profile():
    game = DeltaGame(1.0, 0.5, c0=0.5 * DeltaGame(1.0, 0.5).c0_min)
    t, L = integrate_delta_game(game)
    with pytest.raises(EnvelopeViolation):
        check_delta_game(game, t, L)


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.floats(0.0, 1e4))
def test_smooth_weight_in_unit_interval(seed, t):
    assert 0.0 <= smooth_weight(seed)(t) <= 1.0


def test_violation_is_raised_with_time():
    sys = OdiSystem("flock", "upper", x0=1.0, y0=0.5, r=2.0)
    t = np.linspace(0, 1, 5)
    fake = OdiSeries(t, np.array([1.0, 2.0, 1e3, 1.0, 1.0]), np.zeros(5))
    with pytest.raises(EnvelopeViolation) as info:
        check_lemma(sys, fake)
    assert info.value.time == 0.5
    assert not check_lemma(sys, fake, raise_on_fail=False).passed


def test_parameter_validation():
    with pytest.raises(ValueError):
        OdiSystem("linear", lam=2.0, Lam=1.0)
    with pytest.raises(ValueError):
        OdiSystem("linear", c1=1.0, c2=2.0)
    with pytest.raises(ValueError):
        OdiSystem("singular", alpha=1.5)
    with pytest.raises(ValueError):
        OdiSystem("quartic")
