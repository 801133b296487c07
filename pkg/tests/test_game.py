import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repfwd.game import (
    Action,
    ConfigError,
    GameParams,
    LinkBreakMatrix,
    NumericalError,
    Reputation,
    ReputationState,
    Signal,
    Strategy,
    StrategyDistribution,
    action_of,
    expected_payoffs_uss,
    fermi_probability,
    full_cooperation_baseline,
    noisy_reputation_update,
    observed_signal,
    payoff_matrix_base,
    payoff_matrix_m1,
    payoff_matrix_m2,
    reputation_recursion_step,
    reputation_update,
    stable_reputation,
)
from repfwd.oracles import brute_force_payoffs, iterate_reputation

G, B = Reputation.GOOD, Reputation.BAD
F, D = Action.FORWARD, Action.DROP

simplex = st.tuples(
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)
).filter(lambda t: sum(t) > 1e-6).map(lambda t: tuple(v / sum(t) for v in t))
mus = st.floats(0.0, 0.499)


# ---------------------------------------------------------------- types


def test_strategy_parse_and_indices():
    assert [int(s) for s in Strategy] == [0, 1, 2]
    assert Strategy.parse("fd") is Strategy.FD
    assert str(Strategy.DD) == "DD"
    with pytest.raises(ConfigError):
        Strategy.parse("DF")
    with pytest.raises(ConfigError):
        Strategy.parse("XX")


def test_reputation_is_binary():
    assert len(Reputation) == 2
    assert G.flipped() is B and B.flipped() is G


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(b=0, c=1),
        dict(b=1, c=-1),
        dict(b=1, c=1, p_e=1.5),
        dict(b=1, c=1, mu=0.5),
        dict(b=1, c=1, mu=-0.1),
        dict(b=1, c=1, beta=-1),
        dict(b=1, c=1, omega=1.2),
        dict(b=1, c=1, L=0),
        dict(b=1, c=1, L=4, N=4),
        dict(b=float("nan"), c=1),
    ],
)
def test_game_params_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        GameParams(**kwargs)


def test_game_params_derived():
    p = GameParams(b=4, c=2, p_e=0.01, mu=0.1, L=4, N=100)
    assert p.q == pytest.approx(0.8)
    assert p.delivered_benefit == pytest.approx(3.96)
    assert p.H == 200
    with pytest.raises(ConfigError):
        GameParams(b=1, c=1, L=3, N=5).H


def test_strategy_distribution_invariants():
    StrategyDistribution(0.2, 0.3, 0.5)
    with pytest.raises(ConfigError):
        StrategyDistribution(0.2, 0.3, 0.6)
    with pytest.raises(ConfigError):
        StrategyDistribution(-0.1, 0.6, 0.5)
    with pytest.raises(NumericalError):
        StrategyDistribution(float("nan"), 0.5, 0.5)
    assert tuple(StrategyDistribution.vertex("FD")) == (0.0, 1.0, 0.0)


def test_link_break_matrix():
    k = LinkBreakMatrix.uniform(0.5)
    assert np.all(k.as_matrix() == 0.5)
    with pytest.raises(ConfigError):
        LinkBreakMatrix(0.0, 0.1, 0.1, 0.1, 0.1, 0.1)
    with pytest.raises(ConfigError):
        LinkBreakMatrix.from_matrix([[0.1, 0.2, 0.3], [0.3, 0.1, 0.1], [0.3, 0.1, 0.1]])
    m = np.array([[0.05, 0.25, 0.3], [0.25, 0.25, 0.95], [0.3, 0.95, 0.95]])
    assert np.array_equal(LinkBreakMatrix.from_matrix(m).as_matrix(), m)


# ------------------------------------------------------------ reputation


@pytest.mark.parametrize("rep,act,out", [(G, F, G), (G, D, B), (B, D, G), (B, F, G)])
def test_reputation_update_table(rep, act, out):
    assert reputation_update(rep, act) is out


def test_noisy_update_zero_noise(rng):
    for rep in Reputation:
        for act in Action:
            assert noisy_reputation_update(rep, act, 0.0, rng) is reputation_update(rep, act)


def test_noisy_update_half_noise(rng):
    draws = [noisy_reputation_update(G, F, 0.5, rng) for _ in range(20000)]
    assert abs(np.mean([d == G for d in draws]) - 0.5) < 0.02


def test_noisy_update_monte_carlo(rng):
    draws = [noisy_reputation_update(G, F, 0.1, rng) for _ in range(10**5)]
    assert abs(np.mean([d == G for d in draws]) - 0.9) < 0.01


def test_noisy_update_consumes_one_draw():
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    noisy_reputation_update(G, D, 0.2, a)
    b.random()
    assert a.random() == b.random()


@pytest.mark.parametrize(
    "s,rep,act",
    [(Strategy.FD, G, F), (Strategy.FD, B, D), (Strategy.DD, G, D), (Strategy.FF, B, F)],
)
def test_action_of(s, rep, act):
    assert action_of(s, rep) is act


def test_observed_signal():
    assert observed_signal(F, True) is Signal.f
    assert observed_signal(F, False) is Signal.d
    assert observed_signal(D, True) is Signal.d


def test_stable_reputation_examples():
    r = stable_reputation(0.01, (0.2, 0.3, 0.5))
    assert r.r1 == pytest.approx(0.99) and r.r2 == pytest.approx(0.99)
    assert stable_reputation(0.0, (0, 0, 1)).r3 == pytest.approx(0.5)
    assert stable_reputation(0.1, (0.5, 0.5, 0)).r3 == pytest.approx(0.18)
    r = stable_reputation(0.1, (0.3, 0.4, 0.3))
    assert r.r == pytest.approx(0.3 * 0.9 + 0.4 * 0.9 + 0.3 * r.r3)


def test_recursion_hand_evaluation():
    start = ReputationState.from_classes(1.0, 1.0, 1.0, (0, 0, 1))
    assert reputation_recursion_step(start, (0, 0, 1), 0.1).r3 == pytest.approx(0.55)


def test_recursion_reaches_closed_form():
    x = (0.3, 0.4, 0.3)
    state, _ = iterate_reputation(0.1, x, steps=60)
    assert state.r3 == pytest.approx(0.9 * (1 - 0.8 / 1.24), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(mus, simplex)
def test_closed_form_is_fixed_point(mu, x):
    r = stable_reputation(mu, x)
    nxt = reputation_recursion_step(r, x, mu)
    assert np.allclose(nxt.as_array(), r.as_array(), atol=1e-12, rtol=0)


@settings(max_examples=200, deadline=None)
@given(mus, simplex)
def test_reputation_bounds(mu, x):
    r = stable_reputation(mu, x)
    assert 0 <= r.r3 <= r.r1 <= 1 and 0 <= r.r2 <= 1


def test_r3_monotone_in_x3_and_mu():
    mus_ = np.linspace(0, 0.49, 50)
    x3s = np.linspace(0, 1, 51)
    grid = np.array([[stable_reputation(m, (0, 1 - x3, x3)).r3 for x3 in x3s] for m in mus_])
    assert np.all(np.diff(grid, axis=1) >= -1e-15)
    assert np.all(np.diff(grid, axis=0) >= -1e-15)


# -------------------------------------------------------------- payoffs


def test_payoff_matrices():
    assert np.array_equal(payoff_matrix_base(3, 2), [[1, -2], [3, 0]])
    assert payoff_matrix_base(2, 2)[0, 0] == 0
    assert payoff_matrix_base(7, 5)[1, 1] == 0
    p = GameParams(4, 2, p_e=0.01)
    assert np.allclose(payoff_matrix_m1(p), [[1.96, -2], [3.96, 0]])
    assert np.array_equal(payoff_matrix_m1(GameParams(3, 2)), payoff_matrix_base(3, 2))
    assert np.allclose(payoff_matrix_m1(GameParams(3, 2, p_e=1)), [[-2, -2], [0, 0]])


def test_expected_payoff_examples():
    p = GameParams(4, 2, p_e=0.01)
    P = expected_payoffs_uss(p, (1, 0, 0), stable_reputation(0.0, (1, 0, 0)))
    assert P[0] == pytest.approx(0.98)
    P = expected_payoffs_uss(p, (0, 0, 1), stable_reputation(0.0, (0, 0, 1)))
    assert P[2] == 0.0


def test_fd_beats_ff_without_noise(rng):
    for _ in range(100):
        x = rng.dirichlet(np.ones(3))
        p = GameParams(rng.uniform(1, 5), rng.uniform(0.1, 2), p_e=rng.uniform(0, 1))
        rep = stable_reputation(0.0, x)
        P = expected_payoffs_uss(p, x, rep)
        assert P[1] >= P[0] - 1e-12
        assert (abs(P[1] - P[0]) < 1e-12) == (abs(rep.r - 1) < 1e-12)


def test_brute_force_oracle_agrees(rng):
    for _ in range(100):
        x = rng.dirichlet(np.ones(3))
        mu = rng.uniform(0, 0.49)
        p = GameParams(rng.uniform(0.1, 10), rng.uniform(0.1, 10), p_e=rng.uniform(0, 1), mu=mu)
        rep = stable_reputation(mu, x)
        assert np.allclose(expected_payoffs_uss(p, x, rep), brute_force_payoffs(p, x, rep), atol=1e-12, rtol=0)


def test_m2_examples():
    p = GameParams(4, 2, p_e=0.01, mu=0.1)
    rep = stable_reputation(0.1, (0, 1, 0))
    m = payoff_matrix_m2(p, rep)
    assert m[2, 2] == 0
    assert m[1, 1] == pytest.approx(1.764)
    p0 = GameParams(4, 2)
    m0 = payoff_matrix_m2(p0, stable_reputation(0.0, (0.5, 0.5, 0)))
    assert np.allclose(m0[0], [2, 2, -2]) and np.allclose(m0[1], [2, 2, -2])


def test_fermi():
    assert fermi_probability(1.0, 1.0, 10) == 0.5
    assert fermi_probability(5.0, -3.0, 0) == 0.5
    assert fermi_probability(0.1, 0.0, 10) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-5)
    assert fermi_probability(1e4, 0, 10) == 1.0
    assert 0.0 <= fermi_probability(-1e4, 0, 10) < 1e-300
    with pytest.raises(NumericalError):
        fermi_probability(float("nan"), 0, 1)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 100))
def test_fermi_complement(a, b, beta):
    assert fermi_probability(a, b, beta) + fermi_probability(b, a, beta) == pytest.approx(1.0, abs=1e-12)


def test_full_cooperation_baseline():
    assert full_cooperation_baseline(GameParams(4, 2, p_e=0.01)) == pytest.approx((0.98, 0.99))
    assert full_cooperation_baseline(GameParams(4, 2)) == pytest.approx((1.0, 1.0))
    assert full_cooperation_baseline(GameParams(2, 3))[0] < 0
