import numpy as np
import pytest

from repfwd._layout import T_BREAKS, T_CANCELLED, T_GAMES_FF, T_OFFERED, T_REWIRE_ATTEMPTS
from repfwd.abm import (
    Agent,
    Network,
    Population,
    SimConfig,
    degree_capacity,
    init_population,
    play_pair,
    replicate_generators,
    rewire_step,
    ring_lattice_edges,
    run_replicates,
    ss_step,
    strategy_counts,
    throughput,
    uss_round,
    uss_strategy_update,
)
from repfwd.game import (
    REFERENCE_LINKS,
    Action,
    ConfigError,
    GameParams,
    LinkBreakMatrix,
    Reputation,
    Strategy,
    full_cooperation_baseline,
)

P = GameParams(b=4.0, c=2.0, p_e=0.01, mu=0.1, beta=10.0, omega=0.02, L=4, N=200)


def _ss_config(**kw):
    base = dict(params=P, k=REFERENCE_LINKS, mode="ss", x0=(0.1, 0.6, 0.3), steps=20000,
                replicates=2, seed=11)
    base.update(kw)
    return SimConfig(**base)


def _uss_config(**kw):
    base = dict(params=P.replace(N=300), mode="uss", x0=(0.1, 0.6, 0.3), steps=50,
                replicates=2, seed=11)
    base.update(kw)
    return SimConfig(**base)


# -------------------------------------------------------------- play_pair


def test_play_pair_fd_drops_bad_provider(rng):
    prov = Agent(0, Strategy.FF, Reputation.BAD)
    relay = Agent(1, Strategy.FD)
    out = play_pair(prov, relay, P.replace(mu=0.0), rng)
    assert out.action == Action.DROP and out.relay_payoff == 0 and out.provider_payoff == 0
    assert relay.reputation == Reputation.GOOD
    assert prov.interaction_count == relay.interaction_count == 1


def test_play_pair_forward_lossless(rng):
    prov, relay = Agent(0, Strategy.DD), Agent(1, Strategy.FF)
    out = play_pair(prov, relay, P.replace(p_e=0.0, mu=0.0), rng)
    assert out.delivered and out.provider_payoff == 4.0 and out.relay_payoff == -2.0
    assert prov.average_payoff == 4.0 and relay.average_payoff == -2.0


def test_play_pair_total_loss(rng):
    prov, relay = Agent(0, Strategy.FF), Agent(1, Strategy.FF)
    out = play_pair(prov, relay, P.replace(p_e=1.0), rng)
    assert not out.delivered and out.provider_payoff == 0 and out.relay_payoff == -2.0


def test_play_pair_rejects_self(rng):
    a = Agent(0, Strategy.FF)
    with pytest.raises(ValueError):
        play_pair(a, a, P, rng)


# ------------------------------------------------------------ construction


def test_strategy_counts():
    assert list(strategy_counts(100, (0.2, 0.3, 0.5))) == [20, 30, 50]
    assert strategy_counts(7, (1 / 3, 1 / 3, 1 / 3)).sum() == 7
    with pytest.raises(ConfigError):
        strategy_counts(10, (0.01, 0.49, 0.5))


def test_ring_lattice():
    for n, L in ((10, 4), (10, 3), (500, 4)):
        net = Network.from_edges(n, ring_lattice_edges(n, L), np.zeros(n, dtype=np.intc))
        assert net.H == n * L // 2
        assert np.all(net.deg == L)
        net.check(np.zeros(n, dtype=np.intc))
    with pytest.raises(ConfigError):
        ring_lattice_edges(5, 3)
    with pytest.raises(ConfigError):
        ring_lattice_edges(4, 4)


def test_degree_capacity():
    assert degree_capacity(500, 4) == 499
    assert degree_capacity(10000, 4) == 256


def test_init_population_is_exact(rng):
    pop, net = init_population(_ss_config(), rng)
    assert list(pop.counts()) == [20, 120, 60]
    assert np.all(pop.rep == 1)
    net.check(pop.strategy)


def test_sim_config_validation():
    with pytest.raises(ConfigError):
        _ss_config(k=None)
    with pytest.raises(ConfigError):
        _uss_config(x0=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        _uss_config(mode="grid")
    with pytest.raises(ConfigError):
        _ss_config(params=P.replace(L=3, N=201))
    assert _uss_config().revisions_per_round == 15


# ----------------------------------------------------------- dynamics ops


def test_uss_round_counts_games(rng):
    s = np.repeat(np.arange(3), 100).astype(np.intc)
    pop = Population.from_strategies(s)
    uss_round(pop, P, rng, rounds=10)
    assert pop.tally[T_OFFERED] == 10 * 300
    assert pop.tally[T_GAMES_FF : T_GAMES_FF + 3].sum() == 2 * 10 * 300
    assert np.all(pop.cnt == 20)


def test_uss_odd_population_leaves_one_idle(rng):
    pop = Population.from_strategies(np.zeros(5, dtype=np.intc))
    uss_round(pop, P, rng)
    assert pop.offered == 4
    assert sorted(pop.cnt) == [0, 2, 2, 2, 2]


def test_uss_strategy_update_resets_accumulator(rng):
    pop = Population.from_strategies(np.array([0, 2], dtype=np.intc))
    uss_round(pop, P, rng, rounds=5)
    uss_strategy_update(pop, P, rng, events=1)
    assert (pop.cnt == 0).sum() == 1


def test_throughput(rng):
    with pytest.raises(ValueError):
        throughput((0, 0))
    pop = Population.from_strategies(np.zeros(1000, dtype=np.intc))
    uss_round(pop, P.replace(p_e=0.2), rng, rounds=50)
    # 25000 Bernoulli(0.8) deliveries
    assert abs(throughput(pop) - 0.8) < 4 * np.sqrt(0.16 / 25000)


def test_full_cooperation_matches_simulation(rng):
    pop = Population.from_strategies(np.zeros(1000, dtype=np.intc))
    uss_round(pop, P, rng, rounds=50)
    pay, thr = full_cooperation_baseline(P)
    assert abs(pop.psum.sum() / pop.cnt.sum() - pay) < 0.02
    assert abs(throughput(pop) - thr) < 0.005


def test_rewire_preserves_structure(rng):
    pop, net = init_population(_ss_config(), rng)
    rewire_step(net, pop, REFERENCE_LINKS, rng, events=20000)
    net.check(pop.strategy)
    assert net.H == 400 and net.deg.sum() == 800
    assert pop.tally[T_REWIRE_ATTEMPTS] == 20000
    assert pop.tally[T_BREAKS] > 0


def test_rewire_on_complete_graph_always_cancels(rng):
    s = np.zeros(3, dtype=np.intc)
    pop = Population.from_strategies(s)
    net = Network.from_edges(3, [(0, 1), (1, 2), (0, 2)], s)
    rewire_step(net, pop, LinkBreakMatrix.uniform(1.0), rng, events=100)
    # every break decision is cancelled: nobody has a free partner
    assert pop.tally[T_BREAKS] == pop.tally[T_CANCELLED] == 100
    assert sorted(map(tuple, map(sorted, net.edges()))) == [(0, 1), (0, 2), (1, 2)]


def test_rewire_tiny_k_never_breaks(rng):
    pop, net = init_population(_ss_config(), rng)
    before = net.edges()
    rewire_step(net, pop, LinkBreakMatrix.uniform(1e-12), rng, events=5000)
    assert net.edges() == before


def test_ss_step_keeps_invariants(rng):
    cfg = _ss_config()
    pop, net = init_population(cfg, rng)
    acc = ss_step(pop, net, P, REFERENCE_LINKS, rng, steps=50000)
    net.check(pop.strategy)
    assert net.H == P.H and pop.N == P.N
    assert acc.sum() == 50000 * net.H


# ---------------------------------------------------------------- records


@pytest.mark.parametrize("make", [_uss_config, _ss_config])
def test_replicates_are_deterministic(make):
    a, b = run_replicates(make()), run_replicates(make())
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.x, rb.x)
        assert np.array_equal(ra.tally, rb.tally)
        assert np.array_equal(ra.ftally, rb.ftally)
    c = run_replicates(make(seed=12))
    assert not np.array_equal(a.records[0].tally, c.records[0].tally)


@pytest.mark.parametrize("make", [_uss_config, _ss_config])
def test_backends_agree(make):
    steps = make().steps // 5
    a = run_replicates(make(backend="c", steps=steps))
    b = run_replicates(make(backend="python", steps=steps))
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.x, rb.x)
        assert np.array_equal(ra.tally, rb.tally)
        assert np.array_equal(ra.ftally, rb.ftally)


@pytest.mark.parametrize("make", [_uss_config, _ss_config])
def test_accounting_identities(make):
    agg = run_replicates(make())
    p = agg.config.params
    for r in agg.records:
        assert r.N == p.N
        if agg.config.mode == "ss":
            assert r.H == p.H
        gains, costs = r.ftally[0], r.ftally[1]
        assert gains == p.b * r.delivered[-1]
        assert costs == p.c * r.forwards[-1]
        assert r.pay_total[-1] == gains - costs
        assert np.all(np.diff(r.offered) >= 0) and np.all(np.diff(r.delivered) >= 0)
        assert r.games[-1] == 2 * r.offered[-1]


def test_per_sample_series_shapes():
    agg = run_replicates(_uss_config(sample_every=5))
    assert agg.times.tolist() == list(range(0, 51, 5))
    assert agg.mean["x1"].shape == (11,)
    assert np.isnan(agg.mean["mean_payoff"][0])
    assert set(agg.terminal) >= {"mean_payoff", "throughput", "x1"}
    np.testing.assert_allclose(agg.mean["x1"] + agg.mean["x2"] + agg.mean["x3"], 1.0)


def test_replicate_generators_independent():
    a, b = replicate_generators(5, 2)
    assert a.random() != b.random()
    assert replicate_generators(5, 1)[0].random() == replicate_generators(5, 3)[0].random()
