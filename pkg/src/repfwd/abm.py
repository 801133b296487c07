"""Agent-based simulation of the forwarding game.

Two settings are simulated:

* USS: every round the whole population is split into random pairs and each
  pair meets once (both play relay once and provider once). After each round
  a number of random imitation events take place.
* SS: agents sit on a network with a fixed number of links. Each step is a
  strategy event with probability ``omega`` (a random link is picked, both
  endpoints play all of their neighbours, then one imitates the other) and a
  rewiring attempt otherwise.

Per-agent state lives in flat numpy arrays so the kernel backend can work on it
in place; :class:`Agent` objects are snapshots for inspection and small
hand-driven examples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from ._layout import (
    ERR_CAPACITY,
    F_COSTS,
    F_GAINS,
    F_PAY_FF,
    N_FTALLY,
    N_TALLY,
    T_ADOPTIONS,
    T_BREAKS,
    T_CANCELLED,
    T_DELIVERED,
    T_FORWARDS,
    T_GAMES_FF,
    T_OFFERED,
    T_REWIRE_ATTEMPTS,
    T_STRAT_EVENTS,
)
from .game import (
    ConfigError,
    GameParams,
    LinkBreakMatrix,
    NumericalError,
    Reputation,
    Signal,
    Strategy,
    action_of,
    Action,
    cooperation_frequency_of,
    full_cooperation_baseline,  # noqa: F401  (re-exported)
    link_type_index,
    noisy_reputation_update,
    observed_signal,
)

MODES = ("uss", "ss")
DEFAULT_REVISION_RATE = 0.05  # USS imitation events per agent per round


# ------------------------------------------------------------------- agents


@dataclass
class Agent:
    id: int
    strategy: Strategy
    reputation: Reputation = Reputation.GOOD
    payoff_sum: float = 0.0
    interaction_count: int = 0

    @property
    def average_payoff(self) -> float:
        return self.payoff_sum / max(1, self.interaction_count)


@dataclass(frozen=True)
class EncounterOutcome:
    action: Action
    delivered: bool
    signal: Signal
    relay_payoff: float
    provider_payoff: float
    relay_reputation: Reputation


def play_pair(provider: Agent, relay: Agent, params: GameParams, rng) -> EncounterOutcome:
    """The relay handles one packet of the provider; both agents are updated in place.

    Draws from ``rng`` in the same order as the kernels: a delivery draw only
    when the packet is forwarded, then the reputation-noise draw.
    """
    if provider is relay:
        raise ValueError("provider and relay must be distinct agents")
    action = action_of(relay.strategy, provider.reputation)
    relay_pay = provider_pay = 0.0
    delivered = False
    if action == Action.FORWARD:
        relay_pay = -params.c
        delivered = bool(rng.random() < 1.0 - params.p_e)
        if delivered:
            provider_pay = params.b
    new_rep = noisy_reputation_update(provider.reputation, action, params.mu, rng)
    relay.reputation = new_rep
    relay.payoff_sum += relay_pay
    provider.payoff_sum += provider_pay
    relay.interaction_count += 1
    provider.interaction_count += 1
    return EncounterOutcome(
        action, delivered, observed_signal(action, delivered), relay_pay, provider_pay, new_rep
    )


# -------------------------------------------------------------- containers


@dataclass
class Population:
    """Strategies, reputations, payoff accumulators and event counters."""

    strategy: np.ndarray
    rep: np.ndarray
    psum: np.ndarray
    cnt: np.ndarray
    tally: np.ndarray = field(default_factory=lambda: np.zeros(N_TALLY, dtype=np.int64))
    ftally: np.ndarray = field(default_factory=lambda: np.zeros(N_FTALLY))

    @classmethod
    def from_strategies(cls, strategies) -> "Population":
        s = np.ascontiguousarray(strategies, dtype=np.intc)
        n = len(s)
        return cls(s, np.ones(n, dtype=np.uint8), np.zeros(n), np.zeros(n, dtype=np.int64))

    @property
    def N(self) -> int:
        return len(self.strategy)

    def counts(self) -> np.ndarray:
        return np.bincount(self.strategy, minlength=3)

    @property
    def x(self) -> np.ndarray:
        return self.counts() / self.N

    def arrays(self):
        return self.strategy, self.rep, self.psum, self.cnt, self.tally, self.ftally

    def agents(self) -> list[Agent]:
        return [
            Agent(i, Strategy(int(s)), Reputation(int(r)), float(p), int(c))
            for i, (s, r, p, c) in enumerate(zip(self.strategy, self.rep, self.psum, self.cnt))
        ]

    def good_fraction(self) -> np.ndarray:
        """Good-reputation share within each strategy class (nan for empty classes)."""
        out = np.full(3, np.nan)
        for s in range(3):
            mask = self.strategy == s
            if mask.any():
                out[s] = self.rep[mask].mean()
        return out

    @property
    def offered(self) -> int:
        return int(self.tally[T_OFFERED])

    @property
    def delivered(self) -> int:
        return int(self.tally[T_DELIVERED])

    @property
    def forwards(self) -> int:
        return int(self.tally[T_FORWARDS])

    @property
    def total_gains(self) -> float:
        return float(self.ftally[F_GAINS])

    @property
    def total_costs(self) -> float:
        return float(self.ftally[F_COSTS])

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.psum)) and np.all(np.isfinite(self.ftally))):
            raise NumericalError("non-finite payoff accumulator")


@dataclass
class Network:
    """Undirected multigraph-free network with a fixed edge list.

    Edge ``e`` joins ``eu[e]`` and ``ev[e]``. ``inc[v, :deg[v]]`` lists the
    edges at ``v`` and ``slot[e]`` stores where ``e`` sits in each endpoint's
    list, so edges can be moved in O(1).
    """

    eu: np.ndarray
    ev: np.ndarray
    inc: np.ndarray
    deg: np.ndarray
    slot: np.ndarray
    typecount: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges, strategy, capacity: Optional[int] = None) -> "Network":
        edges = list(edges)
        cap = capacity or degree_capacity(n, 2 * len(edges) // max(n, 1))
        eu = np.array([e[0] for e in edges], dtype=np.intc)
        ev = np.array([e[1] for e in edges], dtype=np.intc)
        inc = np.full((n, cap), -1, dtype=np.intc)
        deg = np.zeros(n, dtype=np.intc)
        slot = np.zeros((len(edges), 2), dtype=np.intc)
        for e, (u, v) in enumerate(edges):
            for end, node in enumerate((u, v)):
                if deg[node] >= cap:
                    raise ConfigError("initial degree exceeds capacity")
                inc[node, deg[node]] = e
                slot[e, end] = deg[node]
                deg[node] += 1
        net = cls(eu, ev, inc, deg, slot, np.zeros(6, dtype=np.int64))
        net.recount(strategy)
        return net

    @property
    def H(self) -> int:
        return len(self.eu)

    @property
    def N(self) -> int:
        return len(self.deg)

    def recount(self, strategy) -> None:
        self.typecount[:] = 0
        for u, v in zip(self.eu, self.ev):
            self.typecount[link_type_index(int(strategy[u]), int(strategy[v]))] += 1

    def edges(self) -> list[tuple[int, int]]:
        return [(int(u), int(v)) for u, v in zip(self.eu, self.ev)]

    def neighbors(self, v: int) -> list[int]:
        out = []
        for e in self.inc[v, : self.deg[v]]:
            out.append(int(self.ev[e] if self.eu[e] == v else self.eu[e]))
        return out

    def link_type_frequencies(self) -> np.ndarray:
        return self.typecount / self.H

    def check(self, strategy=None) -> None:
        """Assert structural invariants; raises AssertionError on corruption."""
        seen = set()
        for e, (u, v) in enumerate(self.edges()):
            assert u != v, f"self-loop on edge {e}"
            key = (min(u, v), max(u, v))
            assert key not in seen, f"duplicate edge {key}"
            seen.add(key)
            assert self.inc[u, self.slot[e, 0]] == e and self.inc[v, self.slot[e, 1]] == e
        assert int(self.deg.sum()) == 2 * self.H
        if strategy is not None:
            tc = self.typecount.copy()
            self.recount(strategy)
            assert np.array_equal(tc, self.typecount), "stale link-type counts"


def degree_capacity(n: int, L: int) -> int:
    """Row width of the incidence table; full width for desk-scale populations."""
    if n <= 4096:
        return max(1, n - 1)
    return min(n - 1, max(256, 16 * L))


def ring_lattice_edges(n: int, L: int) -> list[tuple[int, int]]:
    """Circulant graph where every node has degree ``L``.

    Node i links to i+1 .. i+L//2; an odd ``L`` adds the diameter chords
    i -- i+n/2, which needs ``n`` even.
    """
    if n < L + 1:
        raise ConfigError("need N >= L + 1")
    if (n * L) % 2:
        raise ConfigError("L*N must be even")
    edges = [(i, (i + d) % n) for d in range(1, L // 2 + 1) for i in range(n)]
    if L % 2:
        edges += [(i, i + n // 2) for i in range(n // 2)]
    return edges


# ------------------------------------------------------------ configuration


@dataclass(frozen=True)
class SimConfig:
    """One simulation experiment.

    ``steps`` counts rounds in the USS and co-evolution steps in the SS.
    ``sample_every`` uses the same unit. ``revision_rate`` is the number of
    USS imitation events per agent per round.
    """

    params: GameParams
    k: Optional[LinkBreakMatrix] = None
    mode: str = "uss"
    x0: tuple = (1 / 3, 1 / 3, 1 / 3)
    steps: int = 100
    replicates: int = 1
    seed: int = 0
    sample_every: Optional[int] = None
    revision_rate: float = DEFAULT_REVISION_RATE
    burn_in: float = 0.1
    window: float = 0.1
    backend: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        x = tuple(float(v) for v in self.x0)
        if len(x) != 3 or min(x) < 0 or abs(sum(x) - 1.0) > 1e-9:
            raise ConfigError(f"initial distribution {self.x0} is not on the simplex")
        object.__setattr__(self, "x0", x)
        if self.steps <= 0 or self.replicates < 1:
            raise ConfigError("steps and replicates must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.mode == "ss":
            if self.k is None:
                raise ConfigError("structured runs need a link-break matrix")
            self.params.H  # validates L*N parity
        if not (0.0 <= self.burn_in < 1.0 and 0.0 < self.window <= 1.0):
            raise ConfigError("burn_in must be in [0, 1) and window in (0, 1]")
        if self.revision_rate < 0:
            raise ConfigError("revision_rate must be non-negative")

    @property
    def interval(self) -> int:
        return self.sample_every or max(1, self.steps // 200)

    @property
    def revisions_per_round(self) -> int:
        return int(round(self.revision_rate * self.params.N))

    def replace(self, **changes) -> "SimConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return SimConfig(**fields)


def strategy_counts(N: int, x) -> np.ndarray:
    """Largest-remainder apportionment of ``N`` agents to the three strategies."""
    x = np.asarray(x, dtype=float)
    exact = N * x
    counts = np.floor(exact).astype(int)
    rest = N - counts.sum()
    order = sorted(range(3), key=lambda m: (-(exact[m] - counts[m]), m))
    for m in order[:rest]:
        counts[m] += 1
    for m in range(3):
        if x[m] > 0 and counts[m] == 0:
            raise ConfigError(f"N={N} is too small to represent x{m + 1}={x[m]}")
    return counts


def init_population(config: SimConfig, rng) -> tuple[Population, Optional[Network]]:
    """Exact-proportion roster shuffled by ``rng``; all reputations Good."""
    p = config.params
    counts = strategy_counts(p.N, config.x0)
    strategies = np.repeat(np.arange(3), counts).astype(np.intc)
    rng.shuffle(strategies)
    pop = Population.from_strategies(strategies)
    net = None
    if config.mode == "ss":
        net = Network.from_edges(p.N, ring_lattice_edges(p.N, p.L), pop.strategy,
                                 degree_capacity(p.N, p.L))
    return pop, net


# ------------------------------------------------------------ elementary ops


def _pvec(params: GameParams) -> np.ndarray:
    return np.array([params.b, params.c, params.p_e, params.mu, params.beta])


def uss_round(pop: Population, params: GameParams, rng, rounds: int = 1, kernels=None) -> None:
    """Random perfect matching, one encounter per pair (odd N leaves one agent idle)."""
    (kernels or _backend.kernels).uss_run(*pop.arrays(), _pvec(params), int(rounds), 0, rng)


def uss_strategy_update(pop: Population, params: GameParams, rng, events: int = 1, kernels=None) -> None:
    """Random ordered pairs (i, j); j copies i with the Fermi probability of their averages.

    j's accumulator is reset after every revision, adopted or not, so each
    comparison uses payoffs earned under the current strategy.
    """
    (kernels or _backend.kernels).uss_revise(*pop.arrays(), _pvec(params), int(events), rng)


def _net_args(net: Network):
    return net.eu, net.ev, net.inc, net.deg, net.slot, net.typecount


def _raise_status(status: int) -> None:
    if status == ERR_CAPACITY:
        raise RuntimeError("node degree exceeded the incidence-table capacity")


def ss_step(pop: Population, net: Network, params: GameParams, k: LinkBreakMatrix, rng,
            steps: int = 1, type_accum=None, kernels=None) -> np.ndarray:
    """``steps`` co-evolution steps; returns the accumulated link-type counts."""
    acc = np.zeros(6, dtype=np.int64) if type_accum is None else type_accum
    status = (kernels or _backend.kernels).ss_run(
        *pop.arrays(), _pvec(params), *_net_args(net), acc, k.by_type(),
        float(params.omega), int(steps), rng,
    )
    _raise_status(status)
    return acc


def rewire_step(net: Network, pop: Population, k: LinkBreakMatrix, rng, events: int = 1, kernels=None) -> None:
    """Rewiring attempts with strategies fixed.

    A chosen link breaks with probability k[type]; a random endpoint keeps it
    and reconnects to a random non-neighbour. The break is cancelled when the
    keeper is already linked to everybody.
    """
    status = (kernels or _backend.kernels).rewire(
        pop.strategy, pop.tally, *_net_args(net), k.by_type(), int(events), rng
    )
    _raise_status(status)


def cooperation_frequency(pop_or_x, mu: float) -> float:
    x = pop_or_x.x if isinstance(pop_or_x, Population) else pop_or_x
    return cooperation_frequency_of(x, mu)


def throughput(record) -> float:
    """Delivered over offered packets; accepts a Population or a (delivered, offered) pair."""
    if isinstance(record, Population):
        delivered, offered = record.delivered, record.offered
    else:
        delivered, offered = record
    if offered <= 0:
        raise ValueError("no packets were offered")
    return delivered / offered


# ----------------------------------------------------------------- records


@dataclass
class SimRecord:
    """Samples of one replicate.

    Interval metrics (payoff, throughput) cover the games played since the
    previous sample and are nan for the first sample or empty intervals.
    Cumulative counters are non-decreasing.
    """

    times: np.ndarray
    x: np.ndarray
    x_f: np.ndarray
    mean_payoff: np.ndarray
    payoff_by_strategy: np.ndarray
    throughput: np.ndarray
    offered: np.ndarray
    delivered: np.ndarray
    forwards: np.ndarray
    games: np.ndarray
    pay_total: np.ndarray
    pay_by_strategy: np.ndarray
    games_by_strategy: np.ndarray
    tally: np.ndarray
    ftally: np.ndarray
    H: Optional[int] = None
    N: int = 0
    link_types: Optional[np.ndarray] = None

    def window_metrics(self, start: float, end: float = 1.0) -> dict[str, float]:
        """Payoff per game and throughput over the fraction [start, end] of the run."""
        t_end = self.times[-1]
        i0 = int(np.searchsorted(self.times, start * t_end, side="left"))
        i1 = int(np.searchsorted(self.times, end * t_end, side="right")) - 1
        i0 = min(i0, i1 - 1) if i1 > 0 else 0
        games = self.games[i1] - self.games[i0]
        offered = self.offered[i1] - self.offered[i0]
        return {
            "mean_payoff": (self.pay_total[i1] - self.pay_total[i0]) / games if games else math.nan,
            "throughput": (self.delivered[i1] - self.delivered[i0]) / offered if offered else math.nan,
            "x_f": float(np.mean(self.x_f[i0 + 1 : i1 + 1])),
            "x1": float(np.mean(self.x[i0 + 1 : i1 + 1, 0])),
            "x2": float(np.mean(self.x[i0 + 1 : i1 + 1, 1])),
            "x3": float(np.mean(self.x[i0 + 1 : i1 + 1, 2])),
        }


def _run_one(config: SimConfig, rng, kernels) -> SimRecord:
    p = config.params
    pop, net = init_population(config, rng)
    every = config.interval
    n_samples = config.steps // every + (1 if config.steps % every else 0) + 1
    times = np.zeros(n_samples, dtype=np.int64)
    xs = np.zeros((n_samples, 3))
    offered = np.zeros(n_samples, dtype=np.int64)
    delivered = np.zeros(n_samples, dtype=np.int64)
    forwards = np.zeros(n_samples, dtype=np.int64)
    games = np.zeros(n_samples, dtype=np.int64)
    gbs = np.zeros((n_samples, 3), dtype=np.int64)
    pay = np.zeros(n_samples)
    pbs = np.zeros((n_samples, 3))
    acc = np.zeros(6, dtype=np.int64)

    def sample(n, t):
        times[n] = t
        xs[n] = pop.x
        offered[n] = pop.offered
        delivered[n] = pop.delivered
        forwards[n] = pop.forwards
        gbs[n] = pop.tally[T_GAMES_FF : T_GAMES_FF + 3]
        games[n] = gbs[n].sum()
        pbs[n] = pop.ftally[F_PAY_FF : F_PAY_FF + 3]
        pay[n] = pbs[n].sum()

    sample(0, 0)
    t, n = 0, 1
    pvec = _pvec(p)
    while t < config.steps:
        chunk = min(every, config.steps - t)
        if config.mode == "uss":
            kernels.uss_run(*pop.arrays(), pvec, chunk, config.revisions_per_round, rng)
        else:
            ss_step(pop, net, p, config.k, rng, chunk, acc, kernels)
        pop.check_finite()
        t += chunk
        sample(n, t)
        n += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        dg = np.diff(games).astype(float)
        mean_payoff = np.concatenate([[np.nan], np.where(dg > 0, np.diff(pay) / dg, np.nan)])
        dgs = np.diff(gbs, axis=0).astype(float)
        by_s = np.where(dgs > 0, np.diff(pbs, axis=0) / dgs, np.nan)
        by_s = np.vstack([np.full((1, 3), np.nan), by_s])
        do = np.diff(offered).astype(float)
        thr = np.concatenate([[np.nan], np.where(do > 0, np.diff(delivered) / do, np.nan)])
    return SimRecord(
        times=times,
        x=xs,
        x_f=xs[:, 0] + xs[:, 1] * (1.0 - p.mu),
        mean_payoff=mean_payoff,
        payoff_by_strategy=by_s,
        throughput=thr,
        offered=offered,
        delivered=delivered,
        forwards=forwards,
        games=games,
        pay_total=pay,
        pay_by_strategy=pbs,
        games_by_strategy=gbs,
        tally=pop.tally.copy(),
        ftally=pop.ftally.copy(),
        H=None if net is None else net.H,
        N=pop.N,
        link_types=None if net is None else acc / max(1, config.steps) / net.H,
    )


@dataclass
class AggregateRecord:
    """Per-sample mean and standard error across replicates plus windowed summaries."""

    config: SimConfig
    records: list
    times: np.ndarray
    mean: dict
    stderr: dict
    terminal: dict
    overall: dict

    @property
    def replicates(self) -> int:
        return len(self.records)


SERIES = ("x1", "x2", "x3", "x_f", "mean_payoff", "throughput")


def _series(rec: SimRecord) -> dict[str, np.ndarray]:
    return {
        "x1": rec.x[:, 0],
        "x2": rec.x[:, 1],
        "x3": rec.x[:, 2],
        "x_f": rec.x_f,
        "mean_payoff": rec.mean_payoff,
        "throughput": rec.throughput,
    }


def _mean_se(stack: np.ndarray):
    """nan-aware mean and standard error along axis 0."""
    n = np.sum(np.isfinite(stack), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, np.nansum(stack, axis=0) / np.maximum(n, 1), np.nan)
        dev = np.where(np.isfinite(stack), stack - mean, 0.0)
        var = np.where(n > 1, np.sum(dev * dev, axis=0) / np.maximum(n - 1, 1), np.nan)
        se = np.where(n > 1, np.sqrt(var / np.maximum(n, 1)), 0.0 if stack.shape[0] == 1 else np.nan)
    return mean, se


def replicate_generators(seed: int, replicates: int) -> list[np.random.Generator]:
    """Independent PCG64 streams, one per replicate index."""
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def run_replicates(config: SimConfig) -> AggregateRecord:
    """Run ``config.replicates`` independent replicates and aggregate them.

    Replicate ``i`` always uses the i-th child of ``SeedSequence(seed)``, so a
    result depends only on the config.
    """
    kernels = _backend.get_kernels(config.backend)
    records = [_run_one(config, g, kernels) for g in replicate_generators(config.seed, config.replicates)]
    mean, stderr = {}, {}
    for key in SERIES:
        m, s = _mean_se(np.vstack([_series(r)[key] for r in records]))
        mean[key], stderr[key] = m, s

    def summarise(start, end=1.0):
        rows = [r.window_metrics(start, end) for r in records]
        out = {}
        for key in rows[0]:
            m, s = _mean_se(np.array([[row[key]] for row in rows]))
            out[key] = (float(m[0]), float(s[0]))
        return out

    return AggregateRecord(
        config=config,
        records=records,
        times=records[0].times.copy(),
        mean=mean,
        stderr=stderr,
        terminal=summarise(1.0 - config.window),
        overall=summarise(config.burn_in),
    )
