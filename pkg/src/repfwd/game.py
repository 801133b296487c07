"""Core game quantities for reputation-based packet forwarding.

Strategies are indexed FF=0, FD=1, DD=2 in arrays (the frequencies are still
called x1, x2, x3 in the public types).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

SIMPLEX_TOL = 1e-12
FERMI_CLAMP = 700.0


class ConfigError(ValueError):
    """Raised when parameters violate the model's validity ranges."""


class NumericalError(ArithmeticError):
    """Raised when a non-finite state shows up in a computation."""


class Strategy(IntEnum):
    FF = 0
    FD = 1
    DD = 2

    @classmethod
    def parse(cls, value: "str | int | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        if isinstance(value, str):
            key = value.strip().upper()
            if key == "DF":
                raise ConfigError("strategy DF is not part of the model")
            try:
                return cls[key]
            except KeyError:
                raise ConfigError(f"unknown strategy {value!r}") from None
        return cls(int(value))

    def __str__(self) -> str:
        return self.name


class Reputation(IntEnum):
    BAD = 0
    GOOD = 1

    def flipped(self) -> "Reputation":
        return Reputation(1 - self)


class Action(IntEnum):
    DROP = 0
    FORWARD = 1


class Signal(Enum):
    f = "f"
    d = "d"


@dataclass(frozen=True)
class GameParams:
    """Scalar model parameters.

    ``L`` is the average degree and ``N`` the population size; both only matter
    for structured runs and the agent-based simulator.
    """

    b: float
    c: float
    p_e: float = 0.0
    mu: float = 0.0
    beta: float = 10.0
    omega: float = 0.02
    L: int = 4
    N: int = 100

    def __post_init__(self) -> None:
        for name in ("b", "c", "p_e", "mu", "beta", "omega"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v!r}")
        if self.b <= 0 or self.c <= 0:
            raise ConfigError("b and c must be positive")
        if not 0.0 <= self.p_e <= 1.0:
            raise ConfigError(f"p_e must lie in [0, 1], got {self.p_e}")
        if not 0.0 <= self.mu < 0.5:
            raise ConfigError(f"mu must lie in [0, 0.5), got {self.mu}")
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")
        # omega = 0 freezes strategies (pure linking dynamics)
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError(f"omega must lie in [0, 1], got {self.omega}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("L must be a positive integer")
        if int(self.N) != self.N or self.N < self.L + 1:
            raise ConfigError("N must be an integer with N >= L + 1")

    @property
    def q(self) -> float:
        """Discrimination ability 1 - 2*mu."""
        return 1.0 - 2.0 * self.mu

    @property
    def delivered_benefit(self) -> float:
        """Expected benefit of one forwarded packet, b(1 - p_e)."""
        return self.b * (1.0 - self.p_e)

    @property
    def H(self) -> int:
        """Number of links in the structured network."""
        if (self.L * self.N) % 2:
            raise ConfigError("L*N must be even for a structured network")
        return self.L * self.N // 2

    def replace(self, **changes) -> "GameParams":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return GameParams(**fields)


@dataclass(frozen=True)
class StrategyDistribution:
    x1: float
    x2: float
    x3: float

    def __post_init__(self) -> None:
        xs = (self.x1, self.x2, self.x3)
        if any(not math.isfinite(v) for v in xs):
            raise NumericalError(f"non-finite strategy distribution {xs}")
        if min(xs) < 0 or abs(sum(xs) - 1.0) > SIMPLEX_TOL:
            raise ConfigError(f"{xs} is not on the simplex")

    @classmethod
    def from_array(cls, x) -> "StrategyDistribution":
        x1, x2, x3 = (float(v) for v in x)
        return cls(x1, x2, x3)

    @classmethod
    def vertex(cls, s: "Strategy | str") -> "StrategyDistribution":
        x = [0.0, 0.0, 0.0]
        x[Strategy.parse(s)] = 1.0
        return cls(*x)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    def __iter__(self):
        return iter((self.x1, self.x2, self.x3))


@dataclass(frozen=True)
class ReputationState:
    """Good-reputation frequency per strategy class plus the population aggregate."""

    r1: float
    r2: float
    r3: float
    r: float

    @classmethod
    def from_classes(cls, r1: float, r2: float, r3: float, x) -> "ReputationState":
        x1, x2, x3 = x
        return cls(r1, r2, r3, x1 * r1 + x2 * r2 + x3 * r3)

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])


LINK_TYPES = ("FF-FF", "FF-FD", "FF-DD", "FD-FD", "FD-DD", "DD-DD")
_PAIR_INDEX = ((0, 1, 2), (1, 3, 4), (2, 4, 5))


def link_type_index(s: int, t: int) -> int:
    """Index into LINK_TYPES for an unordered strategy pair."""
    return _PAIR_INDEX[s][t]


@dataclass(frozen=True)
class LinkBreakMatrix:
    """Breaking probability k[X][Y] of an XY link."""

    k11: float
    k12: float
    k13: float
    k22: float
    k23: float
    k33: float

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v <= 1.0):
                raise ConfigError(f"{name} must lie in (0, 1], got {v!r}")

    @classmethod
    def uniform(cls, k: float) -> "LinkBreakMatrix":
        return cls(k, k, k, k, k, k)

    @classmethod
    def from_matrix(cls, m) -> "LinkBreakMatrix":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3) or not np.array_equal(m, m.T):
            raise ConfigError("link-break matrix must be a symmetric 3x3 array")
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.k11, self.k12, self.k13],
                [self.k12, self.k22, self.k23],
                [self.k13, self.k23, self.k33],
            ]
        )

    def by_type(self) -> np.ndarray:
        """Entries ordered like LINK_TYPES."""
        return np.array([self.k11, self.k12, self.k13, self.k22, self.k23, self.k33])

    def scaled(self, gamma: float) -> "LinkBreakMatrix":
        return LinkBreakMatrix.from_matrix(self.as_matrix() * gamma)


# Link-break probabilities of the reference simulations. k33 is not given
# anywhere upstream; 0.95 mirrors k23, the other DD-involving rate.
REFERENCE_LINKS = LinkBreakMatrix(k11=0.05, k12=0.25, k13=0.3, k22=0.25, k23=0.95, k33=0.95)


def reputation_update(provider_rep: Reputation, action: Action) -> Reputation:
    """Noise-free reputation assigned to a relay after acting toward a provider."""
    if action == Action.FORWARD:
        return Reputation.GOOD
    return Reputation.BAD if provider_rep == Reputation.GOOD else Reputation.GOOD


def noisy_reputation_update(provider_rep: Reputation, action: Action, mu: float, rng) -> Reputation:
    """Like :func:`reputation_update` but the label is flipped with probability ``mu``.

    Exactly one uniform draw is consumed from ``rng`` (a ``numpy.random.Generator``).
    """
    new = reputation_update(provider_rep, action)
    if rng.random() < mu:
        return new.flipped()
    return new


def action_of(strategy: Strategy, provider_rep: Reputation) -> Action:
    if strategy == Strategy.FF:
        return Action.FORWARD
    if strategy == Strategy.DD:
        return Action.DROP
    return Action.FORWARD if provider_rep == Reputation.GOOD else Action.DROP


def observed_signal(action: Action, delivered: bool) -> Signal:
    return Signal.f if action == Action.FORWARD and delivered else Signal.d


def stable_reputation(mu: float, x) -> ReputationState:
    """Stationary good-reputation frequencies for fixed strategy frequencies ``x``."""
    x1, x2, x3 = x
    q = 1.0 - 2.0 * mu
    r1 = r2 = 1.0 - mu
    r3 = (1.0 - mu) * (1.0 - q / (1.0 + q * x3))
    return ReputationState.from_classes(r1, r2, r3, (x1, x2, x3))


def reputation_recursion_step(state: ReputationState, x, mu: float) -> ReputationState:
    """One step of the half-relay/half-provider reputation recursion.

    Only used as an independent check of :func:`stable_reputation`.
    """
    x1, x2, x3 = x
    r = x1 * state.r1 + x2 * state.r2 + x3 * state.r3
    r1 = 0.5 * state.r1 + 0.5 * (1.0 - mu)
    r2 = 0.5 * state.r2 + 0.5 * (1.0 - mu)
    r3 = 0.5 * state.r3 + 0.5 * ((1.0 - mu) * (1.0 - r) + r * mu)
    return ReputationState.from_classes(r1, r2, r3, (x1, x2, x3))


def payoff_matrix_base(b: float, c: float) -> np.ndarray:
    """Loss-free forward/drop payoff matrix (row = own action F, D)."""
    return np.array([[b - c, -c], [b, 0.0]])


def payoff_matrix_m1(params: GameParams) -> np.ndarray:
    B = params.delivered_benefit
    c = params.c
    return np.array([[B - c, -c], [B, 0.0]])


def expected_payoffs_uss(params: GameParams, x, rep: ReputationState) -> np.ndarray:
    """Expected per-game payoff (P1, P2, P3) of FF, FD and DD in a well-mixed population.

    Each player is provider or relay with probability 1/2.
    """
    x1, x2, _ = x
    B = params.delivered_benefit
    c = params.c
    gain_from = B * x1
    return np.array(
        [
            0.5 * (-c) + 0.5 * (gain_from + B * rep.r1 * x2),
            0.5 * rep.r * (-c) + 0.5 * (gain_from + B * rep.r2 * x2),
            0.5 * (gain_from + B * rep.r3 * x2),
        ]
    )


def payoff_matrix_m2(params: GameParams, rep: ReputationState) -> np.ndarray:
    """Pairwise payoff matrix over (FF, FD, DD), summed over both roles."""
    B = params.delivered_benefit
    c = params.c
    r = rep.r
    return np.array(
        [
            [B - c, -c + rep.r1 * B, -c],
            [-r * c + B, -r * c + rep.r2 * B, -r * c],
            [B, rep.r3 * B, 0.0],
        ]
    )


def fermi_probability(p_i: float, p_j: float, beta: float) -> float:
    """Probability that the learner adopts the role model's strategy."""
    z = beta * (p_i - p_j)
    if z != z:
        raise NumericalError("non-finite payoff difference")
    z = min(FERMI_CLAMP, max(-FERMI_CLAMP, z))
    return 1.0 / (1.0 + math.exp(-z))


def cooperation_frequency_of(x, mu: float) -> float:
    """Share of cooperative relay actions, x1 + x2(1 - mu)."""
    x1, x2, _ = x
    return x1 + x2 * (1.0 - mu)


def full_cooperation_baseline(params: GameParams) -> tuple[float, float]:
    """(per-game average payoff, normalized throughput) when everyone always forwards."""
    return (params.delivered_benefit - params.c) / 2.0, 1.0 - params.p_e
