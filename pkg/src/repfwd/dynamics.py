"""Replicator dynamics, link statistics, vertex stability and basins of attraction.

Two mean-field systems are covered:

* the unstructured system (USS), a well-mixed population where anyone meets anyone;
* the structured system (SS), where games run along the links of a network whose
  links break at type-dependent rates ``k[X][Y]``.

Both fields are written with per-encounter payoffs, i.e. the relay turn and the
provider turn of one meeting added together, under a ``beta/2`` prefactor.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _backend
from ._layout import LABEL_NONE, LABEL_NONFINITE, MODE_SS, MODE_USS
from .game import (
    LINK_TYPES,
    ConfigError,
    GameParams,
    LinkBreakMatrix,
    NumericalError,
    ReputationState,
    Strategy,
    cooperation_frequency_of,
    expected_payoffs_uss,
    payoff_matrix_m2,
    stable_reputation,
)

VERTEX_NAMES = ("FF", "FD", "DD")
NONE_LABEL = "none"

DEFAULT_DT = 0.01
DEFAULT_T_MAX = 2000.0
DEFAULT_VERTEX_TOL = 1e-3
FD_STEP = 1e-6


def _label_name(code: int) -> str:
    if code == LABEL_NONFINITE:
        raise NumericalError("non-finite state during integration")
    return NONE_LABEL if code == LABEL_NONE else VERTEX_NAMES[code]


def _as_x(x) -> np.ndarray:
    x = np.asarray(tuple(x), dtype=float)
    if x.shape != (3,):
        raise ConfigError("a strategy distribution has three components")
    return x


# ------------------------------------------------------------------ fields


@dataclass(frozen=True)
class ReplicatorField:
    """Callable replicator vector field, evaluated by the kernel backend.

    Build these with :func:`uss_field` or :func:`ss_field`. Integration and
    basin sweeps recognise the type and run entirely inside the kernels.
    """

    mode: int
    params: GameParams
    k: Optional[LinkBreakMatrix] = None

    @property
    def name(self) -> str:
        return "USS" if self.mode == MODE_USS else "SS"

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        vec = np.array([p.b, p.c, p.p_e, p.mu, p.beta, float(p.L)])
        if self.k is None:
            kinv = np.ones((3, 3))
        else:
            kinv = np.ascontiguousarray(1.0 / self.k.as_matrix())
        return vec, kinv

    def __call__(self, x) -> np.ndarray:
        vec, kinv = self.packed()
        return _backend.kernels.rhs(self.mode, vec, kinv, _as_x(x))


def uss_field(params: GameParams) -> ReplicatorField:
    return ReplicatorField(MODE_USS, params)


def ss_field(params: GameParams, k: LinkBreakMatrix) -> ReplicatorField:
    return ReplicatorField(MODE_SS, params, k)


def encounter_payoffs_uss(params: GameParams, x, rep: ReputationState) -> np.ndarray:
    """Expected payoff per encounter (both roles) in the well-mixed population."""
    return 2.0 * expected_payoffs_uss(params, x, rep)


def replicator_rhs_uss(x, params: GameParams) -> np.ndarray:
    """Velocity ``(beta/2) x_m (P_m - Pbar)`` with reputations at their stable values.

    Plain numpy reference implementation; :func:`uss_field` is the fast path.
    """
    x = _as_x(x)
    rep = stable_reputation(params.mu, x)
    P = encounter_payoffs_uss(params, x, rep)
    return 0.5 * params.beta * x * (P - x @ P)


def pairwise_comparison_rhs_uss(x, params: GameParams) -> np.ndarray:
    """Mean-field of Fermi imitation without the weak-selection expansion.

    ``x_m' = x_m sum_n x_n tanh(beta (P_m - P_n) / 2)`` with per-game payoffs.
    Its first-order expansion in ``beta`` is :func:`replicator_rhs_uss` up to
    a constant time rescaling; at large ``beta`` the two can pick different
    vertices from the same start.
    """
    x = _as_x(x)
    P = expected_payoffs_uss(params, x, stable_reputation(params.mu, x))
    return x * (np.tanh(0.5 * params.beta * (P[:, None] - P[None, :])) @ x)


# ------------------------------------------------------------ link dynamics


@dataclass(frozen=True)
class LinkTypeDistribution:
    """Stationary share of each unordered link type, ordered like ``LINK_TYPES``."""

    pi: np.ndarray
    a: float
    expected_counts: Optional[np.ndarray] = None

    def as_dict(self) -> dict[str, float]:
        return {t: float(v) for t, v in zip(LINK_TYPES, self.pi)}


def link_normalization(x, k: LinkBreakMatrix) -> float:
    """``a(x) = 1 / sum_XY x_X x_Y / k_XY``."""
    x = _as_x(x)
    return 1.0 / float(x @ (1.0 / k.as_matrix()) @ x)


def stationary_link_distribution(x, k: LinkBreakMatrix, H: Optional[int] = None) -> LinkTypeDistribution:
    x = _as_x(x)
    km = k.as_matrix()
    a = link_normalization(x, k)
    pi = np.empty(6)
    n = 0
    for s in range(3):
        for t in range(s, 3):
            weight = 1.0 if s == t else 2.0
            pi[n] = a * weight * x[s] * x[t] / km[s, t]
            n += 1
    counts = None if H is None else H * pi
    return LinkTypeDistribution(pi, a, counts)


def transformed_matrix_m2p(params: GameParams, rep: ReputationState, k: LinkBreakMatrix) -> np.ndarray:
    """Pairwise payoff matrix with each entry divided by the link's break rate."""
    return payoff_matrix_m2(params, rep) / k.as_matrix()


def fitness_ss(x, params: GameParams, rep: ReputationState, k: LinkBreakMatrix) -> np.ndarray:
    """Expected total payoff per strategy over all links, ``L a(x) (M2' x)``."""
    x = _as_x(x)
    return params.L * link_normalization(x, k) * (transformed_matrix_m2p(params, rep, k) @ x)


def replicator_rhs_ss(x, params: GameParams, k: LinkBreakMatrix) -> np.ndarray:
    """Structured-population field, numpy reference for :func:`ss_field`."""
    x = _as_x(x)
    rep = stable_reputation(params.mu, x)
    m = transformed_matrix_m2p(params, rep, k)
    g = m @ x
    scale = 0.5 * params.beta * params.L * link_normalization(x, k)
    return scale * x * (g - x @ g)


# -------------------------------------------------------------- integration


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    terminal: str
    t_conv: Optional[float]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the state at time(s) ``t``; clamps past the end."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.states[:, i]) for i in range(3)], axis=-1)


def _nearest_vertex(x: np.ndarray, tol: float) -> int:
    for v in range(3):
        if np.abs(x - np.eye(3)[v]).sum() < tol:
            return v
    return LABEL_NONE


def _rk4_python(rhs, x0, dt, t_max, vertex_tol, stride):
    nsteps = int(np.ceil(t_max / dt - 1e-9))
    x = _as_x(x0).copy()
    ts, xs = [], []
    label, t_end = LABEL_NONE, nsteps * dt
    for step in range(nsteps + 1):
        if not ts or (stride > 0 and step % stride == 0):
            ts.append(step * dt)
            xs.append(x.copy())
        v = _nearest_vertex(x, vertex_tol)
        if v >= 0:
            label, t_end = v, step * dt
            break
        if step == nsteps:
            break
        k1 = np.asarray(rhs(x))
        k2 = np.asarray(rhs(x + 0.5 * dt * k1))
        k3 = np.asarray(rhs(x + 0.5 * dt * k2))
        k4 = np.asarray(rhs(x + dt * k3))
        x = np.clip(x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0, None)
        s = x.sum()
        if not np.isfinite(s) or s <= 0:
            label, t_end = LABEL_NONFINITE, (step + 1) * dt
            break
        x = x / s
    if ts[-1] != t_end and label != LABEL_NONFINITE:
        ts.append(t_end)
        xs.append(x.copy())
    return np.array(ts), np.array(xs), label, t_end


def integrate(
    rhs: Callable,
    x0,
    dt: float = DEFAULT_DT,
    t_max: float = DEFAULT_T_MAX,
    vertex_tol: float = DEFAULT_VERTEX_TOL,
    stride: int = 1,
) -> Trajectory:
    """Fixed-step RK4 with clip-and-renormalize projection onto the simplex.

    Stops as soon as the state is within ``vertex_tol`` (L1) of a vertex. States
    are kept every ``stride`` steps plus the final one.

    Raises
    ------
    NumericalError
        If the state stops being finite.
    """
    if dt <= 0 or t_max < 0:
        raise ConfigError("dt must be positive and t_max non-negative")
    x0 = _as_x(x0)
    if x0.min() < 0 or abs(x0.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{tuple(x0)} is not on the simplex")
    if isinstance(rhs, ReplicatorField):
        vec, kinv = rhs.packed()
        ts, xs, label, t_end = _backend.kernels.integrate(
            rhs.mode, vec, kinv, x0.copy(), float(dt), float(t_max), float(vertex_tol), int(stride)
        )
    else:
        ts, xs, label, t_end = _rk4_python(rhs, x0, dt, t_max, vertex_tol, stride)
    terminal = _label_name(label)
    return Trajectory(ts, xs, terminal, None if terminal == NONE_LABEL else float(t_end))


# ---------------------------------------------------------------- stability


def eig2(m) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 matrix from the characteristic polynomial."""
    (a, b), (c, d) = m
    tr = a + d
    det = a * d - b * c
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    # real pairs are reported as plain floats, smaller first
    if abs(disc.imag) == 0.0:
        return tuple(sorted((l1.real, l2.real)))
    return l1, l2


@dataclass(frozen=True)
class VertexStability:
    vertex: str
    jacobian: np.ndarray
    eigenvalues: tuple
    stable: bool


@dataclass(frozen=True)
class VertexStabilityReport:
    """Linearisation of a field at the three vertices in the (x1, x2) chart."""

    vertices: dict
    prefactor: float = 1.0

    def __getitem__(self, name: str) -> VertexStability:
        return self.vertices[str(Strategy.parse(name))]

    def normalized_eigenvalues(self, name: str) -> tuple:
        """Eigenvalues divided by the field's ``beta/2`` prefactor."""
        return tuple(v / self.prefactor for v in self[name].eigenvalues)


def jacobian_chart(rhs: Callable, x, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of (x1', x2') with x3 = 1 - x1 - x2 eliminated."""
    x = _as_x(x)
    jac = np.empty((2, 2))
    for j in range(2):
        d = np.zeros(3)
        d[j] = h
        d[2] = -h
        jac[:, j] = (np.asarray(rhs(x + d))[:2] - np.asarray(rhs(x - d))[:2]) / (2 * h)
    return jac


def vertex_stability(rhs, params: Optional[GameParams] = None, k: Optional[LinkBreakMatrix] = None,
                     h: float = FD_STEP) -> VertexStabilityReport:
    """Finite-difference stability of FF, FD and DD.

    ``rhs`` is a field callable, or the strings "uss"/"ss" together with
    ``params`` (and ``k`` for "ss"). A vertex counts as stable when both
    eigenvalues have negative real parts.
    """
    if isinstance(rhs, str):
        if params is None:
            raise ConfigError("params are required to build a field by name")
        rhs = uss_field(params) if rhs.lower() == "uss" else ss_field(params, k)
    if params is None and isinstance(rhs, ReplicatorField):
        params = rhs.params
    prefactor = 0.5 * params.beta if params is not None and params.beta > 0 else 1.0
    out = {}
    for v, name in enumerate(VERTEX_NAMES):
        jac = jacobian_chart(rhs, np.eye(3)[v], h)
        if not np.all(np.isfinite(jac)):
            raise NumericalError(f"non-finite Jacobian at {name}")
        ev = eig2(jac)
        out[name] = VertexStability(name, jac, ev, all(complex(e).real < 0 for e in ev))
    return VertexStabilityReport(out, prefactor)


# --------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
            "degenerate": self.degenerate,
        }


@dataclass
class ThresholdReport:
    """Stability thresholds for one scenario.

    ``ff_cess`` and ``fd_cess`` are the authoritative verdicts. For the SS the
    ratio-form verdicts are kept separately (``None`` when a denominator
    vanishes) along with a flag for any disagreement with the raw inequalities.
    """

    scenario: str
    b_over_c: float
    q: float
    conditions: list = field(default_factory=list)
    ff_cess: bool = False
    fd_cess: bool = False
    ratio_ff_cess: Optional[bool] = None
    ratio_fd_cess: Optional[bool] = None
    disagreement: bool = False

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "b_over_c": self.b_over_c,
            "q": self.q,
            "conditions": [c.as_dict() for c in self.conditions],
            "ff_cess": self.ff_cess,
            "fd_cess": self.fd_cess,
            "ratio_ff_cess": self.ratio_ff_cess,
            "ratio_fd_cess": self.ratio_fd_cess,
            "disagreement": self.disagreement,
        }


def uss_threshold(params: GameParams) -> float:
    """Smallest b/c at which FD resists DD invasion, ``1 / (q (1 - p_e))``."""
    denom = params.q * (1.0 - params.p_e)
    return float("inf") if denom <= 0 else 1.0 / denom


def theorem1_check(params: GameParams) -> ThresholdReport:
    """Unstructured-population verdicts for FF and FD."""
    ratio = params.b / params.c
    thr = uss_threshold(params)
    ff = stable_reputation(params.mu, (1.0, 0.0, 0.0))
    P_ff = encounter_payoffs_uss(params, (1.0, 0.0, 0.0), ff)
    conds = [
        # FF is always invaded by DD: same gains, no cost
        Condition("FF resists DD", float(P_ff[0]), float(P_ff[2]), bool(P_ff[0] > P_ff[2])),
        Condition("FD threshold b/c", ratio, thr, bool(ratio > thr)),
        Condition(
            "FD cooperative majority",
            cooperation_frequency_of((0.0, 1.0, 0.0), params.mu),
            0.5,
            cooperation_frequency_of((0.0, 1.0, 0.0), params.mu) > 0.5,
        ),
    ]
    return ThresholdReport(
        scenario="USS",
        b_over_c=ratio,
        q=params.q,
        conditions=conds,
        ff_cess=conds[0].satisfied,
        fd_cess=conds[1].satisfied and conds[2].satisfied,
    )


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den <= 0:
        return float("nan"), True
    return num / den, False


def theorem2_check(params: GameParams, k: LinkBreakMatrix) -> ThresholdReport:
    """Structured-population verdicts for FF and FD.

    Raw form: at each vertex, with vertex reputations, the resident's own column
    of ``M2'`` must beat both invaders. Ratio form: the closed b/c bounds, which
    need positive ``k12 - k11``, ``k23 - k22`` and ``k22 - k12``.
    """
    mu, pe = params.mu, params.p_e
    ratio = params.b / params.c
    conds = []

    m_ff = transformed_matrix_m2p(params, stable_reputation(mu, (1.0, 0.0, 0.0)), k)
    m_fd = transformed_matrix_m2p(params, stable_reputation(mu, (0.0, 1.0, 0.0)), k)
    raw = [
        ("FF raw vs FD", m_ff[0, 0], m_ff[1, 0]),
        ("FF raw vs DD", m_ff[0, 0], m_ff[2, 0]),
        ("FD raw vs FF", m_fd[1, 1], m_fd[0, 1]),
        ("FD raw vs DD", m_fd[1, 1], m_fd[2, 1]),
    ]
    for name, lhs, rhs in raw:
        conds.append(Condition(name, float(lhs), float(rhs), bool(lhs > rhs)))
    xf_fd = cooperation_frequency_of((0.0, 1.0, 0.0), mu)
    conds.append(Condition("FD cooperative majority", xf_fd, 0.5, xf_fd > 0.5))
    ff_raw = conds[0].satisfied and conds[1].satisfied
    fd_raw = conds[2].satisfied and conds[3].satisfied and conds[4].satisfied

    ff1, d1 = _ratio(k.k12 - k.k11 * (1.0 - mu), (k.k12 - k.k11) * (1.0 - pe))
    ff2, d2 = _ratio(k.k13, (k.k12 - k.k11) * (1.0 - pe))
    fd_lo, d3 = _ratio(k.k23, (k.k23 - k.k22) * (1.0 - pe))
    fd_hi, d4 = _ratio(k.k22 - k.k12 * (1.0 - mu), (k.k22 - k.k12) * (1.0 - mu) * (1.0 - pe))
    ratio_conds = [
        Condition("FF ratio bound 1", ratio, ff1, (not d1) and ratio > ff1, d1),
        Condition("FF ratio bound 2", ratio, ff2, (not d2) and ratio > ff2, d2),
        Condition("FD ratio lower", ratio, fd_lo, (not d3) and ratio > fd_lo, d3),
        Condition("FD ratio upper", ratio, fd_hi, (not d4) and ratio < fd_hi, d4),
    ]
    conds.extend(ratio_conds)
    ratio_ff = None if (d1 or d2) else ratio_conds[0].satisfied and ratio_conds[1].satisfied
    ratio_fd = None if (d3 or d4) else ratio_conds[2].satisfied and ratio_conds[3].satisfied
    disagree = (ratio_ff is not None and ratio_ff != ff_raw) or (
        ratio_fd is not None and ratio_fd != fd_raw
    )
    return ThresholdReport(
        scenario="SS",
        b_over_c=ratio,
        q=params.q,
        conditions=conds,
        ff_cess=ff_raw,
        fd_cess=fd_raw,
        ratio_ff_cess=ratio_ff,
        ratio_fd_cess=ratio_fd,
        disagreement=bool(disagree),
    )


# ------------------------------------------------------------------- basins


def simplex_grid(resolution: int) -> np.ndarray:
    """Barycentric grid with ``(r+1)(r+2)/2`` points, x1 outer and x2 inner."""
    r = int(resolution)
    pts = [(i / r, j / r, (r - i - j) / r) for i in range(r + 1) for j in range(r + 1 - i)]
    return np.ascontiguousarray(pts, dtype=float)


@dataclass
class BasinMap:
    resolution: int
    points: np.ndarray
    labels: list
    times: np.ndarray
    stable_vertices: tuple

    @property
    def fractions(self) -> dict[str, float]:
        n = len(self.labels)
        return {v: sum(1 for lab in self.labels if lab == v) / n for v in VERTEX_NAMES}

    @property
    def present(self) -> set:
        return {lab for lab in self.labels if lab != NONE_LABEL}


def compute_basins(
    rhs,
    params: Optional[GameParams] = None,
    k: Optional[LinkBreakMatrix] = None,
    resolution: int = 40,
    dt: float = DEFAULT_DT,
    t_max: float = DEFAULT_T_MAX,
    vertex_tol: float = DEFAULT_VERTEX_TOL,
) -> BasinMap:
    """Integrate every grid point and label it by the vertex it reaches.

    A point is credited to a vertex only if that vertex is linearly stable;
    anything else (interior attractors, unstable corners reached along an edge,
    time-outs) is labelled "none".
    """
    if resolution < 10:
        raise ConfigError("resolution must be at least 10")
    if isinstance(rhs, str):
        rhs = uss_field(params) if rhs.lower() == "uss" else ss_field(params, k)
    pts = simplex_grid(resolution)
    if isinstance(rhs, ReplicatorField):
        vec, kinv = rhs.packed()
        codes, times = _backend.kernels.classify_points(
            rhs.mode, vec, kinv, pts, float(dt), float(t_max), float(vertex_tol)
        )
    else:
        codes, times = np.empty(len(pts), dtype=int), np.empty(len(pts))
        for n, p in enumerate(pts):
            _, _, codes[n], times[n] = _rk4_python(rhs, p, dt, t_max, vertex_tol, 0)
    report = vertex_stability(rhs, params)
    stable = tuple(v for v in VERTEX_NAMES if report[v].stable)
    labels = []
    for code in codes:
        name = _label_name(int(code))
        labels.append(name if name in stable else NONE_LABEL)
    return BasinMap(int(resolution), pts, labels, np.asarray(times), stable)
