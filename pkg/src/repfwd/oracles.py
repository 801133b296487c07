"""Independent reference computations used by the test-suite and ``repfwd validate``.

These deliberately avoid the closed forms they are meant to check.
"""
from __future__ import annotations

import itertools

import numpy as np

from .game import (
    Action,
    GameParams,
    Reputation,
    ReputationState,
    Strategy,
    action_of,
    link_type_index,
    reputation_recursion_step,
)


def brute_force_payoffs(params: GameParams, x, rep: ReputationState) -> np.ndarray:
    """Expected per-game payoff of each strategy by enumerating one encounter.

    The tree is: own role (provider/relay, 1/2 each) x partner strategy (x) x
    reputation of whoever is the provider x channel outcome.
    """
    r_class = (rep.r1, rep.r2, rep.r3)
    out = np.zeros(3)
    for me in Strategy:
        total = 0.0
        for role, partner, good, lost in itertools.product(
            ("provider", "relay"), Strategy, (True, False), (False, True)
        ):
            provider = me if role == "provider" else partner
            relay = partner if role == "provider" else me
            p_good = r_class[provider]
            w = 0.5 * x[partner] * (p_good if good else 1.0 - p_good)
            w *= params.p_e if lost else 1.0 - params.p_e
            if w == 0.0:
                continue
            act = action_of(relay, Reputation.GOOD if good else Reputation.BAD)
            if role == "relay":
                gain = -params.c if act == Action.FORWARD else 0.0
            else:
                gain = params.b if act == Action.FORWARD and not lost else 0.0
            total += w * gain
        out[me] = total
    return out


def iterate_reputation(mu: float, x, start=(1.0, 1.0, 1.0), steps: int = 200, tol: float = 0.0):
    """Iterate the reputation recursion from ``start``; returns (state, steps used)."""
    state = ReputationState.from_classes(*start, x)
    for k in range(1, steps + 1):
        nxt = reputation_recursion_step(state, x, mu)
        delta = max(abs(nxt.r1 - state.r1), abs(nxt.r2 - state.r2), abs(nxt.r3 - state.r3))
        state = nxt
        if delta <= tol:
            return state, k
    return state, steps


def link_chain_stationary(x, k) -> np.ndarray:
    """Stationary law of a single link's type under break-and-redirect moves.

    Builds the 6-state transition matrix (well-mixed partner choice) and solves
    for its left eigenvector, as an independent check on the closed form.
    """
    x = np.asarray(x, dtype=float)
    km = k.as_matrix()
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    Q = np.zeros((6, 6))
    for i, (s, t) in enumerate(pairs):
        kst = km[s, t]
        Q[i, i] += 1.0 - kst
        for keeper in (s, t):
            for z in range(3):
                Q[i, link_type_index(keeper, z)] += kst * 0.5 * x[z]
    w, v = np.linalg.eig(Q.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return pi / pi.sum()
