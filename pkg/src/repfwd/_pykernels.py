"""Pure-Python twin of ``_ckernels``.

Same signatures, same arithmetic order and the same sequence of uniform draws,
so either backend yields identical numbers. Used when the extension is not
built or when ``REPFWD_BACKEND=python`` is set.
"""
import math

import numpy as np

from ._layout import (
    F_COSTS,
    F_GAINS,
    F_PAY_FF,
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

FERMI_CLAMP = 700.0
_LINK_TYPE = ((0, 1, 2), (1, 3, 4), (2, 4, 5))


def _fermi(pi, pj, beta):
    z = beta * (pi - pj)
    if z > FERMI_CLAMP:
        z = FERMI_CLAMP
    elif z < -FERMI_CLAMP:
        z = -FERMI_CLAMP
    return 1.0 / (1.0 + math.exp(-z))


# ---------------------------------------------------------------- replicator


def _rhs(mode, p, kinv, x):
    b, c, pe, mu, beta, L = p
    x1, x2, x3 = x
    q = 1.0 - 2.0 * mu
    r1 = 1.0 - mu
    r2 = 1.0 - mu
    r3 = (1.0 - mu) * (1.0 - q / (1.0 + q * x3))
    r = x1 * r1 + x2 * r2 + x3 * r3
    B = b * (1.0 - pe)
    if mode == 0:
        # per-encounter payoffs (relay turn plus provider turn)
        P = (
            -c + (B * x1 + B * r1 * x2),
            r * (-c) + (B * x1 + B * r2 * x2),
            B * x1 + B * r3 * x2,
        )
        scale = 0.5 * beta
    else:
        M = (
            (B - c, -c + r1 * B, -c),
            (-r * c + B, -r * c + r2 * B, -r * c),
            (B, r3 * B, 0.0),
        )
        norm = 0.0
        for i in range(3):
            for j in range(3):
                norm = norm + x[i] * x[j] * kinv[3 * i + j]
        P = []
        for i in range(3):
            acc = 0.0
            for j in range(3):
                acc = acc + M[i][j] * kinv[3 * i + j] * x[j]
            P.append(acc)
        scale = 0.5 * beta * L / norm
    pbar = x1 * P[0] + x2 * P[1] + x3 * P[2]
    return [scale * x[i] * (P[i] - pbar) for i in range(3)]


def _vertex_of(x, tol):
    for v in range(3):
        d = (
            abs(x[0] - (1.0 if v == 0 else 0.0))
            + abs(x[1] - (1.0 if v == 1 else 0.0))
            + abs(x[2] - (1.0 if v == 2 else 0.0))
        )
        if d < tol:
            return v
    return -1


def _rk4_step(mode, p, kinv, x, dt):
    k1 = _rhs(mode, p, kinv, x)
    k2 = _rhs(mode, p, kinv, [x[i] + 0.5 * dt * k1[i] for i in range(3)])
    k3 = _rhs(mode, p, kinv, [x[i] + 0.5 * dt * k2[i] for i in range(3)])
    k4 = _rhs(mode, p, kinv, [x[i] + dt * k3[i] for i in range(3)])
    s = 0.0
    for i in range(3):
        x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if x[i] < 0.0:
            x[i] = 0.0
        s = s + x[i]
    if not math.isfinite(s) or s <= 0.0:
        return -2
    for i in range(3):
        x[i] = x[i] / s
    return 0


def _n_steps(dt, t_max):
    return int(math.ceil(t_max / dt - 1e-9))


def rhs(mode, params, kinv, x):
    return np.array(_rhs(mode, list(params), list(np.ravel(kinv)), list(x)))


def integrate(mode, params, kinv, x0, dt, t_max, vertex_tol, stride):
    p = list(params)
    kv = list(np.ravel(kinv))
    nsteps = _n_steps(dt, t_max)
    x = [float(v) for v in x0]
    ts, xs = [], []
    label = -1
    t_end = nsteps * dt
    for step in range(nsteps + 1):
        if not ts or (stride > 0 and step % stride == 0):
            ts.append(step * dt)
            xs.append(list(x))
        v = _vertex_of(x, vertex_tol)
        if v >= 0:
            label = v
            t_end = step * dt
            break
        if step == nsteps:
            break
        if _rk4_step(mode, p, kv, x, dt) != 0:
            label = -2
            t_end = (step + 1) * dt
            break
    if ts[-1] != t_end and label != -2:
        ts.append(t_end)
        xs.append(list(x))
    return np.array(ts), np.array(xs).reshape(-1, 3), label, t_end


def classify_points(mode, params, kinv, points, dt, t_max, vertex_tol):
    p = list(params)
    kv = list(np.ravel(kinv))
    nsteps = _n_steps(dt, t_max)
    labels = np.empty(len(points), dtype=np.intc)
    times = np.empty(len(points))
    for k, row in enumerate(points):
        x = [float(v) for v in row]
        label, t_end = -1, nsteps * dt
        for step in range(nsteps + 1):
            v = _vertex_of(x, vertex_tol)
            if v >= 0:
                label, t_end = v, step * dt
                break
            if step == nsteps:
                break
            if _rk4_step(mode, p, kv, x, dt) != 0:
                label, t_end = -2, (step + 1) * dt
                break
        labels[k] = label
        times[k] = t_end
    return labels, times


# ------------------------------------------------------------- agent-based


class _Game:
    """List-backed mirror of the numpy state; written back by :meth:`store`."""

    def __init__(self, strategy, rep, psum, cnt, tally, ftally, params, generator):
        self.arrays = (strategy, rep, psum, cnt, tally, ftally)
        self.strategy = strategy.tolist()
        self.rep = rep.tolist()
        self.psum = psum.tolist()
        self.cnt = cnt.tolist()
        self.tally = tally.tolist()
        self.ftally = ftally.tolist()
        self.b, self.c, self.pe, self.mu, self.beta = (float(v) for v in params[:5])
        self.u = generator.random

    def store(self):
        for arr, lst in zip(
            self.arrays, (self.strategy, self.rep, self.psum, self.cnt, self.tally, self.ftally)
        ):
            arr[:] = lst


def _play(g, relay, provider_rep):
    """One provider turn; returns (relay's new reputation, relay payoff, provider payoff)."""
    s = g.strategy[relay]
    forward = s == 0 or (s == 1 and provider_rep == 1)
    relay_pay = provider_pay = 0.0
    g.tally[T_OFFERED] += 1
    if forward:
        g.tally[T_FORWARDS] += 1
        g.ftally[F_COSTS] += g.c
        relay_pay -= g.c
        if g.u() < 1.0 - g.pe:
            g.tally[T_DELIVERED] += 1
            g.ftally[F_GAINS] += g.b
            provider_pay += g.b
        new_rep = 1
    else:
        new_rep = 0 if provider_rep == 1 else 1
    if g.u() < g.mu:
        new_rep = 1 - new_rep
    return new_rep, relay_pay, provider_pay


def _encounter(g, i, j):
    # both games read the reputations held before the encounter
    ri, rj = g.rep[i], g.rep[j]
    new_j, pay_j, pay_i = _play(g, j, ri)
    new_i, relay_pay, provider_pay = _play(g, i, rj)
    pay_i += relay_pay
    pay_j += provider_pay
    g.rep[i] = new_i
    g.rep[j] = new_j
    g.psum[i] += pay_i
    g.psum[j] += pay_j
    g.cnt[i] += 2
    g.cnt[j] += 2
    g.ftally[F_PAY_FF + g.strategy[i]] += pay_i
    g.ftally[F_PAY_FF + g.strategy[j]] += pay_j
    g.tally[T_GAMES_FF + g.strategy[i]] += 2
    g.tally[T_GAMES_FF + g.strategy[j]] += 2
    return pay_i, pay_j


def play_encounter(strategy, rep, psum, cnt, tally, ftally, params, i, j, generator):
    g = _Game(strategy, rep, psum, cnt, tally, ftally, params, generator)
    out = _encounter(g, i, j)
    g.store()
    return out


def _uss_round(g, n):
    perm = list(range(n))
    u = g.u
    for i in range(n - 1, 0, -1):
        k = int(u() * (i + 1))
        perm[i], perm[k] = perm[k], perm[i]
    for i in range(n // 2):
        _encounter(g, perm[2 * i], perm[2 * i + 1])


def _uss_revise(g, n):
    i = int(g.u() * n)
    j = int(g.u() * (n - 1))
    if j >= i:
        j += 1
    avg_i = g.psum[i] / (g.cnt[i] if g.cnt[i] > 0 else 1)
    avg_j = g.psum[j] / (g.cnt[j] if g.cnt[j] > 0 else 1)
    g.tally[T_STRAT_EVENTS] += 1
    if g.u() < _fermi(avg_i, avg_j, g.beta) and g.strategy[j] != g.strategy[i]:
        g.strategy[j] = g.strategy[i]
        g.tally[T_ADOPTIONS] += 1
    g.psum[j] = 0.0
    g.cnt[j] = 0


def uss_run(strategy, rep, psum, cnt, tally, ftally, params, rounds, revisions_per_round, generator):
    g = _Game(strategy, rep, psum, cnt, tally, ftally, params, generator)
    n = len(g.strategy)
    for _ in range(rounds):
        _uss_round(g, n)
        for _ in range(revisions_per_round):
            _uss_revise(g, n)
    g.store()
    return 0


def uss_revise(strategy, rep, psum, cnt, tally, ftally, params, events, generator):
    g = _Game(strategy, rep, psum, cnt, tally, ftally, params, generator)
    for _ in range(events):
        _uss_revise(g, len(g.strategy))
    g.store()
    return 0


class _Net:
    def __init__(self, eu, ev, inc, deg, slot, typecount):
        self.arrays = (eu, ev, deg, typecount)
        self.inc_arr, self.slot_arr = inc, slot
        self.n = len(deg)
        self.h = len(eu)
        self.cap = inc.shape[1]
        self.eu = eu.tolist()
        self.ev = ev.tolist()
        self.deg = deg.tolist()
        self.typecount = typecount.tolist()
        self.inc = inc.ravel().tolist()
        self.slot = slot.ravel().tolist()

    def store(self):
        for arr, lst in zip(self.arrays, (self.eu, self.ev, self.deg, self.typecount)):
            arr[:] = lst
        self.inc_arr.ravel()[:] = self.inc
        self.slot_arr.ravel()[:] = self.slot

    def other_end(self, e, node):
        return self.ev[e] if self.eu[e] == node else self.eu[e]

    def set_slot(self, e, node, s):
        if self.eu[e] == node:
            self.slot[2 * e] = s
        else:
            self.slot[2 * e + 1] = s

    def get_slot(self, e, node):
        return self.slot[2 * e] if self.eu[e] == node else self.slot[2 * e + 1]

    def detach(self, node, e):
        s = self.get_slot(e, node)
        last = self.deg[node] - 1
        moved = self.inc[node * self.cap + last]
        self.inc[node * self.cap + s] = moved
        self.set_slot(moved, node, s)
        self.deg[node] = last

    def is_neighbor(self, node, w):
        base = node * self.cap
        for s in range(self.deg[node]):
            if self.other_end(self.inc[base + s], node) == w:
                return True
        return False


def _rewire(net, strategy, tally, u, kvec):
    e = int(u() * net.h)
    a, b = net.eu[e], net.ev[e]
    t = _LINK_TYPE[strategy[a]][strategy[b]]
    tally[T_REWIRE_ATTEMPTS] += 1
    if not (u() < kvec[t]):
        return 0
    tally[T_BREAKS] += 1
    if u() < 0.5:
        keeper, other = a, b
    else:
        keeper, other = b, a
    if net.deg[keeper] >= net.n - 1:
        tally[T_CANCELLED] += 1
        return 0
    while True:
        w = int(u() * net.n)
        if w != keeper and not net.is_neighbor(keeper, w):
            break
    if net.deg[w] >= net.cap:
        return 1
    net.detach(other, e)
    if net.eu[e] == keeper:
        net.ev[e] = w
    else:
        net.eu[e] = w
    net.inc[w * net.cap + net.deg[w]] = e
    net.set_slot(e, w, net.deg[w])
    net.deg[w] += 1
    net.typecount[t] -= 1
    net.typecount[_LINK_TYPE[strategy[keeper]][strategy[w]]] += 1
    return 0


def _neighborhood_payoff(net, g, node):
    total = 0.0
    base = node * net.cap
    for s in range(net.deg[node]):
        pi, _ = _encounter(g, node, net.other_end(net.inc[base + s], node))
        total += pi
    return total


def _adopt(net, g, node, new_s):
    old_s = g.strategy[node]
    base = node * net.cap
    for s in range(net.deg[node]):
        nb = g.strategy[net.other_end(net.inc[base + s], node)]
        net.typecount[_LINK_TYPE[old_s][nb]] -= 1
        net.typecount[_LINK_TYPE[new_s][nb]] += 1
    g.strategy[node] = new_s


def _ss_strategy_event(net, g):
    # random role model i and learner j, each scored by a fresh round with all neighbours
    i = int(g.u() * net.n)
    j = int(g.u() * (net.n - 1))
    if j >= i:
        j += 1
    fi = _neighborhood_payoff(net, g, i)
    fj = _neighborhood_payoff(net, g, j)
    g.tally[T_STRAT_EVENTS] += 1
    if g.u() < _fermi(fi, fj, g.beta) and g.strategy[j] != g.strategy[i]:
        _adopt(net, g, j, g.strategy[i])
        g.tally[T_ADOPTIONS] += 1
    g.psum[j] = 0.0
    g.cnt[j] = 0


def ss_run(strategy, rep, psum, cnt, tally, ftally, params, eu, ev, inc, deg, slot,
           typecount, type_accum, kvec, omega, steps, generator):
    g = _Game(strategy, rep, psum, cnt, tally, ftally, params, generator)
    net = _Net(eu, ev, inc, deg, slot, typecount)
    kv = list(kvec)
    acc = type_accum.tolist()
    status = 0
    for _ in range(steps):
        if g.u() < omega:
            _ss_strategy_event(net, g)
        elif _rewire(net, g.strategy, g.tally, g.u, kv) != 0:
            status = 1
            break
        tc = net.typecount
        for i in range(6):
            acc[i] += tc[i]
    g.store()
    net.store()
    type_accum[:] = acc
    return status


def rewire(strategy, tally, eu, ev, inc, deg, slot, typecount, kvec, events, generator):
    net = _Net(eu, ev, inc, deg, slot, typecount)
    strat = strategy.tolist()
    tl = tally.tolist()
    kv = list(kvec)
    status = 0
    for _ in range(events):
        if _rewire(net, strat, tl, generator.random, kv) != 0:
            status = 1
            break
    net.store()
    tally[:] = tl
    return status
