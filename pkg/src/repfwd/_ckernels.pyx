# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: RK4 replicator integration and the agent-based update rules.

Every routine here has a line-for-line twin in ``_pykernels.py``. Random numbers
come only from ``next_double`` of the caller's numpy BitGenerator, in the same
order as the Python twin, so both backends produce identical results.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, fabs, ceil, isfinite
from numpy.random cimport bitgen_t

cnp.import_array()

cdef double FERMI_CLAMP = 700.0

# counter layout, mirrors _layout.py
cdef enum:
    T_OFFERED = 0
    T_FORWARDS = 1
    T_DELIVERED = 2
    T_STRAT_EVENTS = 3
    T_ADOPTIONS = 4
    T_REWIRE_ATTEMPTS = 5
    T_BREAKS = 6
    T_CANCELLED = 7
    T_GAMES_FF = 8
    F_GAINS = 0
    F_COSTS = 1
    F_PAY_FF = 2


cdef inline int _link_type(int s, int t) noexcept nogil:
    # FF-FF, FF-FD, FF-DD, FD-FD, FD-DD, DD-DD
    cdef int tmp
    if s > t:
        tmp = s
        s = t
        t = tmp
    return 3 * s - (s * (s - 1)) // 2 + (t - s)


cdef bitgen_t *_bitgen(object generator) except NULL:
    capsule = generator.bit_generator.capsule
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _u(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _fermi(double pi, double pj, double beta) noexcept nogil:
    cdef double z = beta * (pi - pj)
    if z > FERMI_CLAMP:
        z = FERMI_CLAMP
    elif z < -FERMI_CLAMP:
        z = -FERMI_CLAMP
    return 1.0 / (1.0 + exp(-z))


# ---------------------------------------------------------------- replicator

cdef void _rhs(int mode, const double *p, const double *kinv, const double *x,
               double *out) noexcept nogil:
    cdef double b = p[0], c = p[1], pe = p[2], mu = p[3], beta = p[4], L = p[5]
    cdef double x1 = x[0], x2 = x[1], x3 = x[2]
    cdef double q = 1.0 - 2.0 * mu
    cdef double r1 = 1.0 - mu, r2 = 1.0 - mu
    cdef double r3 = (1.0 - mu) * (1.0 - q / (1.0 + q * x3))
    cdef double r = x1 * r1 + x2 * r2 + x3 * r3
    cdef double B = b * (1.0 - pe)
    cdef double P[3]
    cdef double M[3][3]
    cdef double pbar, norm, scale
    cdef int i, j
    if mode == 0:
        # per-encounter payoffs (relay turn plus provider turn)
        P[0] = -c + (B * x1 + B * r1 * x2)
        P[1] = r * (-c) + (B * x1 + B * r2 * x2)
        P[2] = B * x1 + B * r3 * x2
        scale = 0.5 * beta
    else:
        M[0][0] = B - c
        M[0][1] = -c + r1 * B
        M[0][2] = -c
        M[1][0] = -r * c + B
        M[1][1] = -r * c + r2 * B
        M[1][2] = -r * c
        M[2][0] = B
        M[2][1] = r3 * B
        M[2][2] = 0.0
        norm = 0.0
        for i in range(3):
            for j in range(3):
                norm = norm + x[i] * x[j] * kinv[3 * i + j]
        for i in range(3):
            P[i] = 0.0
            for j in range(3):
                P[i] = P[i] + M[i][j] * kinv[3 * i + j] * x[j]
        scale = 0.5 * beta * L / norm
    pbar = x1 * P[0] + x2 * P[1] + x3 * P[2]
    for i in range(3):
        out[i] = scale * x[i] * (P[i] - pbar)


cdef int _vertex_of(const double *x, double tol) noexcept nogil:
    cdef int v
    for v in range(3):
        if fabs(x[0] - (v == 0)) + fabs(x[1] - (v == 1)) + fabs(x[2] - (v == 2)) < tol:
            return v
    return -1


cdef int _rk4_step(int mode, const double *p, const double *kinv, double *x,
                   double dt) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double y[3]
    cdef double s
    cdef int i
    _rhs(mode, p, kinv, x, k1)
    for i in range(3):
        y[i] = x[i] + 0.5 * dt * k1[i]
    _rhs(mode, p, kinv, y, k2)
    for i in range(3):
        y[i] = x[i] + 0.5 * dt * k2[i]
    _rhs(mode, p, kinv, y, k3)
    for i in range(3):
        y[i] = x[i] + dt * k3[i]
    _rhs(mode, p, kinv, y, k4)
    s = 0.0
    for i in range(3):
        x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if x[i] < 0.0:
            x[i] = 0.0
        s = s + x[i]
    if not isfinite(s) or s <= 0.0:
        return -2
    for i in range(3):
        x[i] = x[i] / s
    return 0


cdef long _n_steps(double dt, double t_max) noexcept nogil:
    return <long> ceil(t_max / dt - 1e-9)


cdef int _classify(int mode, const double *p, const double *kinv, double *x,
                   double dt, long nsteps, double tol, double *t_end) noexcept nogil:
    cdef long step
    cdef int v
    for step in range(nsteps + 1):
        v = _vertex_of(x, tol)
        if v >= 0:
            t_end[0] = step * dt
            return v
        if step == nsteps:
            break
        if _rk4_step(mode, p, kinv, x, dt) != 0:
            t_end[0] = (step + 1) * dt
            return -2
    t_end[0] = nsteps * dt
    return -1


def rhs(int mode, double[::1] params, double[:, ::1] kinv, double[::1] x):
    cdef double out[3]
    _rhs(mode, &params[0], &kinv[0, 0], &x[0], out)
    return np.array([out[0], out[1], out[2]])


def integrate(int mode, double[::1] params, double[:, ::1] kinv, double[::1] x0,
              double dt, double t_max, double vertex_tol, long stride):
    """RK4 from ``x0``; returns (times, states, label, t_end).

    States are recorded every ``stride`` steps (``stride <= 0``: first and last only).
    """
    cdef long nsteps = _n_steps(dt, t_max)
    cdef long cap = (nsteps // stride + 2) if stride > 0 else 2
    cdef cnp.ndarray[double, ndim=2] xs = np.empty((cap, 3))
    cdef cnp.ndarray[double, ndim=1] ts = np.empty(cap)
    cdef double x[3]
    cdef long step, n = 0
    cdef int v, label = -1, i
    cdef double t_end = nsteps * dt
    for i in range(3):
        x[i] = x0[i]
    for step in range(nsteps + 1):
        if n == 0 or (stride > 0 and step % stride == 0):
            ts[n] = step * dt
            for i in range(3):
                xs[n, i] = x[i]
            n += 1
        v = _vertex_of(x, vertex_tol)
        if v >= 0:
            label = v
            t_end = step * dt
            break
        if step == nsteps:
            break
        if _rk4_step(mode, &params[0], &kinv[0, 0], x, dt) != 0:
            label = -2
            t_end = (step + 1) * dt
            break
    if ts[n - 1] != t_end and label != -2:
        ts[n] = t_end
        for i in range(3):
            xs[n, i] = x[i]
        n += 1
    return ts[:n].copy(), xs[:n].copy(), label, t_end


def classify_points(int mode, double[::1] params, double[:, ::1] kinv,
                    double[:, ::1] points, double dt, double t_max, double vertex_tol):
    """Terminal vertex label and stopping time for each row of ``points``."""
    cdef Py_ssize_t n = points.shape[0], k
    cdef long nsteps = _n_steps(dt, t_max)
    cdef cnp.ndarray[int, ndim=1] labels_arr = np.empty(n, dtype=np.intc)
    cdef cnp.ndarray[double, ndim=1] times_arr = np.empty(n)
    cdef int[::1] labels = labels_arr
    cdef double[::1] times = times_arr
    cdef double x[3]
    cdef double t_end
    cdef const double *pp = &params[0]
    cdef const double *kp = &kinv[0, 0]
    with nogil:
        for k in range(n):
            x[0] = points[k, 0]
            x[1] = points[k, 1]
            x[2] = points[k, 2]
            labels[k] = _classify(mode, pp, kp, x, dt, nsteps, vertex_tol, &t_end)
            times[k] = t_end
    return labels_arr, times_arr


# ------------------------------------------------------------- agent-based

cdef struct Game:
    int *strategy
    unsigned char *rep
    double *psum
    long long *cnt
    long long *tally
    double *ftally
    double b, c, pe, mu, beta


cdef Game _game(int[::1] strategy, unsigned char[::1] rep, double[::1] psum,
                long long[::1] cnt, long long[::1] tally, double[::1] ftally,
                double[::1] params):
    cdef Game g
    g.strategy = &strategy[0]
    g.rep = &rep[0]
    g.psum = &psum[0]
    g.cnt = &cnt[0]
    g.tally = &tally[0]
    g.ftally = &ftally[0]
    g.b = params[0]
    g.c = params[1]
    g.pe = params[2]
    g.mu = params[3]
    g.beta = params[4]
    return g


cdef inline unsigned char _play(Game *g, bitgen_t *rng, int relay, int provider,
                                unsigned char provider_rep, double *relay_pay,
                                double *provider_pay) noexcept:
    cdef int s = g.strategy[relay]
    cdef bint forward = s == 0 or (s == 1 and provider_rep == 1)
    cdef unsigned char new_rep
    g.tally[T_OFFERED] += 1
    if forward:
        g.tally[T_FORWARDS] += 1
        g.ftally[F_COSTS] += g.c
        relay_pay[0] -= g.c
        if _u(rng) < 1.0 - g.pe:
            g.tally[T_DELIVERED] += 1
            g.ftally[F_GAINS] += g.b
            provider_pay[0] += g.b
        new_rep = 1
    else:
        new_rep = 0 if provider_rep == 1 else 1
    if _u(rng) < g.mu:
        new_rep = 1 - new_rep
    return new_rep


cdef inline void _encounter(Game *g, bitgen_t *rng, int i, int j, double *pay_i,
                            double *pay_j) noexcept:
    # both games read the reputations held before the encounter
    cdef unsigned char ri = g.rep[i], rj = g.rep[j]
    cdef unsigned char new_j, new_i
    pay_i[0] = 0.0
    pay_j[0] = 0.0
    new_j = _play(g, rng, j, i, ri, pay_j, pay_i)
    new_i = _play(g, rng, i, j, rj, pay_i, pay_j)
    g.rep[i] = new_i
    g.rep[j] = new_j
    g.psum[i] += pay_i[0]
    g.psum[j] += pay_j[0]
    g.cnt[i] += 2
    g.cnt[j] += 2
    g.ftally[F_PAY_FF + g.strategy[i]] += pay_i[0]
    g.ftally[F_PAY_FF + g.strategy[j]] += pay_j[0]
    g.tally[T_GAMES_FF + g.strategy[i]] += 2
    g.tally[T_GAMES_FF + g.strategy[j]] += 2


def play_encounter(int[::1] strategy, unsigned char[::1] rep, double[::1] psum,
                   long long[::1] cnt, long long[::1] tally, double[::1] ftally,
                   double[::1] params, int i, int j, object generator):
    """Both role orders between agents ``i`` and ``j``; returns their payoffs."""
    cdef Game g = _game(strategy, rep, psum, cnt, tally, ftally, params)
    cdef bitgen_t *rng = _bitgen(generator)
    cdef double pi, pj
    _encounter(&g, rng, i, j, &pi, &pj)
    return pi, pj


cdef void _uss_round(Game *g, bitgen_t *rng, int n, int *perm) noexcept:
    cdef int i, k, tmp
    cdef double pi, pj
    for i in range(n):
        perm[i] = i
    for i in range(n - 1, 0, -1):
        k = <int> (_u(rng) * (i + 1))
        tmp = perm[i]
        perm[i] = perm[k]
        perm[k] = tmp
    for i in range(n // 2):
        _encounter(g, rng, perm[2 * i], perm[2 * i + 1], &pi, &pj)


cdef void _uss_revise(Game *g, bitgen_t *rng, int n) noexcept:
    cdef int i = <int> (_u(rng) * n)
    cdef int j = <int> (_u(rng) * (n - 1))
    cdef double avg_i, avg_j
    if j >= i:
        j += 1
    avg_i = g.psum[i] / (g.cnt[i] if g.cnt[i] > 0 else 1)
    avg_j = g.psum[j] / (g.cnt[j] if g.cnt[j] > 0 else 1)
    g.tally[T_STRAT_EVENTS] += 1
    if _u(rng) < _fermi(avg_i, avg_j, g.beta) and g.strategy[j] != g.strategy[i]:
        g.strategy[j] = g.strategy[i]
        g.tally[T_ADOPTIONS] += 1
    g.psum[j] = 0.0
    g.cnt[j] = 0


def uss_run(int[::1] strategy, unsigned char[::1] rep, double[::1] psum,
            long long[::1] cnt, long long[::1] tally, double[::1] ftally,
            double[::1] params, long rounds, long revisions_per_round, object generator):
    """``rounds`` x (random perfect matching, then ``revisions_per_round`` imitation events)."""
    cdef Game g = _game(strategy, rep, psum, cnt, tally, ftally, params)
    cdef bitgen_t *rng = _bitgen(generator)
    cdef int n = strategy.shape[0]
    cdef cnp.ndarray[int, ndim=1] perm = np.empty(n, dtype=np.intc)
    cdef long t, k
    for t in range(rounds):
        _uss_round(&g, rng, n, &perm[0])
        for k in range(revisions_per_round):
            _uss_revise(&g, rng, n)
    return 0


def uss_revise(int[::1] strategy, unsigned char[::1] rep, double[::1] psum,
               long long[::1] cnt, long long[::1] tally, double[::1] ftally,
               double[::1] params, long events, object generator):
    cdef Game g = _game(strategy, rep, psum, cnt, tally, ftally, params)
    cdef bitgen_t *rng = _bitgen(generator)
    cdef long k
    for k in range(events):
        _uss_revise(&g, rng, strategy.shape[0])
    return 0


cdef struct Net:
    int n
    int h
    int cap
    int *eu
    int *ev
    int *inc
    int *deg
    int *slot
    long long *typecount


cdef Net _net(int[::1] eu, int[::1] ev, int[:, ::1] inc, int[::1] deg,
              int[:, ::1] slot, long long[::1] typecount):
    cdef Net net
    net.n = deg.shape[0]
    net.h = eu.shape[0]
    net.cap = inc.shape[1]
    net.eu = &eu[0]
    net.ev = &ev[0]
    net.inc = &inc[0, 0]
    net.deg = &deg[0]
    net.slot = &slot[0, 0]
    net.typecount = &typecount[0]
    return net


cdef inline int _other_end(Net *net, int e, int node) noexcept nogil:
    return net.ev[e] if net.eu[e] == node else net.eu[e]


cdef inline void _set_slot(Net *net, int e, int node, int s) noexcept nogil:
    if net.eu[e] == node:
        net.slot[2 * e] = s
    else:
        net.slot[2 * e + 1] = s


cdef inline int _get_slot(Net *net, int e, int node) noexcept nogil:
    return net.slot[2 * e] if net.eu[e] == node else net.slot[2 * e + 1]


cdef void _detach(Net *net, int node, int e) noexcept nogil:
    cdef int s = _get_slot(net, e, node)
    cdef int last = net.deg[node] - 1
    cdef int moved = net.inc[node * net.cap + last]
    net.inc[node * net.cap + s] = moved
    _set_slot(net, moved, node, s)
    net.deg[node] = last


cdef bint _is_neighbor(Net *net, int node, int w) noexcept nogil:
    cdef int s
    for s in range(net.deg[node]):
        if _other_end(net, net.inc[node * net.cap + s], node) == w:
            return True
    return False


cdef int _rewire(Net *net, Game *g, bitgen_t *rng, const double *kvec) noexcept:
    cdef int e = <int> (_u(rng) * net.h)
    cdef int a = net.eu[e], b = net.ev[e]
    cdef int t = _link_type(g.strategy[a], g.strategy[b])
    cdef int keeper, other, w
    g.tally[T_REWIRE_ATTEMPTS] += 1
    if not (_u(rng) < kvec[t]):
        return 0
    g.tally[T_BREAKS] += 1
    if _u(rng) < 0.5:
        keeper = a
        other = b
    else:
        keeper = b
        other = a
    if net.deg[keeper] >= net.n - 1:
        g.tally[T_CANCELLED] += 1
        return 0
    while True:
        w = <int> (_u(rng) * net.n)
        if w != keeper and not _is_neighbor(net, keeper, w):
            break
    if net.deg[w] >= net.cap:
        return 1
    _detach(net, other, e)
    if net.eu[e] == keeper:
        net.ev[e] = w
    else:
        net.eu[e] = w
    net.inc[w * net.cap + net.deg[w]] = e
    _set_slot(net, e, w, net.deg[w])
    net.deg[w] += 1
    net.typecount[t] -= 1
    net.typecount[_link_type(g.strategy[keeper], g.strategy[w])] += 1
    return 0


cdef double _neighborhood_payoff(Net *net, Game *g, bitgen_t *rng, int node) noexcept:
    cdef double total = 0.0, pi, pj
    cdef int s
    for s in range(net.deg[node]):
        _encounter(g, rng, node, _other_end(net, net.inc[node * net.cap + s], node), &pi, &pj)
        total += pi
    return total


cdef void _adopt(Net *net, Game *g, int node, int new_s) noexcept:
    cdef int s, e, nb
    cdef int old_s = g.strategy[node]
    for s in range(net.deg[node]):
        e = net.inc[node * net.cap + s]
        nb = g.strategy[_other_end(net, e, node)]
        net.typecount[_link_type(old_s, nb)] -= 1
        net.typecount[_link_type(new_s, nb)] += 1
    g.strategy[node] = new_s


cdef void _ss_strategy_event(Net *net, Game *g, bitgen_t *rng) noexcept:
    # random role model i and learner j, each scored by a fresh round with all neighbours
    cdef int i = <int> (_u(rng) * net.n)
    cdef int j = <int> (_u(rng) * (net.n - 1))
    cdef double fi, fj
    if j >= i:
        j += 1
    fi = _neighborhood_payoff(net, g, rng, i)
    fj = _neighborhood_payoff(net, g, rng, j)
    g.tally[T_STRAT_EVENTS] += 1
    if _u(rng) < _fermi(fi, fj, g.beta) and g.strategy[j] != g.strategy[i]:
        _adopt(net, g, j, g.strategy[i])
        g.tally[T_ADOPTIONS] += 1
    g.psum[j] = 0.0
    g.cnt[j] = 0


def ss_run(int[::1] strategy, unsigned char[::1] rep, double[::1] psum,
           long long[::1] cnt, long long[::1] tally, double[::1] ftally,
           double[::1] params, int[::1] eu, int[::1] ev, int[:, ::1] inc,
           int[::1] deg, int[:, ::1] slot, long long[::1] typecount,
           long long[::1] type_accum, double[::1] kvec, double omega, long steps,
           object generator):
    """Co-evolution steps: strategy event with probability ``omega``, else a rewiring attempt.

    ``type_accum`` receives the link-type counts after every step. Returns a status code.
    """
    cdef Game g = _game(strategy, rep, psum, cnt, tally, ftally, params)
    cdef Net net = _net(eu, ev, inc, deg, slot, typecount)
    cdef bitgen_t *rng = _bitgen(generator)
    cdef long t
    cdef int i
    for t in range(steps):
        if _u(rng) < omega:
            _ss_strategy_event(&net, &g, rng)
        elif _rewire(&net, &g, rng, &kvec[0]) != 0:
            return 1
        for i in range(6):
            type_accum[i] += net.typecount[i]
    return 0


def rewire(int[::1] strategy, long long[::1] tally, int[::1] eu, int[::1] ev,
           int[:, ::1] inc, int[::1] deg, int[:, ::1] slot, long long[::1] typecount,
           double[::1] kvec, long events, object generator):
    """``events`` rewiring attempts with strategies held fixed."""
    cdef Game g
    cdef Net net = _net(eu, ev, inc, deg, slot, typecount)
    cdef bitgen_t *rng = _bitgen(generator)
    cdef long t
    g.strategy = &strategy[0]
    g.tally = &tally[0]
    for t in range(events):
        if _rewire(&net, &g, rng, &kvec[0]) != 0:
            return 1
    return 0
