"""Jitted event loop shared by every stochastic process.

Two superposed Poisson streams drive a run: a vertex stream of rate
``n * vertex_rate`` and an edge stream of rate ``layers * C(n, 2)``.  Event
``k`` of a stream uses counter ``k`` for every variate it needs, so the
sequence of clock rings and uniforms does not depend on the state.
"""

import math

import numba as nb
import numpy as np

from covoter.rng import (
    EDEC,
    ELAYER,
    EPICK_I,
    EPICK_J,
    ETIME,
    INIT_EDGE,
    INIT_OP,
    INIT_Y,
    VDEC,
    VPICK,
    VTIME,
    key_uniform,
)

# process modes
M1 = 0
M2 = 1
M3 = 2
MIM2 = 3
MIM3 = 4

# layout of the parameter vector
P_GPM = 0
P_GMP = 1
P_BETA = 2
P_PIP = 3
P_PIM = 4
P_QEXP = 5
P_Q = 6
P_PGP = 7
P_PGM = 8
P_PRP = 9
P_PRM = 10
P_P0 = 11
P_MIM_PP = 12  # p(+) in the mimicking layered edge rule
P_MIM_PM = 13  # p(-)
N_PARAMS = 14

# return codes
OK = 0
STOPPED_CONSENSUS = 1
DEGENERATE = 2

PLUS = 0
MINUS = 1


@nb.njit(cache=True)
def init_vertices(seed, n, p_plus, exact_split, y0_mode, y0_value, op, y0):
    """Opinions i.i.d. Bernoulli(p_plus), or the first round(n p_plus) Plus."""
    n_first = int(round(n * p_plus))
    for i in range(n):
        if exact_split:
            op[i] = PLUS if i < n_first else MINUS
        else:
            op[i] = PLUS if key_uniform(seed, INIT_OP, i, 0) < p_plus else MINUS
        if y0_mode == 0:
            y0[i] = key_uniform(seed, INIT_Y, i, 0)
        else:
            y0[i] = y0_value


@nb.njit(cache=True)
def init_edges(seed, n, n_layers, p0, q, layers, gcnt, rcnt, adj):
    """Independent Bernoulli(p0) edges in every layer; derives the resulting graph."""
    for i in range(n):
        for j in range(i + 1, n):
            g = 0
            r = 0
            for l in range(n_layers):
                a = 1 if key_uniform(seed, INIT_EDGE, i * n + j, l) < p0 else 0
                if n_layers > 1:
                    layers[l, i, j] = a
                    layers[l, j, i] = a
                    if l < q:
                        g += a
                    else:
                        r += a
                else:
                    adj[i, j] = a
                    adj[j, i] = a
            if n_layers > 1:
                gcnt[i, j] = g
                gcnt[j, i] = g
                rcnt[i, j] = r
                rcnt[j, i] = r
                res = 1 if ((g == q and r == 0) or (r == q and g == 0)) else 0
                adj[i, j] = res
                adj[j, i] = res


@nb.njit(cache=True)
def neighbour_counts(adj, op, deg, nplus):
    n = adj.shape[0]
    for i in range(n):
        d = 0
        p = 0
        for j in range(n):
            if adj[i, j]:
                d += 1
                if op[j] == PLUS:
                    p += 1
        deg[i] = d
        nplus[i] = p


@nb.njit(cache=True, inline="always")
def advance(y, plus, dt):
    e = math.exp(-dt)
    if plus:
        v = 1.0 - (1.0 - y) * e
    else:
        v = y * e
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


@nb.njit(cache=True)
def sync_all(t, op, y, last):
    for i in range(op.size):
        if last[i] < t:
            y[i] = advance(y[i], op[i] == PLUS, t - last[i])
            last[i] = t


@nb.njit(cache=True, inline="always")
def _linear_h(decay, u, v, pip, pim, p0):
    top = 1.0 - decay
    u = min(max(u, 0.0), top)
    v = min(max(v, 0.0), top)
    return decay * p0 + 0.5 * (pip * u + pim * (top - u) + pip * v + pim * (top - v))


@nb.njit(cache=True)
def _segment(times, t):
    """Index k and weight w with t = (1 - w) times[k] + w times[k + 1]."""
    K = times.size
    if K == 1:
        return 0, 0.0
    if t <= times[0]:
        return 0, 0.0
    if t >= times[K - 1]:
        return K - 2, 1.0
    lo = 0
    hi = K - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if times[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo, (t - times[lo]) / (times[lo + 1] - times[lo])


@nb.njit(cache=True)
def alpha_linear(t, u, P, dens_t, moments):
    """Adoption probability for the linear kernel from interpolated branch moments."""
    k, w = _segment(dens_t, t)
    k1 = min(k + 1, dens_t.size - 1)
    mp0 = (1 - w) * moments[k, 0] + w * moments[k1, 0]
    mp1 = (1 - w) * moments[k, 1] + w * moments[k1, 1]
    m0 = (1 - w) * moments[k, 2] + w * moments[k1, 2]
    m1 = (1 - w) * moments[k, 3] + w * moments[k1, 3]
    decay = math.exp(-t)
    top = 1.0 - decay
    uc = min(max(u, 0.0), top)
    c = decay * P[P_P0] + P[P_PIM] * top
    a = 0.5 * (P[P_PIP] - P[P_PIM])
    num = (c + a * uc) * mp0 + a * mp1
    den = (c + a * uc) * m0 + a * m1
    if den < 1e-12:
        return -1.0
    return min(max(num / den, 0.0), 1.0)


@nb.njit(cache=True)
def alpha_layered(t, u, P, dens_t, dens_p, dens_m):
    """Adoption probability for the resulting-graph kernel by trapezoid quadrature."""
    k, w = _segment(dens_t, t)
    k1 = min(k + 1, dens_t.size - 1)
    M = dens_p.shape[1] - 1
    q = int(P[P_Q])
    decay = math.exp(-t)
    num = 0.0
    den = 0.0
    for j in range(M + 1):
        yj = j / M
        hg = _linear_h(decay, yj, u, P[P_PGP], P[P_PGM], P[P_P0])
        hr = _linear_h(decay, yj, u, P[P_PRP], P[P_PRM], P[P_P0])
        hk = hg**q * (1.0 - hr) ** q + hr**q * (1.0 - hg) ** q
        wt = 0.5 / M if (j == 0 or j == M) else 1.0 / M
        fp = (1 - w) * dens_p[k, j] + w * dens_p[k1, j]
        fm = (1 - w) * dens_m[k, j] + w * dens_m[k1, j]
        num += wt * fp * hk
        den += wt * (fp + fm) * hk
    if den < 1e-12:
        return -1.0
    return min(max(num / den, 0.0), 1.0)


@nb.njit(cache=True, inline="always")
def _edge_prob(mode, P, xi, xj, layer):
    if mode == M3:
        q = int(P[P_Q])
        if layer < q:
            pp = P[P_PGP]
            pm = P[P_PGM]
        else:
            pp = P[P_PRP]
            pm = P[P_PRM]
        if xi == xj:
            return pp if xi == PLUS else pm
        return 0.5 * (pp + pm)
    if mode == MIM3:
        pi_ = P[P_MIM_PP] if xi == PLUS else P[P_MIM_PM]
        pj_ = P[P_MIM_PP] if xj == PLUS else P[P_MIM_PM]
        s = pi_ + pj_
        return 2.0 * (0.25 * s * (2.0 - s)) ** P[P_Q]
    if xi == xj:
        return P[P_PIP] if xi == PLUS else P[P_PIM]
    mix = 0.5 * (P[P_PIP] + P[P_PIM])
    if mode == M2 and P[P_QEXP] != 1.0:
        return mix ** P[P_QEXP]
    return mix


@nb.njit(cache=True)
def _toggle(adj, deg, nplus, op, i, j, active, track):
    adj[i, j] = active
    adj[j, i] = active
    if track:
        s = 1 if active else -1
        deg[i] += s
        deg[j] += s
        if op[j] == PLUS:
            nplus[i] += s
        if op[i] == PLUS:
            nplus[j] += s


@nb.njit(cache=True)
def run_events(
    mode,
    P,
    seed,
    op,
    y,
    y0,
    last,
    adj,
    layers,
    gcnt,
    rcnt,
    deg,
    nplus,
    clock,
    counts,
    t_end,
    simulate_edges,
    alpha_empirical,
    stop_at_consensus,
    dens_t,
    dens_p,
    dens_m,
    moments,
):
    """Advance the process to ``t_end``.

    ``clock`` holds ``[t, next vertex ring, next edge ring]`` and ``counts``
    the number of rings consumed per stream; both are updated in place so a
    run can be resumed.  Returns a status code.
    """
    n = op.size
    n_layers = layers.shape[0] if mode == M3 else 1
    q = int(P[P_Q])
    if mode == M1:
        vrate = max(P[P_GPM], P[P_GMP])
    else:
        vrate = P[P_BETA]
    rate_v = n * vrate
    rate_e = n_layers * 0.5 * n * (n - 1)
    track = (mode == M2) or (mode == M3) or alpha_empirical
    n_plus = 0
    for i in range(n):
        if op[i] == PLUS:
            n_plus += 1
    if stop_at_consensus and (n_plus == 0 or n_plus == n):
        return STOPPED_CONSENSUS
    while True:
        tv = clock[1]
        te = clock[2] if simulate_edges else np.inf
        if tv > t_end and te > t_end:
            break
        if tv <= te:
            k = counts[0]
            clock[0] = tv
            i = int(key_uniform(seed, VPICK, 0, k) * n)
            if i >= n:
                i = n - 1
            ud = key_uniform(seed, VDEC, 0, k)
            plus = op[i] == PLUS
            y[i] = advance(y[i], plus, tv - last[i])
            last[i] = tv
            new = op[i]
            if mode == M1:
                g = P[P_GPM] if plus else P[P_GMP]
                if ud * vrate < g:
                    new = MINUS if plus else PLUS
            elif mode == M2 or mode == M3 or alpha_empirical:
                if deg[i] > 0:
                    new = PLUS if ud * deg[i] < nplus[i] else MINUS
            else:
                ty = y[i] - math.exp(-tv) * y0[i]
                if mode == MIM2:
                    a = alpha_linear(tv, ty, P, dens_t, moments)
                else:
                    a = alpha_layered(tv, ty, P, dens_t, dens_p, dens_m)
                if a < 0.0:
                    return DEGENERATE
                new = PLUS if ud < a else MINUS
            if new != op[i]:
                op[i] = new
                s = 1 if new == PLUS else -1
                n_plus += s
                if track:
                    for j in range(n):
                        if adj[i, j]:
                            nplus[j] += s
            counts[0] = k + 1
            clock[1] = tv - math.log(key_uniform(seed, VTIME, 0, k + 1)) / rate_v
            if stop_at_consensus and (n_plus == 0 or n_plus == n):
                return STOPPED_CONSENSUS
        else:
            k = counts[1]
            clock[0] = te
            i = int(key_uniform(seed, EPICK_I, 0, k) * n)
            if i >= n:
                i = n - 1
            j = int(key_uniform(seed, EPICK_J, 0, k) * (n - 1))
            if j >= n - 1:
                j = n - 2
            if j >= i:
                j += 1
            layer = 0
            if mode == M3:
                layer = int(key_uniform(seed, ELAYER, 0, k) * n_layers)
                if layer >= n_layers:
                    layer = n_layers - 1
            p = _edge_prob(mode, P, op[i], op[j], layer)
            act = 1 if key_uniform(seed, EDEC, 0, k) < p else 0
            if mode == M3:
                old = layers[layer, i, j]
                if old != act:
                    layers[layer, i, j] = act
                    layers[layer, j, i] = act
                    d = act - old
                    if layer < q:
                        gcnt[i, j] += d
                        gcnt[j, i] = gcnt[i, j]
                    else:
                        rcnt[i, j] += d
                        rcnt[j, i] = rcnt[i, j]
                    g = gcnt[i, j]
                    r = rcnt[i, j]
                    res = 1 if ((g == q and r == 0) or (r == q and g == 0)) else 0
                    if res != adj[i, j]:
                        _toggle(adj, deg, nplus, op, i, j, res, track)
            elif adj[i, j] != act:
                _toggle(adj, deg, nplus, op, i, j, act, track)
            counts[1] = k + 1
            clock[2] = te - math.log(key_uniform(seed, ETIME, 0, k + 1)) / rate_e
    clock[0] = t_end
    return OK
