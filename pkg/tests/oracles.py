"""Slow, independent reference implementations used only by the tests."""

import math

import numpy as np
from scipy import integrate

from covoter.rng import EDEC, EPICK_I, EPICK_J, ETIME, VDEC, VPICK, VTIME, RngStream


def replay_y(y0, flips, opinion0, t):
    """y(t) = e^{-t} y0 + int_0^t e^{-(t-s)} 1{+ at s} ds by adaptive quadrature per segment."""
    total = math.exp(-t) * y0
    times = [0.0] + [f for f in flips if f < t] + [t]
    plus = opinion0 == 0
    for a, b in zip(times[:-1], times[1:]):
        if plus and b > a:
            total += integrate.quad(lambda s: math.exp(-(t - s)), a, b, epsabs=1e-14, epsrel=1e-13)[0]
        plus = not plus
    return total


def python_events(n, until, seed, vertex_rate, edge_rate, t_v0, t_e0, with_edges=True):
    """Merged list of (time, kind, counter) for both streams, generated by the keyed RNG."""
    rng = RngStream(seed)
    ev = []
    t, k = t_v0, 0
    while t <= until:
        ev.append((t, "v", k))
        k += 1
        t = t - math.log(rng.uniform(VTIME, 0, k)) / vertex_rate
    if with_edges:
        t, k = t_e0, 0
        while t <= until:
            ev.append((t, "e", k))
            k += 1
            t = t - math.log(rng.uniform(ETIME, 0, k)) / edge_rate
    ev.sort()
    return ev


def model1_vertex_only(state0, params, until, seed):
    """Replays model-1 flips in plain Python; returns (opinions, flip-time lists)."""
    rng = RngStream(seed)
    n = state0.n
    op = state0.opinions.astype(int).copy()
    op_start = op.copy()
    gmax = max(params.gamma_pm, params.gamma_mp)
    flips = [[] for _ in range(n)]
    for t, kind, k in python_events(n, until, seed, n * gmax, 1.0, state0.clock[1], state0.clock[2], False):
        i = min(int(rng.uniform(VPICK, 0, k) * n), n - 1)
        g = params.gamma_pm if op[i] == 0 else params.gamma_mp
        if rng.uniform(VDEC, 0, k) * gmax < g:
            op[i] = 1 - op[i]
            flips[i].append(t)
    return op, op_start, flips


def model2_full(state0, params, until, seed):
    """Plain-Python model 2 (with edges); returns (opinions, adjacency)."""
    rng = RngStream(seed)
    n = state0.n
    op = state0.opinions.astype(int).copy()
    adj = state0.adjacency.astype(int).copy()
    rate_e = 0.5 * n * (n - 1)
    for t, kind, k in python_events(n, until, seed, n * params.beta, rate_e, state0.clock[1], state0.clock[2]):
        if kind == "v":
            i = min(int(rng.uniform(VPICK, 0, k) * n), n - 1)
            nb = np.nonzero(adj[i])[0]
            if nb.size:
                frac = np.count_nonzero(op[nb] == 0)
                op[i] = 0 if rng.uniform(VDEC, 0, k) * nb.size < frac else 1
        else:
            i = min(int(rng.uniform(EPICK_I, 0, k) * n), n - 1)
            j = min(int(rng.uniform(EPICK_J, 0, k) * (n - 1)), n - 2)
            j += j >= i
            if op[i] == op[j]:
                p = params.pi_p if op[i] == 0 else params.pi_m
            else:
                p = (0.5 * (params.pi_p + params.pi_m)) ** params.q_exp
            a = int(rng.uniform(EDEC, 0, k) < p)
            adj[i, j] = adj[j, i] = a
    return op, adj


def fine_quadrature_alpha(t, u, fp_fun, fm_fun, kern, m=200001):
    """alpha by composite Simpson on a very fine grid."""
    y = np.linspace(0.0, 1.0, m)
    h = kern(y, u)
    num = integrate.simpson(fp_fun(y) * h, x=y)
    den = integrate.simpson((fp_fun(y) + fm_fun(y)) * h, x=y)
    return num / den
