"""Continuous-time simulation of the co-evolving processes and their mimics.

A :class:`SimState` stores vertices as parallel arrays (opinion codes, ``y``,
``y0`` and the time ``y`` was last brought up to date) and the graph as a dense
``uint8`` adjacency matrix.  The layered model additionally keeps its ``2q``
layer matrices and per-pair counts of active g- and r-copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from covoter import _engine as eng
from covoter.core import (
    DensityTrajectory,
    EdgeSet,
    Model1Params,
    Model2Params,
    Model3Params,
    ModelParams,
    Opinion,
    VertexState,
    trapezoid_weights,
)
from covoter.errors import ConfigurationError, ContractViolation, DegenerateKernelError
from covoter.rng import ETIME, VTIME, RngStream

Observer = Callable[["Snapshot"], None]

MIM3_P_CHOICES = ("mean", "g", "r")


@dataclass
class Snapshot:
    """Frozen copy of a run at time ``t``."""

    t: float
    opinions: np.ndarray
    y: np.ndarray
    y0: np.ndarray
    adjacency: np.ndarray | None
    layers: np.ndarray | None = None
    permutation: np.ndarray = field(init=False)

    def __post_init__(self):
        self.permutation = canonical_permutation(self.opinions, self.types)

    @property
    def n(self) -> int:
        return self.opinions.size

    @property
    def types(self) -> np.ndarray:
        return self.y - math.exp(-self.t) * self.y0

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.opinions == Opinion.PLUS))

    @property
    def edges(self) -> EdgeSet:
        if self.adjacency is None:
            raise ContractViolation("snapshot was taken without edges")
        return EdgeSet(self.adjacency)

    def relabelled_adjacency(self) -> np.ndarray:
        p = self.permutation
        return self.adjacency[np.ix_(p, p)]


def canonical_permutation(opinions, types=None) -> np.ndarray:
    """Vertex order with Plus first, then increasing type, ties by index.

    Accepts either a :class:`Snapshot` or the two arrays.
    """
    if isinstance(opinions, Snapshot):
        opinions, types = opinions.opinions, opinions.types
    opinions = np.asarray(opinions)
    types = np.asarray(types, dtype=float)
    if opinions.shape != types.shape:
        raise ContractViolation("opinions and types must have equal length")
    idx = np.arange(opinions.size)
    return np.lexsort((idx, types, opinions.astype(np.int64)))


@dataclass
class CouplingTrace:
    times: np.ndarray
    d_V: np.ndarray
    d_E: np.ndarray
    min_degree: np.ndarray
    n: int

    def __post_init__(self):
        if np.any(self.d_V < 0) or np.any(self.d_V > self.n):
            raise ContractViolation("d_V out of range")
        if np.any(self.d_E < 0) or np.any(self.d_E > self.n * (self.n - 1) // 2):
            raise ContractViolation("d_E out of range")

    def rows(self):
        return zip(self.times.tolist(), self.d_V.tolist(), self.d_E.tolist(), self.min_degree.tolist())


@dataclass
class SimState:
    params: ModelParams
    mode: int
    rng: RngStream
    opinions: np.ndarray
    y: np.ndarray
    y0: np.ndarray
    last: np.ndarray
    adjacency: np.ndarray
    layers: np.ndarray
    gcount: np.ndarray
    rcount: np.ndarray
    degree: np.ndarray
    nplus: np.ndarray
    clock: np.ndarray
    counts: np.ndarray
    simulate_edges: bool
    alpha_empirical: bool = False
    mim3_p: str = "mean"
    consensus_time: float | None = None

    @property
    def t(self) -> float:
        return float(self.clock[0])

    @property
    def n(self) -> int:
        return self.opinions.size

    @property
    def mimicking(self) -> bool:
        return self.mode in (eng.MIM2, eng.MIM3)

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.opinions == Opinion.PLUS))

    @property
    def vertex_events(self) -> int:
        return int(self.counts[0])

    @property
    def edge_events(self) -> int:
        return int(self.counts[1])

    def vertex(self, i: int) -> VertexState:
        y = eng.advance(self.y[i], self.opinions[i] == Opinion.PLUS, self.t - self.last[i])
        return VertexState(Opinion(int(self.opinions[i])), y, float(self.y0[i]), self.t)

    @property
    def edges(self) -> EdgeSet:
        if not self.simulate_edges:
            raise ContractViolation("edges are not simulated in vertex-only mode")
        return EdgeSet(self.adjacency)

    def layer_edges(self) -> list[EdgeSet]:
        if self.mode != eng.M3:
            raise ContractViolation("only the layered model has layers")
        return [EdgeSet(l) for l in self.layers]

    def snapshot(self) -> Snapshot:
        eng.sync_all(self.t, self.opinions, self.y, self.last)
        adj = self.adjacency.copy() if self.simulate_edges else None
        layers = self.layers.copy() if (self.mode == eng.M3 and self.simulate_edges) else None
        return Snapshot(self.t, self.opinions.copy(), self.y.copy(), self.y0.copy(), adj, layers)


def _param_vector(params: ModelParams, mimicking: bool, mim3_p: str) -> tuple[int, np.ndarray]:
    P = np.zeros(eng.N_PARAMS)
    P[eng.P_QEXP] = 1.0
    P[eng.P_Q] = 1.0
    P[eng.P_P0] = params.p0
    if isinstance(params, Model1Params):
        if mimicking:
            raise ContractViolation("model 1 has no mimicking process")
        P[eng.P_GPM], P[eng.P_GMP] = params.gamma_pm, params.gamma_mp
        P[eng.P_PIP], P[eng.P_PIM] = params.pi_p, params.pi_m
        return eng.M1, P
    if isinstance(params, Model2Params):
        if mimicking and not params.linear:
            raise ContractViolation("the mimicking process is defined for the linear model only")
        P[eng.P_BETA] = params.beta
        P[eng.P_PIP], P[eng.P_PIM] = params.pi_p, params.pi_m
        P[eng.P_QEXP] = params.q_exp
        return (eng.MIM2 if mimicking else eng.M2), P
    if isinstance(params, Model3Params):
        P[eng.P_BETA] = params.beta
        P[eng.P_Q] = params.q
        P[eng.P_PGP], P[eng.P_PGM] = params.pi_p_g, params.pi_m_g
        P[eng.P_PRP], P[eng.P_PRM] = params.pi_p_r, params.pi_m_r
        if mim3_p not in MIM3_P_CHOICES:
            raise ConfigurationError(f"mim3_p must be one of {MIM3_P_CHOICES}")
        if mim3_p == "mean":
            P[eng.P_MIM_PP] = 0.5 * (params.pi_p_g + params.pi_p_r)
            P[eng.P_MIM_PM] = 0.5 * (params.pi_m_g + params.pi_m_r)
        elif mim3_p == "g":
            P[eng.P_MIM_PP], P[eng.P_MIM_PM] = params.pi_p_g, params.pi_m_g
        else:
            P[eng.P_MIM_PP], P[eng.P_MIM_PM] = params.pi_p_r, params.pi_m_r
        return (eng.MIM3 if mimicking else eng.M3), P
    raise ContractViolation(f"unknown parameter type {type(params).__name__}")


def _parse_opinion_law(law) -> tuple[float, bool]:
    if isinstance(law, str):
        table = {"balanced": (0.5, True), "plus": (1.0, True), "minus": (0.0, True)}
        if law not in table:
            raise ContractViolation(f"unknown opinion law {law!r}")
        return table[law]
    p = float(law)
    if not 0.0 <= p <= 1.0:
        raise ContractViolation("opinion probability must lie in [0, 1]")
    return p, False


def init(
    n: int,
    params: ModelParams,
    opinion_law="balanced",
    y_law="uniform",
    rng: RngStream | int = 0,
    *,
    mimicking: bool = False,
    simulate_edges: bool = True,
    alpha_empirical: bool = False,
    mim3_p: str = "mean",
) -> SimState:
    """Build the time-zero state.

    ``opinion_law`` is a probability of ``+`` (i.i.d. draws) or one of
    ``"balanced"``, ``"plus"``, ``"minus"`` (deterministic split).  ``y_law`` is
    ``"uniform"`` or a constant in [0, 1].  Every pair (in every layer) is
    active independently with probability ``p0``.
    """
    if n < 2:
        raise ContractViolation("need at least two vertices")
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    if not simulate_edges and not isinstance(params, Model1Params):
        raise ContractViolation("vertex-only mode is valid for model 1 only")
    mode, P = _param_vector(params, mimicking, mim3_p)
    seed = np.uint64(rng.seed)
    p_plus, exact = _parse_opinion_law(opinion_law)
    if y_law == "uniform":
        y_mode, y_val = 0, 0.0
    else:
        y_mode, y_val = 1, float(y_law)
        if not 0.0 <= y_val <= 1.0:
            raise ContractViolation("constant y0 must lie in [0, 1]")
    op = np.empty(n, dtype=np.int8)
    y0 = np.empty(n)
    eng.init_vertices(seed, n, p_plus, exact, y_mode, y_val, op, y0)
    n_layers = params.n_layers if mode == eng.M3 else 1
    q = int(P[eng.P_Q])
    adj = np.zeros((n, n) if simulate_edges else (1, 1), dtype=np.uint8)
    if mode == eng.M3:
        layers = np.zeros((n_layers, n, n), dtype=np.uint8)
        gcnt = np.zeros((n, n), dtype=np.int8)
        rcnt = np.zeros((n, n), dtype=np.int8)
    else:
        layers = np.zeros((1, 1, 1), dtype=np.uint8)
        gcnt = np.zeros((1, 1), dtype=np.int8)
        rcnt = np.zeros((1, 1), dtype=np.int8)
    if simulate_edges:
        eng.init_edges(seed, n, n_layers, params.p0, q, layers, gcnt, rcnt, adj)
    deg = np.zeros(n, dtype=np.int64)
    nplus = np.zeros(n, dtype=np.int64)
    if simulate_edges:
        eng.neighbour_counts(adj, op, deg, nplus)
    vrate = max(P[eng.P_GPM], P[eng.P_GMP]) if mode == eng.M1 else P[eng.P_BETA]
    erate = n_layers * 0.5 * n * (n - 1)
    clock = np.array(
        [
            0.0,
            -math.log(rng.uniform(VTIME, 0, 0)) / (n * vrate),
            -math.log(rng.uniform(ETIME, 0, 0)) / erate,
        ]
    )
    return SimState(
        params=params,
        mode=mode,
        rng=rng,
        opinions=op,
        y=y0.copy(),
        y0=y0,
        last=np.zeros(n),
        adjacency=adj,
        layers=layers,
        gcount=gcnt,
        rcount=rcnt,
        degree=deg,
        nplus=nplus,
        clock=clock,
        counts=np.zeros(2, dtype=np.int64),
        simulate_edges=simulate_edges,
        alpha_empirical=alpha_empirical,
        mim3_p=mim3_p,
    )


_EMPTY_T = np.zeros(1)
_EMPTY_F = np.zeros((1, 2))
_EMPTY_MOM = np.zeros((1, 4))


def _density_arrays(state: SimState, densities: DensityTrajectory | None):
    if densities is None or state.alpha_empirical:
        return _EMPTY_T, _EMPTY_F, _EMPTY_F, _EMPTY_MOM
    fp, fm = densities.stacked()
    M = fp.shape[1] - 1
    w = trapezoid_weights(M)
    grid = np.linspace(0.0, 1.0, M + 1)
    moments = np.empty((len(densities), 4))
    for k, t in enumerate(densities.times):
        yc = np.clip(grid, 0.0, 1.0 - math.exp(-t))
        moments[k] = (w @ fp[k], w @ (yc * fp[k]), w @ (fp[k] + fm[k]), w @ (yc * (fp[k] + fm[k])))
    return densities.times, np.ascontiguousarray(fp), np.ascontiguousarray(fm), moments


def _advance(state: SimState, t_end: float, stop_at_consensus: bool, arrays) -> int:
    P = _param_vector(state.params, state.mimicking, state.mim3_p)[1]
    status = eng.run_events(
        state.mode,
        P,
        np.uint64(state.rng.seed),
        state.opinions,
        state.y,
        state.y0,
        state.last,
        state.adjacency,
        state.layers,
        state.gcount,
        state.rcount,
        state.degree,
        state.nplus,
        state.clock,
        state.counts,
        float(t_end),
        state.simulate_edges,
        state.alpha_empirical,
        stop_at_consensus,
        *arrays,
    )
    if status == eng.DEGENERATE:
        raise DegenerateKernelError(f"adoption probability undefined at t={state.t:.6g}")
    if status == eng.STOPPED_CONSENSUS and state.consensus_time is None:
        state.consensus_time = state.t
    return status


def _drive(state, until, observe_at, observers, stop_at_consensus, arrays) -> SimState:
    if until < state.t:
        raise ContractViolation(f"until={until} is before the current time {state.t}")
    times = sorted({float(t) for t in observe_at if state.t <= t <= until})
    stops = times if times and times[-1] == until else times + [float(until)]
    for t_obs in stops:
        status = _advance(state, t_obs, stop_at_consensus, arrays)
        if status == eng.STOPPED_CONSENSUS:
            # consensus is absorbing for the copying dynamics; freeze the clock here
            break
        if observers and t_obs in times:
            snap = state.snapshot()
            for obs in observers:
                obs(snap)
    eng.sync_all(state.t, state.opinions, state.y, state.last)
    return state


def run(
    state: SimState,
    until: float,
    observers: Sequence[Observer] = (),
    observe_at: Iterable[float] = (),
    stop_at_consensus: bool = False,
) -> SimState:
    """Execute all events up to ``until``; observers get a snapshot at each time in ``observe_at``."""
    if state.mimicking and not state.alpha_empirical:
        raise ConfigurationError("mimicking state: use run_mimicking with a density trajectory")
    if stop_at_consensus and isinstance(state.params, Model1Params):
        raise ContractViolation("consensus is not absorbing in model 1")
    return _drive(state, until, observe_at, observers, stop_at_consensus, _density_arrays(state, None))


def run_mimicking(
    state: SimState,
    until: float,
    densities: DensityTrajectory | None,
    observers: Sequence[Observer] = (),
    observe_at: Iterable[float] = (),
) -> SimState:
    """Run the mimicking process, whose vertices flip by the deterministic adoption law.

    ``densities`` is the type-law trajectory feeding the adoption probability;
    it must cover ``[state.t, until]``.  Between stored slices the densities
    are interpolated linearly in time.
    """
    if not state.mimicking:
        raise ConfigurationError("state was not initialised as a mimicking process")
    if not state.alpha_empirical:
        if densities is None or not densities.covers(state.t, until):
            raise ConfigurationError(f"density trajectory does not cover [{state.t}, {until}]")
    return _drive(state, until, observe_at, observers, False, _density_arrays(state, densities))


def opinion_trajectory(
    state: SimState, until: float, dt: float, stop_at_consensus: bool = False, densities=None
) -> np.ndarray:
    """Rows ``(t, n_plus, n)`` on the grid ``state.t, state.t + dt, ...``."""
    if dt <= 0:
        raise ContractViolation("dt must be > 0")
    rows = [(state.t, state.n_plus, state.n)]
    k = 1
    while True:
        t_next = min(rows[0][0] + k * dt, until)
        if state.mimicking:
            run_mimicking(state, t_next, densities)
        else:
            run(state, t_next, stop_at_consensus=stop_at_consensus)
        rows.append((state.t, state.n_plus, state.n))
        if t_next >= until or state.consensus_time is not None:
            break
        k += 1
    return np.array(rows, dtype=float)


def type_law_trajectory(params: Model2Params | Model3Params, p_plus: float, until: float, M: int = 256, dt_out: float = 0.05):
    """Forward-equation type law started from a point mass at zero."""
    from covoter.core import DensityField
    from covoter.pde import PdeConfig, solve

    init_field = DensityField.point_mass(M, p_plus, 0.0)
    n_out = max(1, int(math.ceil(until / dt_out)))
    times = np.linspace(0.0, until, n_out + 1)
    return solve(init_field, params, PdeConfig(M=M, T=until), times=times)


def run_coupled(
    params: Model2Params | Model3Params,
    n: int,
    until: float,
    sample_dt: float,
    rng: RngStream | int = 0,
    *,
    densities: DensityTrajectory | None = None,
    opinion_law="balanced",
    y_law="uniform",
    alpha_empirical: bool = False,
    pde_M: int = 256,
) -> CouplingTrace:
    """Run a process and its mimic on shared clocks and uniforms.

    Both sides consume the same keyed uniforms, so they differ only through
    the threshold a ringing vertex compares its uniform to (neighbour
    fraction versus adoption probability) and through the opinions feeding
    the edge probabilities.
    """
    if isinstance(params, Model1Params):
        raise ContractViolation("coupling is defined for models 2 and 3")
    if sample_dt <= 0:
        raise ContractViolation("sample_dt must be > 0")
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    if densities is None and not alpha_empirical:
        p_plus, _ = _parse_opinion_law(opinion_law)
        densities = type_law_trajectory(params, p_plus, until, M=pde_M)
    real = init(n, params, opinion_law, y_law, rng)
    mimic = init(n, params, opinion_law, y_law, rng, mimicking=True, alpha_empirical=alpha_empirical)
    n_samples = int(math.floor(until / sample_dt + 1e-9))
    times = [k * sample_dt for k in range(n_samples + 1)]
    if times[-1] < until - 1e-12:
        times.append(until)
    snaps_real, snaps_mim = [], []
    run(real, until, [snaps_real.append], times[1:])
    run_mimicking(mimic, until, densities, [snaps_mim.append], times[1:])
    d_v, d_e, mind = [], [], []
    r0 = init(n, params, opinion_law, y_law, rng).snapshot()
    m0 = init(n, params, opinion_law, y_law, rng, mimicking=True, alpha_empirical=alpha_empirical).snapshot()
    for a, b in zip([r0] + snaps_real, [m0] + snaps_mim):
        d_v.append(int(np.count_nonzero(a.opinions != b.opinions)))
        d_e.append(int(np.count_nonzero(a.adjacency != b.adjacency)) // 2)
        mind.append(int(min(a.edges.degrees().min(), b.edges.degrees().min())))
    return CouplingTrace(np.array(times), np.array(d_v), np.array(d_e), np.array(mind), n)
