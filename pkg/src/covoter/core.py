"""Domain types, edge kernels and the opinion-adoption functional.

Opinions are coded as small integers (``Opinion.PLUS == 0``) so that sorting
by code puts ``+`` vertices first.  A vertex carries the exponentially
discounted occupation time ``y`` of opinion ``+``; its *type* is
``y - exp(-t) * y0`` and lies in ``[0, 1 - exp(-t)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

import numpy as np

from covoter.errors import ContractViolation, DegenerateKernelError

DENOM_FLOOR = 1e-12
NUMERICAL_TOL = 1e-9
MASS_TOL = 1e-3


class Opinion(IntEnum):
    PLUS = 0
    MINUS = 1

    @property
    def symbol(self) -> str:
        return "+" if self is Opinion.PLUS else "-"


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ContractViolation(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class Model1Params:
    """One-way feedback: opinions flip at fixed rates, edges follow opinions."""

    gamma_pm: float
    gamma_mp: float
    pi_p: float
    pi_m: float
    p0: float = 0.05

    def __post_init__(self):
        if not (self.gamma_pm > 0 and self.gamma_mp > 0):
            raise ContractViolation("flip rates gamma_pm, gamma_mp must be > 0")
        for name in ("pi_p", "pi_m", "p0"):
            _check_prob(name, getattr(self, name))

    @property
    def stationary_plus(self) -> float:
        return self.gamma_mp / (self.gamma_pm + self.gamma_mp)


@dataclass(frozen=True)
class Model2Params:
    """Voter dynamics on a graph whose edges follow the opinions.

    ``q_exp > 1`` gives the nonlinear variant in which a disagreeing pair is
    connected with probability ``((pi_p + pi_m) / 2) ** q_exp``.
    """

    beta: float
    pi_p: float
    pi_m: float
    p0: float = 0.05
    q_exp: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ContractViolation("beta must be > 0")
        if not self.q_exp >= 1:
            raise ContractViolation("q_exp must be >= 1")
        for name in ("pi_p", "pi_m", "p0"):
            _check_prob(name, getattr(self, name))

    @property
    def linear(self) -> bool:
        return self.q_exp == 1.0


@dataclass(frozen=True)
class Model3Params:
    """Layered model: ``q`` g-graphs and ``q`` r-graphs sharing the opinions."""

    beta: float
    q: int
    pi_p_g: float
    pi_m_g: float
    pi_p_r: float
    pi_m_r: float
    p0: float = 0.05

    def __post_init__(self):
        if not self.beta > 0:
            raise ContractViolation("beta must be > 0")
        if int(self.q) != self.q or self.q < 1:
            raise ContractViolation("q must be a positive integer")
        for name in ("pi_p_g", "pi_m_g", "pi_p_r", "pi_m_r", "p0"):
            _check_prob(name, getattr(self, name))

    @property
    def n_layers(self) -> int:
        return 2 * int(self.q)


ModelParams = Union[Model1Params, Model2Params, Model3Params]


@dataclass
class VertexState:
    opinion: Opinion
    y: float
    y0: float
    last_update: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.y <= 1.0 and 0.0 <= self.y0 <= 1.0):
            raise ContractViolation("y and y0 must lie in [0, 1]")
        if self.last_update < 0:
            raise ContractViolation("last_update must be >= 0")

    def type_at(self, t: float) -> float:
        return self.y - math.exp(-t) * self.y0


@dataclass
class EdgeSet:
    """Dense symmetric adjacency over unordered pairs, no self-loops."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractViolation("adjacency must be a square matrix")
        a = a.astype(np.uint8, copy=False)
        if np.any(np.diagonal(a)) or not np.array_equal(a, a.T):
            raise ContractViolation("adjacency must be symmetric with an empty diagonal")
        self.adjacency = a

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.adjacency.sum()) // 2

    def is_active(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1, dtype=np.int64)

    def pairs(self) -> np.ndarray:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return np.column_stack((i, j))


def advance_y(y: float, opinion: Opinion | int, dt: float) -> float:
    """Exact flow of ``y' = 1{+} - y`` over ``dt`` at a fixed opinion."""
    if dt < 0:
        raise ContractViolation(f"dt must be >= 0, got {dt}")
    if not (0.0 <= y <= 1.0):
        raise ContractViolation(f"y must lie in [0, 1], got {y}")
    decay = math.exp(-dt)
    if Opinion(opinion) is Opinion.PLUS:
        out = 1.0 - (1.0 - y) * decay
    else:
        out = y * decay
    return min(1.0, max(0.0, out))


def advance_y_array(y: np.ndarray, plus: np.ndarray, dt: np.ndarray | float) -> np.ndarray:
    """Vectorised :func:`advance_y` without contract checks."""
    decay = np.exp(-np.asarray(dt, dtype=float))
    out = np.where(plus, 1.0 - (1.0 - y) * decay, y * decay)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Densities


def trapezoid_weights(M: int) -> np.ndarray:
    w = np.full(M + 1, 1.0 / M)
    w[0] = w[-1] = 0.5 / M
    return w


@dataclass
class DensityField:
    """Grid densities ``(f_plus, f_minus)`` on ``M + 1`` equispaced nodes of [0, 1]."""

    t: float
    f_plus: np.ndarray
    f_minus: np.ndarray
    mass_tol: float = MASS_TOL
    grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.f_plus = np.asarray(self.f_plus, dtype=float)
        self.f_minus = np.asarray(self.f_minus, dtype=float)
        if self.f_plus.shape != self.f_minus.shape or self.f_plus.ndim != 1 or self.f_plus.size < 2:
            raise ContractViolation("f_plus and f_minus must be 1-d arrays of equal length >= 2")
        if min(self.f_plus.min(), self.f_minus.min()) < -NUMERICAL_TOL:
            raise ContractViolation("densities must be nonnegative")
        if not (np.all(np.isfinite(self.f_plus)) and np.all(np.isfinite(self.f_minus))):
            raise ContractViolation("densities must be finite")
        if abs(self.mass - 1.0) > self.mass_tol:
            raise ContractViolation(f"total mass {self.mass:.6g} is not 1")
        self.grid = np.linspace(0.0, 1.0, self.M + 1)

    @property
    def M(self) -> int:
        return self.f_plus.size - 1

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.M)

    @property
    def mass(self) -> float:
        w = trapezoid_weights(self.f_plus.size - 1)
        return float(w @ (self.f_plus + self.f_minus))

    @property
    def plus_mass(self) -> float:
        return float(self.weights @ self.f_plus)

    def cdf_branches(self) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative trapezoid integrals of each branch at the grid nodes."""
        h = 1.0 / self.M
        cp = np.concatenate(([0.0], np.cumsum(0.5 * h * (self.f_plus[1:] + self.f_plus[:-1]))))
        cm = np.concatenate(([0.0], np.cumsum(0.5 * h * (self.f_minus[1:] + self.f_minus[:-1]))))
        return cp, cm

    @classmethod
    def uniform(cls, M: int, p_plus: float, t: float = 0.0) -> "DensityField":
        """Opinion ``+`` w.p. ``p_plus``, value uniform on [0, 1]."""
        _check_prob("p_plus", p_plus)
        ones = np.ones(M + 1)
        return cls(t, p_plus * ones, (1.0 - p_plus) * ones)

    @classmethod
    def point_mass(cls, M: int, p_plus: float, at: float = 0.0, t: float = 0.0) -> "DensityField":
        """Point mass at ``at`` spread over the nearest node's dual cell."""
        _check_prob("p_plus", p_plus)
        if not 0.0 <= at <= 1.0:
            raise ContractViolation("point mass location must lie in [0, 1]")
        j = int(round(at * M))
        spike = np.zeros(M + 1)
        spike[j] = 1.0 / trapezoid_weights(M)[j]
        return cls(t, p_plus * spike, (1.0 - p_plus) * spike)


# ---------------------------------------------------------------------------
# Edge kernels


def _decay(t: float) -> float:
    return math.exp(-t) if math.isfinite(t) else 0.0


def _check_types(t: float, *types) -> None:
    if t < 0 or math.isnan(t):
        raise ContractViolation(f"t must be >= 0, got {t}")
    top = 1.0 - _decay(t)
    for u in types:
        arr = np.asarray(u, dtype=float)
        if np.any(arr < -NUMERICAL_TOL) or np.any(arr > top + NUMERICAL_TOL):
            raise ContractViolation(f"types must lie in [0, 1 - exp(-t)] = [0, {top:.6g}]")


def _linear_kernel(t, u, v, pi_p, pi_m, p0):
    d = _decay(t)
    top = 1.0 - d
    u = np.clip(u, 0.0, top)
    v = np.clip(v, 0.0, top)
    return d * p0 + 0.5 * (pi_p * u + pi_m * (top - u) + pi_p * v + pi_m * (top - v))


def layer_kernels(t, u, v, params: Model3Params):
    """Edge probabilities ``(H_g, H_r)`` in a single g-layer and r-layer."""
    hg = _linear_kernel(t, u, v, params.pi_p_g, params.pi_m_g, params.p0)
    hr = _linear_kernel(t, u, v, params.pi_p_r, params.pi_m_r, params.p0)
    return hg, hr


def kernel_values(t: float, u, v, params: ModelParams):
    """Edge probability between types ``u`` and ``v``, arguments clamped.

    Types outside the attainable range ``[0, 1 - exp(-t)]`` are clamped to it;
    this is the form used inside quadratures over the whole unit interval.
    """
    if isinstance(params, Model3Params):
        hg, hr = layer_kernels(t, u, v, params)
        q = int(params.q)
        return hg**q * (1.0 - hr) ** q + hr**q * (1.0 - hg) ** q
    return _linear_kernel(t, u, v, params.pi_p, params.pi_m, params.p0)


def kernel_H(t: float, u, v, params: Model1Params | Model2Params):
    """Probability that an edge between types ``u`` and ``v`` is active at ``t``."""
    if isinstance(params, Model3Params):
        raise ContractViolation("use kernel_HR for the layered model")
    _check_types(t, u, v)
    out = _linear_kernel(t, np.asarray(u, float), np.asarray(v, float), params.pi_p, params.pi_m, params.p0)
    return float(out) if np.ndim(out) == 0 else out


def kernel_HR(t: float, u, v, params: Model3Params):
    """Resulting-graph edge probability: all copies of exactly one colour active."""
    if not isinstance(params, Model3Params):
        raise ContractViolation("kernel_HR needs Model3Params")
    _check_types(t, u, v)
    out = kernel_values(t, np.asarray(u, float), np.asarray(v, float), params)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Opinion-adoption probability


def alpha_from_arrays(t: float, f_plus: np.ndarray, f_minus: np.ndarray, params: ModelParams, u=None) -> np.ndarray:
    """Unchecked core of :func:`alpha_profile` working on raw grid arrays."""
    M = f_plus.size - 1
    y = np.linspace(0.0, 1.0, M + 1)
    u = y if u is None else np.atleast_1d(np.asarray(u, dtype=float))
    w = trapezoid_weights(M)
    if isinstance(params, Model3Params):
        kern = kernel_values(t, y[None, :], u[:, None], params)
        num = kern @ (w * f_plus)
        den = kern @ (w * (f_plus + f_minus))
    else:
        d = _decay(t)
        top = 1.0 - d
        yc = np.clip(y, 0.0, top)
        uc = np.clip(u, 0.0, top)
        c = d * params.p0 + params.pi_m * top
        a = 0.5 * (params.pi_p - params.pi_m)
        mp0, mp1 = w @ f_plus, w @ (yc * f_plus)
        m0, m1 = mp0 + w @ f_minus, mp1 + w @ (yc * f_minus)
        num = (c + a * uc) * mp0 + a * mp1
        den = (c + a * uc) * m0 + a * m1
    if np.any(den < DENOM_FLOOR):
        raise DegenerateKernelError("adoption probability undefined: kernel integrates to ~0")
    return np.clip(num / den, 0.0, 1.0)


def alpha_profile(t: float, densities: DensityField, params: ModelParams, u=None) -> np.ndarray:
    """Adoption probability of ``+`` for each type in ``u`` (default: the grid).

    Trapezoid quadrature over the density grid.  For the linear kernels the
    integrals reduce to the first two moments of each branch.
    """
    return alpha_from_arrays(t, densities.f_plus, densities.f_minus, params, u)


def alpha(t: float, u: float, densities: DensityField, params: Model1Params | Model2Params) -> float:
    """Probability that a vertex of type ``u`` adopts ``+`` when its clock rings."""
    if isinstance(params, Model3Params):
        raise ContractViolation("use alpha_tilde for the layered model")
    _check_types(t, u)
    return float(alpha_profile(t, densities, params, u)[0])


def alpha_tilde(t: float, u: float, densities: DensityField, params: Model3Params) -> float:
    """:func:`alpha` with the resulting-graph kernel."""
    if not isinstance(params, Model3Params):
        raise ContractViolation("alpha_tilde needs Model3Params")
    _check_types(t, u)
    return float(alpha_profile(t, densities, params, u)[0])


# ---------------------------------------------------------------------------
# Quantiles


def _first_crossing(grid: np.ndarray, cdf: np.ndarray, level: np.ndarray) -> np.ndarray:
    k = np.searchsorted(cdf, level, side="left")
    k = np.clip(k, 0, len(grid) - 1)
    lo = np.maximum(k - 1, 0)
    c_lo, c_hi = cdf[lo], cdf[k]
    span = c_hi - c_lo
    frac = np.where(span > 0, (level - c_lo) / np.where(span > 0, span, 1.0), 1.0)
    out = np.where(k == 0, grid[0], grid[lo] + frac * (grid[k] - grid[lo]))
    return np.clip(out, 0.0, 1.0)


def quantile(densities: DensityField, y):
    """Generalised inverse of the lexicographic (``+`` first) type distribution.

    Levels up to the ``+`` mass invert the ``+`` branch; higher levels invert
    the ``-`` branch shifted by the ``+`` mass.  The trapezoid CDF is inverted
    piecewise linearly between grid nodes.
    """
    yy = np.asarray(y, dtype=float)
    if np.any(yy < 0) or np.any(yy > 1) or np.any(np.isnan(yy)):
        raise ContractViolation("quantile level must lie in [0, 1]")
    cp, cm = densities.cdf_branches()
    # rescale so that the two branches together have mass exactly one
    total = cp[-1] + cm[-1]
    cp, cm = cp / total, cm / total
    r_plus = cp[-1]
    grid = densities.grid
    flat = np.atleast_1d(yy)
    plus_part = _first_crossing(grid, cp, flat)
    minus_part = _first_crossing(grid, cm, flat - r_plus)
    # rounding in the rescale must not push the level r_plus itself into the - branch
    out = np.where(flat <= r_plus + 4 * np.finfo(float).eps, plus_part, minus_part)
    return float(out[0]) if yy.ndim == 0 else out


@dataclass
class DensityTrajectory:
    """Density slices at increasing times, as produced by the forward solvers."""

    times: np.ndarray
    slices: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.slices) != self.times.size or self.times.size == 0:
            raise ContractViolation("need one slice per time")
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("slice times must be strictly increasing")
        if len({s.M for s in self.slices}) != 1:
            raise ContractViolation("all slices must share a grid")

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, k: int) -> DensityField:
        return self.slices[k]

    @property
    def final(self) -> DensityField:
        return self.slices[-1]

    def covers(self, t0: float, t1: float) -> bool:
        return self.times[0] <= t0 + 1e-12 and self.times[-1] >= t1 - 1e-12

    def at(self, t: float) -> DensityField:
        """Slice linearly interpolated in time (stored slices returned as is)."""
        if not self.covers(t, t):
            raise ContractViolation(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), self.times.size - 1)
        if self.times[k] == t or k == self.times.size - 1:
            return self.slices[k]
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        a, b = self.slices[k], self.slices[k + 1]
        return DensityField(t, (1 - w) * a.f_plus + w * b.f_plus, (1 - w) * a.f_minus + w * b.f_minus)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.stack([s.f_plus for s in self.slices]), np.stack([s.f_minus for s in self.slices]))
