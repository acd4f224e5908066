"""Forward equations for the type densities, and their closed-form companions.

The transport part is discretised on the ``M + 1`` nodes of the density grid.
Node ``j`` owns the dual cell of width ``w_j`` (``h/2`` at the two ends) and
fluxes are exchanged through the faces ``(j + 1/2) h``:

* ``f_plus`` moves right with speed ``1 - u``; its face flux takes the left value;
* ``f_minus`` moves left with speed ``u``; its face flux takes the right value.

No flux crosses ``u = 0`` or ``u = 1``, so the trapezoid mass is conserved to
rounding.  Time stepping is Heun's method, which keeps the densities
nonnegative under the same step bound as forward Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from covoter.core import (
    DensityField,
    DensityTrajectory,
    Model1Params,
    Model2Params,
    Model3Params,
    ModelParams,
    alpha_from_arrays,
    trapezoid_weights,
)
from covoter.errors import ConfigurationError, ContractViolation, SingularParameterError

CFL_SAFETY = 0.9


@dataclass(frozen=True)
class PdeConfig:
    """Grid size, horizon and (optional) time step of a forward solve.

    With ``dt=None`` the step is ``0.9 / (2 M + r_max)`` where ``r_max`` bounds
    the reaction rates; any explicit ``dt`` must satisfy
    ``dt * (2 M + r_max) <= 1``.
    """

    M: int = 256
    T: float = 1.0
    dt: float | None = None
    scheme: str = "conservative-upwind"

    def __post_init__(self):
        if self.M < 2:
            raise ConfigurationError("M must be >= 2")
        if self.T < 0:
            raise ConfigurationError("T must be >= 0")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError("dt must be > 0")
        if self.scheme != "conservative-upwind":
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")

    def step_bound(self, r_max: float) -> float:
        return 1.0 / (2 * self.M + r_max)

    def resolve_dt(self, r_max: float) -> float:
        bound = self.step_bound(r_max)
        if self.dt is None:
            return CFL_SAFETY * bound
        if self.dt > bound * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt:.3g} violates the stability bound {bound:.3g} for M={self.M}"
            )
        return self.dt


def _reaction_bound(params: ModelParams) -> float:
    if isinstance(params, Model1Params):
        return max(params.gamma_pm, params.gamma_mp)
    return params.beta


class _Transport:
    def __init__(self, M: int):
        h = 1.0 / M
        faces = (np.arange(M) + 0.5) * h
        self.w = trapezoid_weights(M)
        self.speed_p = 1.0 - faces
        self.speed_m = faces

    def __call__(self, fp: np.ndarray, fm: np.ndarray):
        # face fluxes; f_plus upwinds from the left, f_minus from the right
        flux_p = self.speed_p * fp[:-1]
        flux_m = -self.speed_m * fm[1:]
        dp = np.zeros_like(fp)
        dm = np.zeros_like(fm)
        dp[:-1] -= flux_p
        dp[1:] += flux_p
        dm[:-1] -= flux_m
        dm[1:] += flux_m
        return dp / self.w, dm / self.w


def _reaction(t, fp, fm, params):
    if isinstance(params, Model1Params):
        r = -params.gamma_pm * fp + params.gamma_mp * fm
        return r
    a = alpha_from_arrays(t, fp, fm, params)
    return params.beta * (a * fm - (1.0 - a) * fp)


def _rhs(t, fp, fm, params, transport):
    tp, tm = transport(fp, fm)
    r = _reaction(t, fp, fm, params)
    return tp + r, tm - r


def solve(
    init: DensityField,
    params: ModelParams,
    cfg: PdeConfig,
    times=None,
) -> DensityTrajectory:
    """Integrate the forward equations from ``init`` and return the requested slices.

    ``times`` defaults to ``[init.t, init.t + cfg.T]``.  Each output interval is
    split into equal steps no longer than the resolved ``dt`` so that every
    output time is hit exactly.
    """
    if init.M != cfg.M:
        raise ConfigurationError(f"grid mismatch: density has M={init.M}, config has M={cfg.M}")
    if abs(init.mass - 1.0) > 1e-6:
        raise ContractViolation(f"initial mass {init.mass:.8g} differs from 1")
    dt_max = cfg.resolve_dt(_reaction_bound(params))
    if times is None:
        times = [init.t, init.t + cfg.T]
    times = np.asarray(times, dtype=float)
    if times[0] != init.t or np.any(np.diff(times) <= 0):
        raise ConfigurationError("output times must start at init.t and increase")
    transport = _Transport(cfg.M)
    fp, fm = init.f_plus.copy(), init.f_minus.copy()
    slices = [init]
    t = init.t
    for t_next in times[1:]:
        steps = max(1, int(math.ceil((t_next - t) / dt_max - 1e-9)))
        h = (t_next - t) / steps
        for k in range(steps):
            ts = t + k * h
            kp, km = _rhs(ts, fp, fm, params, transport)
            p1, m1 = fp + h * kp, fm + h * km
            kp2, km2 = _rhs(ts + h, p1, m1, params, transport)
            fp = 0.5 * (fp + p1 + h * kp2)
            fm = 0.5 * (fm + m1 + h * km2)
        t = float(t_next)
        slices.append(DensityField(t, fp.copy(), fm.copy(), mass_tol=max(init.mass_tol, 1e-6)))
    return DensityTrajectory(times, slices)


def solve_model1(init: DensityField, params: Model1Params, cfg: PdeConfig, times=None) -> DensityTrajectory:
    if not isinstance(params, Model1Params):
        raise ContractViolation("solve_model1 needs Model1Params")
    return solve(init, params, cfg, times)


def solve_model2(init: DensityField, params: Model2Params, cfg: PdeConfig, times=None) -> DensityTrajectory:
    if not isinstance(params, Model2Params):
        raise ContractViolation("solve_model2 needs Model2Params")
    return solve(init, params, cfg, times)


def solve_model3(init: DensityField, params: Model3Params, cfg: PdeConfig, times=None) -> DensityTrajectory:
    if not isinstance(params, Model3Params):
        raise ContractViolation("solve_model3 needs Model3Params")
    return solve(init, params, cfg, times)


def l1_between(a: DensityField, b: DensityField) -> float:
    """Discrete L1 distance of two density pairs on a common grid."""
    if a.M != b.M:
        raise ContractViolation("grids differ")
    w = a.weights
    return float(w @ (np.abs(a.f_plus - b.f_plus) + np.abs(a.f_minus - b.f_minus)))


# ---------------------------------------------------------------------------
# Two-state generator and its exponential


def generator_N(params: Model1Params) -> np.ndarray:
    gpm, gmp = params.gamma_pm, params.gamma_mp
    return np.array([[1.0 - gpm, gmp], [gpm, 1.0 - gmp]])


def drift_M(u: float) -> np.ndarray:
    return np.array([[u - 1.0, 0.0], [0.0, u]])


def expm_N(t: float, params: Model1Params) -> np.ndarray:
    """Closed form of ``exp(N t)`` for the two-state flip generator."""
    if t < 0:
        raise ContractViolation("t must be >= 0")
    gpm, gmp = params.gamma_pm, params.gamma_mp
    g = gpm + gmp
    e = math.exp(-g * t)
    return math.exp(t) / g * np.array([[gpm * e + gmp, gmp * (1.0 - e)], [gpm * (1.0 - e), gmp * e + gpm]])


def expm_taylor(t: float, params: Model1Params, terms: int = 40) -> np.ndarray:
    """Truncated power series of ``exp(N t)``."""
    A = generator_N(params) * t
    out = np.eye(2)
    term = np.eye(2)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def plus_mass_closed_form(t, p_plus0: float, params: Model1Params):
    """Mass of ``f_plus`` under the two-state flip chain."""
    g = params.gamma_pm + params.gamma_mp
    star = params.gamma_mp / g
    return star + (p_plus0 - star) * np.exp(-g * np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# Stationary densities


def _beta_branch_nodes(a: float, b: float, M: int) -> tuple[np.ndarray, np.ndarray]:
    """``u f_B / B`` and ``(1-u) f_B / B`` at the nodes.

    At an endpoint where a branch is unbounded the node value is replaced by
    the average over its half-width dual cell.
    """
    u = np.linspace(0.0, 1.0, M + 1)
    fp_law = stats.beta(a + 1.0, b)
    fm_law = stats.beta(a, b + 1.0)
    wp, wm = a / (a + b), b / (a + b)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = wp * fp_law.pdf(u)
        fm = wm * fm_law.pdf(u)
    half = 0.5 / M
    for arr, law, wt in ((fp, fp_law, wp), (fm, fm_law, wm)):
        if not np.isfinite(arr[0]):
            arr[0] = wt * law.cdf(half) / half
        if not np.isfinite(arr[-1]):
            arr[-1] = wt * law.sf(1.0 - half) / half
    return fp, fm


def stationary_density(a: float, b: float, M: int, t: float = 0.0) -> DensityField:
    """Density pair whose sum is Beta(a, b) and whose ``+`` part is ``u`` times it."""
    if not (a > 0 and b > 0):
        raise ContractViolation("Beta shapes must be > 0")
    fp, fm = _beta_branch_nodes(a, b, M)
    mass = trapezoid_weights(M) @ (fp + fm)
    return DensityField(t, fp / mass, fm / mass, mass_tol=0.05)


def stationary_model1(params: Model1Params, M: int) -> DensityField:
    return stationary_density(params.gamma_mp, params.gamma_pm, M)


def stationary_model2(beta: float, p_plus: float, M: int) -> DensityField:
    if not 0.0 < p_plus < 1.0:
        raise ContractViolation("p_plus must lie strictly inside (0, 1)")
    return stationary_density(beta * p_plus, beta * (1.0 - p_plus), M)


def stationary_residual(field: DensityField, gamma_pm: float, gamma_mp: float) -> np.ndarray:
    """``M(u) v' + N v`` at interior nodes by centred differences, shape ``(2, M - 1)``."""
    M = field.M
    h = 1.0 / M
    u = field.grid[1:-1]
    fp, fm = field.f_plus, field.f_minus
    dp = (fp[2:] - fp[:-2]) / (2 * h)
    dm = (fm[2:] - fm[:-2]) / (2 * h)
    rp = (u - 1.0) * dp + (1.0 - gamma_pm) * fp[1:-1] + gamma_mp * fm[1:-1]
    rm = u * dm + gamma_pm * fp[1:-1] + (1.0 - gamma_mp) * fm[1:-1]
    return np.vstack((rp, rm))


def beta_mass(a: float, b: float) -> float:
    return float(special.beta(a, b))


# ---------------------------------------------------------------------------
# Power-series solution of the stationary system


def series_coefficients(params: Model1Params, f_plus_0: float, K: int) -> np.ndarray:
    """Taylor coefficients ``(f_plus_k, f_minus_k)`` for ``k = 0..K``, shape ``(K + 1, 2)``.

    Built from the two-term recursion of the stationary system; a vanishing
    denominator ``gamma_mp - 1 - k`` is reported instead of approximated.
    """
    if K < 0:
        raise ContractViolation("K must be >= 0")
    gpm, gmp = params.gamma_pm, params.gamma_mp
    out = np.empty((K + 1, 2))
    fp = float(f_plus_0)
    for k in range(K + 1):
        den = gmp - 1.0 - k
        if den == 0.0:
            raise SingularParameterError(f"recursion pole at k={k}: gamma_mp - 1 - k = 0")
        out[k, 0] = fp
        out[k, 1] = gpm * fp / den
        fp = fp * (k - gpm + 1.0 + gmp * gpm / den) / (k + 1)
    return out
