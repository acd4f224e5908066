"""Step graphons, reference kernels and the L1 and cut distances between them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from covoter.core import (
    DensityField,
    Model3Params,
    ModelParams,
    kernel_H,
    kernel_HR,
    quantile,
)
from covoter.errors import BudgetError, ContractViolation
from covoter.rng import RngStream

EXACT_BUDGET = 22


@dataclass
class StepGraphon:
    """Block-constant symmetric function on the unit square.

    ``signed=True`` admits values outside [0, 1], as needed for differences.
    """

    boundaries: np.ndarray
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        v = np.asarray(self.values, dtype=float)
        k = b.size - 1
        if k < 1 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ContractViolation("boundaries must increase strictly from 0 to 1")
        if v.shape != (k, k):
            raise ContractViolation(f"values must be {k}x{k}")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ContractViolation("values must be symmetric")
        if not self.signed and (v.min() < -1e-12 or v.max() > 1 + 1e-12):
            raise ContractViolation("graphon values must lie in [0, 1]")
        self.boundaries, self.values = b, v

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @classmethod
    def uniform_blocks(cls, values, signed: bool = False) -> "StepGraphon":
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, 1.0, values.shape[0] + 1), values, signed)

    @classmethod
    def constant(cls, c: float) -> "StepGraphon":
        return cls(np.array([0.0, 1.0]), np.array([[c]]), signed=not 0 <= c <= 1)

    def __call__(self, x, y):
        i = np.clip(np.searchsorted(self.boundaries, x, side="right") - 1, 0, self.k - 1)
        j = np.clip(np.searchsorted(self.boundaries, y, side="right") - 1, 0, self.k - 1)
        return self.values[i, j]

    def refine(self, boundaries: np.ndarray) -> "StepGraphon":
        """The same function on a finer partition containing ``self.boundaries``."""
        mids = 0.5 * (boundaries[1:] + boundaries[:-1])
        idx = np.searchsorted(self.boundaries, mids, side="right") - 1
        return StepGraphon(boundaries, self.values[np.ix_(idx, idx)], self.signed)

    def __sub__(self, other: "StepGraphon") -> "StepGraphon":
        a, b = common_refinement(self, other)
        return StepGraphon(a.boundaries, a.values - b.values, signed=True)

    def integral(self) -> float:
        w = self.widths
        return float(w @ self.values @ w)


def common_refinement(a: StepGraphon, b: StepGraphon) -> tuple[StepGraphon, StepGraphon]:
    if a.k == b.k and np.array_equal(a.boundaries, b.boundaries):
        return a, b
    grid = np.union1d(a.boundaries, b.boundaries)
    # merge boundaries closer than rounding so no zero-width cells appear
    keep = np.concatenate(([True], np.diff(grid) > 1e-14))
    grid = grid[keep]
    grid[-1] = 1.0
    return a.refine(grid), b.refine(grid)


def from_snapshot(snap) -> StepGraphon:
    """Empirical graphon: ``n`` equal blocks in the canonical vertex order."""
    if snap.adjacency is None:
        raise ContractViolation("snapshot has no edges")
    return StepGraphon.uniform_blocks(snap.relabelled_adjacency().astype(float))


def from_adjacency(adj: np.ndarray, permutation=None) -> StepGraphon:
    adj = np.asarray(adj)
    if permutation is not None:
        adj = adj[np.ix_(permutation, permutation)]
    return StepGraphon.uniform_blocks(adj.astype(float))


def reference(t: float, densities: DensityField, params: ModelParams, grid_k: int) -> StepGraphon:
    """Limit kernel evaluated at the quantiles of the cell centres.

    ``densities`` must describe the law of the *type* at time ``t``.  Quantiles
    are clamped into the attainable type range before the kernel is applied.
    """
    if grid_k < 1:
        raise ContractViolation("grid_k must be >= 1")
    centres = (np.arange(grid_k) + 0.5) / grid_k
    top = 1.0 - math.exp(-t)
    types = np.clip(quantile(densities, centres), 0.0, top)
    kern = kernel_HR if isinstance(params, Model3Params) else kernel_H
    vals = kern(t, types[:, None], types[None, :], params)
    vals = 0.5 * (vals + vals.T)
    return StepGraphon.uniform_blocks(np.clip(vals, 0.0, 1.0))


def l1_distance(a: StepGraphon, b: StepGraphon) -> float:
    """Exact integral of ``|a - b|`` on the common refinement."""
    a, b = common_refinement(a, b)
    w = a.widths
    return float(w @ np.abs(a.values - b.values) @ w)


# ---------------------------------------------------------------------------
# Cut norm


@nb.njit(cache=True)
def _cut_norm_gray(W):
    """max over S of max(sum of positive, -sum of negative) column sums, Gray-code order."""
    k = W.shape[0]
    col = np.zeros(k)
    best = 0.0
    inS = np.zeros(k, dtype=np.bool_)
    for step in range(1, 1 << k):
        # bit that flips between Gray codes step-1 and step
        b = 0
        s = step
        while (s & 1) == 0:
            s >>= 1
            b += 1
        if inS[b]:
            inS[b] = False
            for j in range(k):
                col[j] -= W[b, j]
        else:
            inS[b] = True
            for j in range(k):
                col[j] += W[b, j]
        pos = 0.0
        neg = 0.0
        for j in range(k):
            if col[j] > 0:
                pos += col[j]
            else:
                neg -= col[j]
        if pos > best:
            best = pos
        if neg > best:
            best = neg
    return best


def _weighted(g: StepGraphon) -> np.ndarray:
    w = g.widths
    return np.ascontiguousarray(w[:, None] * g.values * w[None, :])


def cut_norm_exact(g: StepGraphon) -> float:
    """Cut norm by enumerating unions of blocks for one side, optimising the other."""
    if g.k > EXACT_BUDGET:
        raise BudgetError(f"{g.k} blocks exceed the exact budget of {EXACT_BUDGET}; use cut_norm_lower_bound")
    return float(_cut_norm_gray(_weighted(g)))


@nb.njit(cache=True)
def _alternate(W, S, sign):
    k = W.shape[0]
    T = np.zeros(k, dtype=np.bool_)
    val = -np.inf
    while True:
        col = np.zeros(k)
        for i in range(k):
            if S[i]:
                for j in range(k):
                    col[j] += W[i, j]
        for j in range(k):
            T[j] = sign * col[j] > 0
        row = np.zeros(k)
        for i in range(k):
            for j in range(k):
                if T[j]:
                    row[i] += W[i, j]
        new = 0.0
        for i in range(k):
            S[i] = sign * row[i] > 0
            if S[i]:
                new += sign * row[i]
        if new <= val + 1e-15:
            return max(val, new)
        val = new


def cut_norm_lower_bound(g: StepGraphon, restarts: int = 32, rng: RngStream | int | None = 0) -> float:
    """Alternating maximisation over (S, T) with random starts; never exceeds the cut norm."""
    if restarts < 1:
        raise ContractViolation("restarts must be >= 1")
    W = _weighted(g)
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng or 0))
    gen = rng.generator(tag=7)
    k = g.k
    best = 0.0
    for r in range(restarts):
        start = np.ones(k, dtype=np.bool_) if r == 0 else gen.random(k) < 0.5
        for sign in (1.0, -1.0):
            best = max(best, float(_alternate(W, start.copy(), sign)))
    return best


def cut_norm(g: StepGraphon, restarts: int = 32, rng=0) -> float:
    """Exact cut norm when affordable, otherwise the alternating lower bound."""
    if g.k <= EXACT_BUDGET:
        return cut_norm_exact(g)
    return cut_norm_lower_bound(g, restarts, rng)


def cut_distance(a: StepGraphon, b: StepGraphon, restarts: int = 32, rng=0) -> float:
    return cut_norm(a - b, restarts, rng)


def block_average(g: StepGraphon, k: int) -> StepGraphon:
    """Average an equal-block graphon with ``m`` blocks onto ``k`` equal blocks (``k`` divides ``m``)."""
    m = g.k
    if m % k:
        raise ContractViolation(f"{k} does not divide {m}")
    r = m // k
    v = g.values.reshape(k, r, k, r).mean(axis=(1, 3))
    return StepGraphon.uniform_blocks(v, g.signed)
