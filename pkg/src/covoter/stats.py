"""Observables linking simulation output to the limiting theory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from covoter.core import Opinion
from covoter.errors import ContractViolation


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if np.any(np.diff(self.edges) <= 0):
            raise ContractViolation("bin edges must increase")
        if int(self.counts.sum()) != self.total:
            raise ContractViolation("counts must sum to total")

    @property
    def bins(self) -> int:
        return self.counts.size

    @property
    def masses(self) -> np.ndarray:
        return self.counts / self.total if self.total else np.zeros(self.bins)


def histogram_of(values, bins: int) -> Histogram:
    if bins < 1:
        raise ContractViolation("bins must be >= 1")
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.minimum((v * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return Histogram(edges, counts, int(v.size))


def type_histogram(snap, bins: int, observable: str = "y") -> Histogram:
    """Equal-width histogram of ``y`` (default) or of the type ``y - exp(-t) y0``."""
    if observable == "y":
        values = snap.y
    elif observable == "type":
        values = snap.types
    else:
        raise ContractViolation(f"observable must be 'y' or 'type', got {observable!r}")
    return histogram_of(values, bins)


def beta_bin_masses(edges: np.ndarray, a: float, b: float) -> np.ndarray:
    if not (a > 0 and b > 0):
        raise ContractViolation("Beta shapes must be > 0")
    return np.diff(sps.beta.cdf(edges, a, b))


def beta_l1(h: Histogram, a: float, b: float) -> float:
    """Sum over bins of |empirical mass - Beta(a, b) mass|."""
    return float(np.abs(h.masses - beta_bin_masses(h.edges, a, b)).sum())


def consensus_time(trajectory, eps: float = 0.0):
    """First sampled time at which the minority fraction is at most ``eps``.

    ``trajectory`` holds rows ``(t, n_plus, n)``.  Returns ``None`` if never.
    """
    if not 0.0 <= eps < 0.5:
        raise ContractViolation("eps must lie in [0, 0.5)")
    rows = np.asarray(trajectory, dtype=float).reshape(-1, 3)
    for t, n_plus, n in rows:
        if min(n_plus, n - n_plus) <= eps * n:
            return float(t)
    return None


def plus_fraction(snap) -> float:
    return snap.n_plus / snap.n


def polarisation(snap) -> tuple[float, float]:
    """``(disagree_density, disagree_share)`` of the active edges."""
    adj = snap.adjacency
    if adj is None:
        raise ContractViolation("snapshot has no edges")
    n = snap.n
    plus = snap.opinions == Opinion.PLUS
    cross = int(adj[np.ix_(plus, ~plus)].sum())
    active = int(adj.sum()) // 2
    pairs = n * (n - 1) // 2
    return cross / pairs, (cross / active if active else 0.0)
