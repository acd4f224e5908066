"""Counter-based keyed random numbers.

Every variate is a pure function of ``(seed, kind, entity, counter)``, hashed
through the splitmix64 finaliser.  Two processes that ask for the same key get
the same number, which is what the coupled runs rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

# stream kinds
VTIME = 1
VPICK = 2
VDEC = 3
ETIME = 4
EPICK_I = 5
EPICK_J = 6
ELAYER = 7
EDEC = 8
INIT_OP = 9
INIT_Y = 10
INIT_EDGE = 11

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_KIND = np.uint64(0xD1B54A32D192ED03)
_K_ENT = np.uint64(0x8CB92BA72F3D8DD7)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def key_uniform(seed, kind, entity, counter):
    """Uniform variate in the open interval (0, 1) for the given key."""
    z = _mix(np.uint64(seed) ^ (np.uint64(kind) * _K_KIND))
    z = _mix(z ^ (np.uint64(entity) * _K_ENT))
    z = _mix(z ^ np.uint64(counter))
    return (np.float64(z >> _S11) + 0.5) * _INV53


@nb.njit(cache=True)
def key_uniform_array(seed, kind, entities, counter):
    out = np.empty(entities.size)
    for k in range(entities.size):
        out[k] = key_uniform(seed, kind, entities[k], counter)
    return out


@dataclass(frozen=True)
class RngStream:
    """Keyed uniform source bound to one 64-bit seed."""

    seed: int

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")

    def uniform(self, kind: int, entity: int, counter: int) -> float:
        return float(key_uniform(np.uint64(self.seed), kind, entity, counter))

    def uniforms(self, kind: int, entities, counter: int = 0) -> np.ndarray:
        ents = np.ascontiguousarray(entities, dtype=np.int64)
        return key_uniform_array(np.uint64(self.seed), kind, ents, counter)

    def generator(self, tag: int = 0) -> np.random.Generator:
        """An ordinary numpy generator derived from the seed, for non-coupled work."""
        return np.random.default_rng([int(self.seed) & 0xFFFFFFFF, int(self.seed) >> 32, tag])
