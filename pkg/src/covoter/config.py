"""Flat ``key = value`` run configuration with per-model validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from covoter.core import Model1Params, Model2Params, Model3Params, ModelParams
from covoter.errors import ConfigurationError, ContractViolation

MODEL_KEYS = {
    "1": {"gamma_pm", "gamma_mp", "pi_p", "pi_m"},
    "2": {"beta", "pi_p", "pi_m", "q_exp"},
    "3": {"beta", "q", "pi_p_g", "pi_m_g", "pi_p_r", "pi_m_r", "mim3_p"},
}
ALL_MODEL_KEYS = set().union(*MODEL_KEYS.values())


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    Model parameters left as ``None`` take the defaults below when
    :meth:`params` is called; setting a parameter that the selected model
    does not have is an error.
    """

    model: str = "1"
    gamma_pm: float | None = None
    gamma_mp: float | None = None
    beta: float | None = None
    pi_p: float | None = None
    pi_m: float | None = None
    p0: float = 0.05
    q_exp: float | None = None
    q: int | None = None
    pi_p_g: float | None = None
    pi_m_g: float | None = None
    pi_p_r: float | None = None
    pi_m_r: float | None = None
    mim3_p: str | None = None
    n: int = 100
    T: float = 1.0
    seed: int = 0
    obs_dt: float = 0.5
    init_opinion: str = "balanced"
    init_y: str = "uniform"
    vertex_only: bool = False
    M: int = 256
    pde_init: str = "point"
    bins: int = 40
    restarts: int = 32
    graphon_a: str | None = None
    graphon_b: str | None = None
    name: str = ""
    out: str = "."

    DEFAULTS = {
        "gamma_pm": 1.5,
        "gamma_mp": 1.0,
        "beta": 0.66,
        "pi_p": 0.9,
        "pi_m": 0.1,
        "q_exp": 1.0,
        "q": 1,
        "pi_p_g": 0.9,
        "pi_m_g": 0.1,
        "pi_p_r": 0.1,
        "pi_m_r": 0.9,
        "mim3_p": "mean",
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODEL_KEYS:
            raise ConfigurationError(f"model: must be one of 1, 2, 3 (got {self.model!r})")
        for key in sorted(ALL_MODEL_KEYS - MODEL_KEYS[self.model]):
            if getattr(self, key) is not None:
                raise ConfigurationError(f"{key}: not a parameter of model {self.model}")
        if self.n < 2:
            raise ConfigurationError("n: need at least 2 vertices")
        if self.T < 0:
            raise ConfigurationError("T: must be >= 0")
        if self.obs_dt <= 0:
            raise ConfigurationError("obs_dt: must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed: must be an unsigned 64-bit integer")
        if self.vertex_only and self.model != "1":
            raise ConfigurationError("vertex_only: only valid for model 1")
        try:
            self.params()
        except ContractViolation as exc:
            raise ConfigurationError(str(exc)) from exc

    def get(self, key: str):
        v = getattr(self, key)
        return self.DEFAULTS[key] if v is None else v

    def params(self) -> ModelParams:
        g = self.get
        if self.model == "1":
            return Model1Params(g("gamma_pm"), g("gamma_mp"), g("pi_p"), g("pi_m"), self.p0)
        if self.model == "2":
            return Model2Params(g("beta"), g("pi_p"), g("pi_m"), self.p0, g("q_exp"))
        return Model3Params(g("beta"), int(g("q")), g("pi_p_g"), g("pi_m_g"), g("pi_p_r"), g("pi_m_r"), self.p0)

    @property
    def opinion_law(self):
        try:
            return float(self.init_opinion)
        except ValueError:
            return self.init_opinion

    @property
    def y_law(self):
        return "uniform" if self.init_y == "uniform" else float(self.init_y)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    def serialize(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"{key}: unknown configuration key")
    typ = str(_FIELD_TYPES[key])
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in typ:
        return None
    try:
        if typ.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ.startswith("int"):
            return int(raw, 0)
        if typ.startswith("float"):
            return float(raw)
        if key == "model":
            return str(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigurationError(f"--set {item!r}: expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = _coerce(key.strip(), value)
    return out


def build(base: dict | None = None, **overrides) -> ExperimentConfig:
    merged = dict(base or {})
    merged.update({k: v for k, v in overrides.items()})
    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigurationError(f"{sorted(unknown)[0]}: unknown configuration key")
    return ExperimentConfig(**merged)


def load(path: str | Path | None, overrides=None, **extra) -> ExperimentConfig:
    base = parse_text(Path(path).read_text()) if path else {}
    base.update(parse_overrides(overrides))
    base.update({k: v for k, v in extra.items() if v is not None})
    return build(base)


def parse(text: str) -> ExperimentConfig:
    return build(parse_text(text))
