"""Experiment configuration files (JSON)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from ..core import Domain

PROCESSES = ("poisson", "ginibre_finite", "ginibre_infinite", "bessel", "gaf", "rnm_mcmc")
TOP_KEYS = {"process", "params", "domain", "trials", "seed", "transport", "smoothing", "output"}
TRANSPORT_KEYS = {"resolution"}
SMOOTHING_KEYS = {"lambda_max", "t_lo", "t_hi", "c"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TransportSettings:
    resolution: int = 128


@dataclass(frozen=True)
class SmoothingSettings:
    lambda_max: Optional[float] = None
    t_lo: float = 1e-5
    t_hi: float = 1.0
    c: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    process: str
    params: tuple
    domain: object
    trials: int
    seed: int
    transport: TransportSettings = TransportSettings()
    smoothing: SmoothingSettings = SmoothingSettings()
    output: str = "records.csv"

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ConfigError(f"unknown process {self.process!r}; expected one of {', '.join(PROCESSES)}")
        params = tuple(float(p) if not float(p).is_integer() else int(p) for p in self.params)
        if not params:
            raise ConfigError("params must be non-empty")
        if any(b <= a for a, b in zip(params, params[1:])):
            raise ConfigError("params must be strictly increasing")
        if any(p <= 0 for p in params):
            raise ConfigError("params must be positive")
        object.__setattr__(self, "params", params)
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        if int(self.transport.resolution) < 2:
            raise ConfigError("transport.resolution must be at least 2")
        sm = self.smoothing
        if not 0 < sm.t_lo < sm.t_hi:
            raise ConfigError("smoothing needs 0 < t_lo < t_hi")
        if not sm.c > 0:
            raise ConfigError("smoothing.c must be positive")
        if sm.lambda_max is not None and sm.lambda_max <= 0:
            raise ConfigError("smoothing.lambda_max must be positive or null")
        try:
            self.domain_object()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad domain: {exc}") from exc

    def domain_object(self) -> Domain:
        return Domain.from_spec(self.domain)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = list(self.params)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        keys = set(raw)
        if keys != TOP_KEYS:
            missing, extra = sorted(TOP_KEYS - keys), sorted(keys - TOP_KEYS)
            raise ConfigError(f"config keys mismatch (missing {missing}, unexpected {extra})")
        tr, sm = raw["transport"], raw["smoothing"]
        if not isinstance(tr, dict) or set(tr) != TRANSPORT_KEYS:
            raise ConfigError("transport must have exactly the key 'resolution'")
        if not isinstance(sm, dict) or set(sm) != SMOOTHING_KEYS:
            raise ConfigError("smoothing must have exactly the keys lambda_max, t_lo, t_hi, c")
        if not isinstance(raw["params"], list):
            raise ConfigError("params must be a list")
        return cls(
            process=raw["process"],
            params=tuple(raw["params"]),
            domain=raw["domain"],
            trials=int(raw["trials"]),
            seed=int(raw["seed"]),
            transport=TransportSettings(int(tr["resolution"])),
            smoothing=SmoothingSettings(
                None if sm["lambda_max"] is None else float(sm["lambda_max"]),
                float(sm["t_lo"]), float(sm["t_hi"]), float(sm["c"])),
            output=str(raw["output"]),
        )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    cfg = ExperimentConfig.from_dict(raw)
    out = Path(cfg.output)
    if not out.is_absolute():
        # relative output paths are resolved against the config file
        cfg = ExperimentConfig(**{**cfg.__dict__, "output": str(Path(path).parent / out)})
    return cfg
