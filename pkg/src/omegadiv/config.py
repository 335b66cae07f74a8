"""Run configuration: a single JSON document validated with pydantic."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, OmegaDivError
from .levy import LevyModel
from .montecarlo import SimConfig
from .omega import BankruptcyRate, Segment


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_Strict):
    mu: float
    sigma: float = Field(ge=0)
    jump_intensity: float = Field(0.0, ge=0)
    jump_mixture: list[tuple[float, float]] = []

    def build(self):
        return LevyModel(self.mu, self.sigma, self.jump_intensity, tuple(self.jump_mixture))


class SegmentSpec(_Strict):
    start: float
    end: float
    value: float
    slope: float = 0.0


class OmegaSpec(_Strict):
    """Either explicit ``segments`` or the single-piece shorthand ``slope``."""

    a: float = Field(le=0)
    phi: float = Field(gt=0)
    slope: float | None = None
    segments: list[SegmentSpec] | None = None

    def build(self):
        if self.segments is not None:
            if self.slope is not None:
                raise ValueError("give either slope or segments, not both")
            return BankruptcyRate(self.a, self.phi, tuple(Segment(**s.model_dump()) for s in self.segments))
        return BankruptcyRate.linear(self.a, self.phi, self.slope or 0.0)


class GridSpec(_Strict):
    h: float = Field(1e-3, gt=0)
    x_max: float = Field(10.0, gt=0)


class SimulationSpec(_Strict):
    n_paths: int = Field(100_000, ge=1)
    dt: float = Field(1e-3, gt=0)
    t_max: float | None = None
    seed: int = 12345
    workers: int = Field(1, ge=1)
    weight_floor: float = Field(1e-6, gt=0, lt=1)
    x0: list[float] | None = None

    def build(self, mode):
        return SimConfig(self.n_paths, self.dt, self.t_max, self.seed, mode, self.weight_floor, self.workers)


class VerificationSpec(_Strict):
    num_pairs: int = Field(100_000, ge=1)
    seed: int = 0


class RunConfig(_Strict):
    model: ModelSpec
    omega: OmegaSpec
    q: float = Field(gt=0)
    beta: float = Field(gt=0)
    grid: GridSpec = GridSpec()
    simulation: SimulationSpec | None = None
    verification: VerificationSpec = VerificationSpec()
    sweep_betas: list[float] | None = None
    residual_tol: float = Field(1e-8, gt=0)
    output_dir: str = "out"

    @model_validator(mode="after")
    def _revalidate(self):
        # module-level invariants (mixture sums, monotone omega, ...)
        try:
            self.model.build()
            self.omega.build()
        except OmegaDivError as exc:
            raise ValueError(str(exc)) from exc
        if self.sweep_betas is not None and any(b <= 0 for b in self.sweep_betas):
            raise ValueError("sweep betas must be > 0")
        return self

    def levy_model(self):
        return self.model.build()

    def bankruptcy_rate(self):
        return self.omega.build()

    def config_hash(self):
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path, overrides=None):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw, overrides)


def parse_config(raw, overrides=None):
    raw = json.loads(json.dumps(raw))
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[leaf] = val
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


EXAMPLE_CONFIG = {
    "model": {"mu": 0.075, "sigma": 0.5, "jump_intensity": 0.5, "jump_mixture": [[1.0, 9.0]]},
    "omega": {"a": -1.0, "phi": 1.5, "slope": -0.15},
    "q": 0.025,
    "beta": 0.001,
    "grid": {"h": 1e-3, "x_max": 10.0},
}
