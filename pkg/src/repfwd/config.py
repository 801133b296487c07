"""Experiment configuration files (TOML) with strict validation.

Unknown keys anywhere in the file are rejected, and every value is checked
against the model's parameter ranges before anything runs.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .abm import SimConfig
from .game import ConfigError, GameParams, LinkBreakMatrix


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsSection(_Strict):
    b: float
    c: float
    p_e: float = 0.0
    mu: float = 0.0
    beta: float = 10.0
    omega: float = 0.02
    L: int = 4
    N: int = 500


class LinksSection(_Strict):
    # all six are mandatory, k33 included
    k11: float
    k12: float
    k13: float
    k22: float
    k23: float
    k33: float


class SimulationSection(_Strict):
    mode: Literal["uss", "ss"] = "ss"
    x0: List[float] = Field(default_factory=lambda: [0.1, 0.6, 0.3])
    uss_rounds: int = Field(1000, gt=0)
    ss_steps: int = Field(2_000_000, gt=0)
    uss_sample_every: Optional[int] = Field(None, gt=0)
    ss_sample_every: Optional[int] = Field(None, gt=0)
    replicates: int = Field(20, ge=1)
    revision_rate: float = Field(0.05, ge=0)
    burn_in: float = 0.1
    window: float = 0.1

    @field_validator("x0")
    @classmethod
    def _three(cls, v):
        if len(v) != 3:
            raise ValueError("x0 needs three components")
        return v


class PhaseSection(_Strict):
    resolution: int = Field(40, ge=10)
    dt: float = Field(0.01, gt=0)
    t_max: float = Field(2000.0, gt=0)
    vertex_tol: float = Field(1e-3, gt=0)
    trajectories: List[List[float]] = Field(default_factory=lambda: [[0.1, 0.6, 0.3]])


class SweepSection(_Strict):
    p_e: List[float] = Field(default_factory=list)
    mu: List[float] = Field(default_factory=list)


class ValidateSection(_Strict):
    ode_b: float = Field(3.0, gt=0)
    ode_c: float = Field(2.0, gt=0)
    ode_x0: List[float] = Field(default_factory=lambda: [0.1, 0.6, 0.3])


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "out"
    params: ParamsSection
    links: LinksSection
    simulation: SimulationSection = SimulationSection()
    phase: PhaseSection = PhaseSection()
    sweep: SweepSection = SweepSection()
    validation: ValidateSection = ValidateSection()

    # ---- derived objects; constructing them runs the model-level checks

    def game_params(self, **changes) -> GameParams:
        return GameParams(**{**self.params.model_dump(), **changes})

    def link_matrix(self) -> LinkBreakMatrix:
        return LinkBreakMatrix(**self.links.model_dump())

    def sweep_points(self) -> list[tuple[float, float]]:
        """(p_e, mu) pairs: each axis varied with the other at its base value."""
        base_pe, base_mu = self.params.p_e, self.params.mu
        pts = [(pe, base_mu) for pe in self.sweep.p_e] + [(base_pe, m) for m in self.sweep.mu]
        if not pts:
            pts = [(base_pe, base_mu)]
        seen, out = set(), []
        for pt in pts:
            if pt not in seen:
                seen.add(pt)
                out.append(pt)
        return out

    def sim_config(self, mode: Optional[str] = None, **param_changes) -> SimConfig:
        sim = self.simulation
        mode = mode or sim.mode
        steps = sim.uss_rounds if mode == "uss" else sim.ss_steps
        every = sim.uss_sample_every if mode == "uss" else sim.ss_sample_every
        return SimConfig(
            params=self.game_params(**param_changes),
            k=self.link_matrix(),
            mode=mode,
            x0=tuple(sim.x0),
            steps=steps,
            replicates=sim.replicates,
            seed=self.seed,
            sample_every=every,
            revision_rate=sim.revision_rate,
            burn_in=sim.burn_in,
            window=sim.window,
        )

    def check(self) -> "ExperimentConfig":
        """Validate every derived object, including each sweep point."""
        self.link_matrix()
        for pe, mu in self.sweep_points():
            self.game_params(p_e=pe, mu=mu)
        self.sim_config("uss")
        self.sim_config("ss")
        self.game_params(b=self.validation.ode_b, c=self.validation.ode_c)
        for x in [*self.phase.trajectories, self.validation.ode_x0]:
            if len(x) != 3 or min(x) < 0 or abs(sum(x) - 1.0) > 1e-9:
                raise ConfigError(f"trajectory start {x} is not on the simplex")
        return self

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _flatten_errors(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def from_dict(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_flatten_errors(err)) from None
    return cfg.check()


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file; raises ConfigError on any problem."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    return from_dict(data)


REFERENCE = {
    "name": "reference",
    "seed": 2024,
    "params": {"b": 4.0, "c": 2.0, "p_e": 0.01, "mu": 0.1, "beta": 10.0, "omega": 0.02, "L": 4, "N": 500},
    "links": {"k11": 0.05, "k12": 0.25, "k13": 0.3, "k22": 0.25, "k23": 0.95, "k33": 0.95},
}


def reference_config() -> ExperimentConfig:
    return from_dict(REFERENCE)
