"""Run configuration: a JSON document validated against a strict schema."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    """Malformed or invalid configuration (CLI exit code 2)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Strict):
    N: int = 2048
    L: float = 16 * math.pi

    @field_validator("N")
    @classmethod
    def _pow2(cls, v: int) -> int:
        if v < 2 or v & (v - 1):
            raise ValueError("N must be a power of two")
        return v

    @field_validator("L")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("L must be positive")
        return v


class CounterexampleSection(_Strict):
    variant: Literal["FAITHFUL", "GRID-ADAPTED"] = "GRID-ADAPTED"
    s: float = 3.0
    theta: float = math.pi / 6
    k_max: int | None = None
    delta: float | None = None
    rho: float | None = None


class SimulationSection(_Strict):
    T1: float | None = None  # None: budget rule ||u0||_{W^{1,inf}} T1 = 0.09
    steps: int = Field(192, ge=1)
    dt: float | None = None  # if given, steps = T1 / dt (must divide evenly)
    cadence: int = Field(1, ge=1)
    norm_cadence: int = Field(32, ge=1)
    tracked_k: list[int] | None = None
    epsilons: list[float] = [0.5]
    weak_sequence: dict[int, float] | None = None
    t_star_fraction: float = 0.25
    kmax_sweep: list[int] = [3, 4, 5]

    @field_validator("epsilons")
    @classmethod
    def _eps(cls, v: list) -> list:
        if any(e <= 0 for e in v):
            raise ValueError("epsilons must be positive")
        return v


class OutputSection(_Strict):
    directory: str | None = None
    formats: list[Literal["json", "csv", "svg", "lpf1"]] = ["json", "csv", "svg", "lpf1"]


class RunConfig(_Strict):
    grid: GridSection = GridSection()
    counterexample: CounterexampleSection = CounterexampleSection()
    simulation: SimulationSection = SimulationSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _dt(self) -> "RunConfig":
        sim = self.simulation
        if sim.dt is not None and sim.T1 is not None:
            n = sim.T1 / sim.dt
            if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
                raise ValueError("simulation.dt must divide simulation.T1 into whole steps")
            sim.steps = int(round(n))
        return self

    # ----------------------------------------------------------- builders
    def make_grid(self):
        from .spectral_core import make_grid

        return make_grid(self.grid.N, self.grid.L)

    def make_spec(self):
        from .counterexample import CounterexampleSpec, Variant

        c = self.counterexample
        kw = {"s": c.s, "theta": c.theta}
        for name in ("k_max", "delta", "rho"):
            if getattr(c, name) is not None:
                kw[name] = getattr(c, name)
        if c.variant == Variant.GRID_ADAPTED.value:
            return CounterexampleSpec.grid_adapted(**kw)
        return CounterexampleSpec.faithful(**kw)

    def echo(self) -> dict:
        """Fully defaulted configuration, for run metadata."""
        return json.loads(self.model_dump_json())


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            msgs.append(f"{loc}: {err['msg']}")
        raise ConfigError(f"{source}: " + "; ".join(msgs)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))
