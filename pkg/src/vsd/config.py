"""Strict JSON experiment configuration."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "load_preset",
    "preset_names",
    "source_function",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExponentCfg(_Strict):
    a0: float
    slope: float = 0.0


class BetaCfg(_Strict):
    """beta(t) = t^p."""

    p: float = Field(0.0, ge=0.0)


class ModesSource(_Strict):
    """constant + sum amp * sin(n pi x) sin(m pi y)."""

    kind: Literal["modes"]
    constant: float = 0.0
    modes: list[tuple[int, int, float]] = []


class Disc(_Strict):
    center: tuple[float, float]
    radius: float = Field(gt=0.0)
    height: float


class DiscsSource(_Strict):
    """Sum of indicator functions of closed discs."""

    kind: Literal["discs"]
    background: float = 0.0
    discs: list[Disc]


SourceCfg = Annotated[Union[ModesSource, DiscsSource], Field(discriminator="kind")]


class ObservationCfg(_Strict):
    box: tuple[float, float, float, float] = (0.3, 0.7, 0.3, 0.7)


class NoiseCfg(_Strict):
    delta: float = Field(ge=0.0)
    seed: int = 0


class AlgorithmCfg(_Strict):
    kind: Literal["thresholding", "tpg"]
    A: float = Field(30.0, gt=0.0)
    eps: Optional[float] = Field(None, ge=0.0)
    rho: float = Field(2e-4, gt=0.0)
    kappa: float = Field(1.0, gt=0.0)
    tau: float = Field(1.05, gt=1.0)
    gamma0_bar: float = Field(1.0, gt=0.0)
    gamma1_bar: float = Field(100.0, gt=0.0)
    lambda_shift: float = Field(5.0, gt=0.0, description="lambda_n = n / (n + lambda_shift)")
    max_outer: int = Field(500, ge=1)
    pdhg_iters: int = Field(200, ge=1)


class NumericsCfg(_Strict):
    solver: Literal["direct", "cg"] = "direct"
    adjoint: Literal["continuous", "discrete"] = "continuous"
    norm: Literal["euclidean", "l2"] = "euclidean"
    data_refinement: int = Field(2, ge=1, description="data grid has N * data_refinement cells")
    data_time_refinement: int = Field(2, ge=1)


class OracleCfg(_Strict):
    M: int = Field(40, ge=1)
    Nt_fine: int = Field(4000, ge=10)


class ExperimentConfig(_Strict):
    name: str
    exponent: ExponentCfg
    T: float = Field(1.0, gt=0.0)
    N: int = Field(50, ge=4)
    Nt: int = Field(100, ge=1)
    beta: BetaCfg = BetaCfg()
    source: SourceCfg
    initial_guess: Optional[SourceCfg] = None
    observation: ObservationCfg = ObservationCfg()
    noise: NoiseCfg
    algorithm: AlgorithmCfg
    numerics: NumericsCfg = NumericsCfg()
    oracle: OracleCfg = OracleCfg()
    output: str = "out"
    trajectory_stride: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _check(self):
        x0, x1, y0, y1 = self.observation.box
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError("observation.box must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1")
        a_end = self.exponent.a0 + self.exponent.slope * self.T
        if not (0.0 < self.exponent.a0 < 1.0 and 0.0 < a_end < 1.0):
            raise ValueError("exponent: alpha(t) must stay in (0, 1) on [0, T]")
        return self

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(err: ValidationError, origin: str) -> str:
    lines = [f"invalid configuration {origin}:"]
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {path}: {e['msg']}")
    return "\n".join(lines)


def _validate(data, origin: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err, origin)) from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; unknown keys are rejected."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from None
    return _validate(data, str(path))


def preset_names() -> list[str]:
    root = resources.files("vsd") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    """Bundled configuration by name (``ex1a``, ``ex1b``, ``ex2a``, ``ex2b``)."""
    res = resources.files("vsd") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return _validate(json.loads(res.read_text()), f"preset {name}")


def source_function(src):
    """Vectorised f(x, y) for a source configuration."""
    if isinstance(src, ModesSource):

        def f(x, y):
            out = np.full(np.broadcast(x, y).shape, src.constant, dtype=float)
            for n, m, amp in src.modes:
                out = out + amp * np.sin(n * np.pi * x) * np.sin(m * np.pi * y)
            return out

        return f

    def f(x, y):
        out = np.full(np.broadcast(x, y).shape, src.background, dtype=float)
        for d in src.discs:
            cx, cy = d.center
            inside = (x - cx) ** 2 + (y - cy) ** 2 <= d.radius**2
            out = out + d.height * inside
        return out

    return f
