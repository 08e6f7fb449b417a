"""Experiment configuration: one JSON document per run, schema version 1."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .operators import CATALOG
from .verify import SUITES

SCHEMA_VERSION = 1
RUN_TYPES = ("picard", "schu", "center", "gate", "suite")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field path, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpaceConfig(_Strict):
    dimension: int = Field(32, ge=1)
    p_exp: float = Field(2.0, ge=1.0)


class OperatorConfig(_Strict):
    name: str
    params: dict = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in CATALOG:
            raise ValueError(f"unknown operator {v!r}; known: {', '.join(sorted(CATALOG))}")
        return v


class OutputConfig(_Strict):
    path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    full: bool = False


class StepsConfig(_Strict):
    kind: Literal["constant", "summable"] = "constant"
    gamma: float = Field(0.5, gt=0.0, lt=1.0)
    c: float = Field(1.0, gt=0.0)
    b: float = Field(0.5, gt=0.0, lt=1.0)


class SolverConfig(_Strict):
    step0: Optional[float] = Field(None, gt=0.0)
    iters: int = Field(5000, ge=1)
    tol: float = Field(1e-9, gt=0.0)


class PicardParams(_Strict):
    q0: Optional[list[float]] = None
    tol: float = Field(1e-8, gt=0.0)
    max_iter: int = Field(1000, ge=1, le=100_000)
    stop_at_tol: bool = True


class SchuParams(PicardParams):
    max_iter: int = Field(500, ge=1, le=1000)
    steps: StepsConfig = Field(default_factory=StepsConfig)


class CenterParams(_Strict):
    q0: Optional[list[float]] = None
    burn_in: int = Field(8, ge=0)
    window: int = Field(32, ge=1)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    domain: Optional[dict] = None
    r: Optional[float] = Field(None, gt=0.0)


class SuiteParams(_Strict):
    name: str
    dim: int = Field(8, ge=1, le=4096)
    samples: int = Field(1000, ge=1)
    seeds: Optional[list[int]] = None
    candidates: list[list[float]] = Field(default_factory=lambda: [[0.5], [1.0]])
    ns: list[int] = Field(default_factory=lambda: list(range(1, 9)))
    ms: list[int] = Field(default_factory=lambda: [2, 3, 4, 8])
    q0: Optional[list[float]] = None
    tol: float = Field(1e-8, gt=0.0)
    max_iter: int = Field(500, ge=1, le=1000)
    scheme: Literal["picard", "schu"] = "picard"
    steps: StepsConfig = Field(default_factory=StepsConfig)

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in SUITES:
            raise ValueError(f"unknown suite {v!r}; known: {', '.join(sorted(SUITES))}")
        return v

    @field_validator("ns", "ms")
    @classmethod
    def _positive(cls, v: list[int]) -> list[int]:
        if not v or any(k < 1 for k in v):
            raise ValueError("entries must be positive integers")
        return v


RunParams = Union[PicardParams, SchuParams, CenterParams, SuiteParams]
_PARAMS = {"picard": PicardParams, "schu": SchuParams, "center": CenterParams,
           "gate": CenterParams, "suite": SuiteParams}


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = Field(alias="schema")
    space: SpaceConfig = Field(default_factory=SpaceConfig)
    operator: OperatorConfig
    run: Literal["picard", "schu", "center", "gate", "suite"]
    run_params: dict = Field(default_factory=dict)
    seed: int = 0
    output: OutputConfig = Field(default_factory=OutputConfig)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def params(self) -> RunParams:
        return _PARAMS[self.run].model_validate(self.run_params)


def _errors(exc: ValidationError, prefix: str = "") -> list[tuple[str, str]]:
    out = []
    for e in exc.errors():
        path = ".".join(str(p) for p in e["loc"])
        out.append((f"{prefix}{path}" if path else prefix.rstrip(".") or "<root>", e["msg"]))
    return out


def parse_config(data: dict) -> tuple[ExperimentConfig, RunParams]:
    """Validate a config document; raises :class:`ConfigError` with field paths."""
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_errors(exc)) from None
    try:
        params = cfg.params()
    except ValidationError as exc:
        raise ConfigError(_errors(exc, "run_params.")) from None
    return cfg, params


def load_config(path: Union[str, Path]) -> tuple[ExperimentConfig, RunParams]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([("<file>", str(exc))]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([("<json>", str(exc))]) from None
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    return parse_config(data)
