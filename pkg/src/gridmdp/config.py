"""Experiment configuration files.

A configuration is one JSON document::

    {
      "price":    {"levels": [1.0, 1.25, 1.5, 1.75, 2.0], "p_up": 0.5, "p_down": 0.3},
      "device":   {"kind": "control", "num_temperature_levels": 10,
                   "energies": {"cool": 0.1, "keep": 1.0, "heat": 2.1}},
      "solver":   {"algorithm": "value_iteration", "gamma": 0.999,
                   "tol": 1e-10, "max_iter": 1000000},
      "analysis": {"initial": "uniform", "evaluate": "optimal",
                   "baseline_action": "keep",
                   "monte_carlo": {"steps": 1000000, "seed": 0, "batches": 50}},
      "output":   {"directory": "out", "tables": ["policy", "stationary", ...]}
    }

Only ``price`` and ``device`` are required. Unknown keys anywhere are
rejected. :func:`dump_config` writes the canonical form with every
default filled in, and ``parse_config(dump_config(c)) == c``.
"""

import json
from typing import Literal, Optional, Union

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .devices import BASELINE_ACTION, ACTION_NAMES, DeviceSpec
from .exceptions import GridMDPError
from .price import build_birth_death_chain

__all__ = ["ConfigError", "ExperimentConfig", "TABLES", "parse_config", "load_config", "dump_config"]

TABLES = ("policy", "stationary", "price_marginal", "machine_marginal", "demand_curve", "summary")


class ConfigError(GridMDPError, ValueError):
    """The configuration document is malformed or violates a constraint."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, strict=True)


class PriceConfig(_Strict):
    levels: list[float] = Field(min_length=1)
    p_up: float
    p_down: float

    @model_validator(mode="after")
    def _chain_is_valid(self):
        build_birth_death_chain(self.levels, self.p_up, self.p_down)
        return self

    def chain(self):
        return build_birth_death_chain(self.levels, self.p_up, self.p_down)


class DeviceConfig(_Strict):
    kind: Literal["optional", "deferrable", "control", "storage"]
    rho_on: Optional[float] = None
    rho_off: Optional[float] = None
    num_temperature_levels: Optional[int] = None
    energies: dict[str, float]
    comforts: dict[str, float] = Field(default_factory=dict)
    reward_price: Literal["current", "successor"] = "current"

    @model_validator(mode="after")
    def _spec_is_valid(self):
        self.spec()
        return self

    def spec(self):
        return DeviceSpec(
            kind=self.kind,
            rho_on=self.rho_on,
            rho_off=self.rho_off,
            energies=dict(self.energies),
            comforts=dict(self.comforts),
            num_temperature_levels=self.num_temperature_levels,
            reward_price=self.reward_price,
        )


class SolverConfig(_Strict):
    algorithm: Literal["value_iteration", "policy_iteration"] = "value_iteration"
    gamma: float = Field(0.99, gt=0.0, lt=1.0)
    tol: float = Field(1e-10, gt=0.0)
    max_iter: int = Field(1_000_000, ge=1)


class MonteCarloConfig(_Strict):
    steps: int = Field(1_000_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    batches: int = Field(50, ge=2)


class PointInitial(_Strict):
    point: tuple[int, int]


class AnalysisConfig(_Strict):
    initial: Union[Literal["uniform"], PointInitial] = "uniform"
    evaluate: Literal["optimal", "baseline"] = "optimal"
    baseline_action: Optional[str] = None
    monte_carlo: Optional[MonteCarloConfig] = None


class OutputConfig(_Strict):
    directory: str = "out"
    tables: tuple[Literal[TABLES], ...] = TABLES

    @field_validator("tables")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("tables must not repeat")
        return tuple(t for t in TABLES if t in v)


class ExperimentConfig(_Strict):
    """Validated experiment description. See the module docstring."""

    price: PriceConfig
    device: DeviceConfig
    solver: SolverConfig = SolverConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _resolve_cross_fields(self):
        actions = ACTION_NAMES[self.device.kind]
        baseline = self.analysis.baseline_action
        if baseline is None:
            analysis = self.analysis.model_copy(update={"baseline_action": BASELINE_ACTION[self.device.kind]})
            object.__setattr__(self, "analysis", analysis)
        elif baseline not in actions:
            raise ValueError(
                f"analysis.baseline_action {baseline!r} is not an action of a {self.device.kind} device "
                f"(expected one of {list(actions)})"
            )
        if isinstance(self.analysis.initial, PointInitial):
            x, c = self.analysis.initial.point
            n_machine = self.n_machine_states
            if not (0 <= x < n_machine and 0 <= c < len(self.price.levels)):
                raise ValueError(f"analysis.initial.point {[x, c]} is outside the state grid")
        return self

    @property
    def n_machine_states(self):
        kind = self.device.kind
        if kind == "control":
            return self.device.num_temperature_levels
        return 3 if kind == "storage" else 2

    def initial_distribution(self):
        n_levels = len(self.price.levels)
        n = self.n_machine_states * n_levels
        if self.analysis.initial == "uniform":
            return np.full(n, 1.0 / n)
        x, c = self.analysis.initial.point
        p = np.zeros(n)
        p[x * n_levels + c] = 1.0
        return p

    def override(self, **changes):
        """Return a re-validated copy with dotted-path fields replaced.

        ``cfg.override(**{"solver.gamma": 0.9})``
        """
        data = self.model_dump(mode="json")
        for path, value in changes.items():
            node = data
            *parents, leaf = path.split(".")
            for key in parents:
                if node.get(key) is None:
                    node[key] = {}
                node = node[key]
            node[leaf] = value
        return parse_config(data)


def _format_errors(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"] if not str(p).startswith("function-"))
        msg = e["msg"].removeprefix("Value error, ")
        lines.append(f"{loc or '<root>'}: {msg}")
    return "; ".join(lines)


def parse_config(text):
    """Parse and validate a configuration.

    Parameters
    ----------
    text : str or dict
        JSON document, or an already decoded mapping.

    Raises
    ------
    ConfigError
        With a message naming each offending field.
    """
    if isinstance(text, (str, bytes)):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
    else:
        data = text
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    try:
        # JSON has no tuples; accept lists where tuples are declared.
        return ExperimentConfig.model_validate_json(json.dumps(data))
    except pydantic.ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config):
    """Canonical JSON text of ``config`` with all defaults explicit."""
    return json.dumps(config.model_dump(mode="json"), indent=2) + "\n"
