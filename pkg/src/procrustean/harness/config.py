"""Experiment specification, loaded from a flat JSON document."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError
from ..model import NOISE_KINDS, DEFAULT_BOUNDS, odd_k
from ..spectral import CUTOFF_TABLE, cutoff, table_cutoff

LAMBDA_POLICIES = ("table", "cutoff")
SCORE_TARGETS = ("section", "raw")


@dataclass(frozen=True)
class ExperimentSpec:
    k_grid: tuple = (20, 50, 100, 1000, 3000)
    J_grid: tuple = (10, 100, 500)
    noise_kinds: tuple = NOISE_KINDS
    noise_scale: float = 1.0  # multiplies every noise draw; 0 gives noiseless cells
    repetitions: int = 30
    lambda_policy: str = "table"
    lambda_table: dict | None = None  # defaults to the published cutoffs
    smoothness: float = 1.5  # s in cutoff(k, s)
    truth_bounds: tuple = DEFAULT_BOUNDS  # half-widths (A/2, Abar/2, B)
    estimator_box: tuple = (1.0, math.pi / 4)  # (A, Abar)
    seed: int = 0
    parallelism: int = 1
    record_runtime: bool = False
    score_against: str = "section"
    curve_variant: str = "literal"
    max_iter: int = 2000
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("k_grid", "J_grid", "noise_kinds", "truth_bounds", "estimator_box"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.lambda_table is not None:
            object.__setattr__(self, "lambda_table", {int(n): int(v) for n, v in dict(self.lambda_table).items()})
        self.validate()

    def validate(self) -> None:
        if not self.k_grid or not self.J_grid or not self.noise_kinds:
            raise ConfigError("k_grid, J_grid and noise_kinds must be non-empty")
        if any(int(k) != k or k < 3 for k in self.k_grid):
            raise ConfigError("every k must be an integer >= 3")
        if any(int(J) != J or J < 2 for J in self.J_grid):
            raise ConfigError("every J must be an integer >= 2")
        bad = set(self.noise_kinds) - set(NOISE_KINDS)
        if bad:
            raise ConfigError(f"unknown noise kinds {sorted(bad)}")
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ConfigError("repetitions must be a positive integer")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ConfigError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if self.smoothness < 1.5:
            raise ConfigError("smoothness must be at least 1.5")
        if len(self.truth_bounds) != 3 or min(self.truth_bounds) < 0:
            raise ConfigError("truth_bounds must be three non-negative half-widths")
        if len(self.estimator_box) != 2 or not self.estimator_box[0] > 0 or not 0 < self.estimator_box[1] < math.pi:
            raise ConfigError("estimator_box must be (A > 0, 0 < Abar < pi)")
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale must be non-negative")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.score_against not in SCORE_TARGETS:
            raise ConfigError(f"score_against must be one of {SCORE_TARGETS}")
        if self.curve_variant not in ("literal", "cos10pit"):
            raise ConfigError("curve_variant must be 'literal' or 'cos10pit'")

    # -- derived values -----------------------------------------------------

    @property
    def k_mapping(self) -> dict:
        """Requested k -> odd k actually simulated."""
        return {int(k): odd_k(int(k)) for k in self.k_grid}

    @property
    def odd_k_grid(self) -> tuple:
        return tuple(sorted(set(self.k_mapping.values())))

    def cell_lambda(self, k: int) -> int:
        if self.lambda_policy == "cutoff":
            return cutoff(k, self.smoothness)
        return table_cutoff(k, self.lambda_table or CUTOFF_TABLE)

    @property
    def error_metric(self) -> str:
        return "mse_section" if self.score_against == "section" else "mse_raw"

    # -- (de)serialization --------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for name, value in out.items():
            if isinstance(value, tuple):
                out[name] = list(value)
        if self.lambda_table is not None:
            out["lambda_table"] = {str(n): v for n, v in self.lambda_table.items()}
        return out

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


__all__ = ["ExperimentSpec", "LAMBDA_POLICIES", "SCORE_TARGETS"]
