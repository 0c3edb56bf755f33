"""Run configuration: solver tolerances, resolutions, thresholds and plane strategy."""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .projection import PlaneStrategy

ENV_VAR = "GEODESICA_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Settings threaded through every per-cell run.

    ``None`` for ``mesh_target_edge``, ``lb_threshold`` or ``tol_pos`` picks a
    size-relative default: 1/24 of the projected domain's longer side, 1e-2
    over the patch diameter, and 1e-6 of the net's bounding-box diagonal.
    ``allow_unconverged`` keeps going with the least-squares height field
    when the Monge-Ampere solve does not converge, instead of failing the cell.
    """

    mesh_target_edge: Optional[float] = None
    grid_n: int = 65
    tol_ma: float = 1e-8
    lb_threshold: Optional[float] = None
    tol_pos: Optional[float] = None
    tol_angle: float = 0.1
    plane_strategy: PlaneStrategy = PlaneStrategy.VECTOR_AREA
    max_split_depth: int = 3
    output_dir: str = "geodesica_out"
    branch: str = "up"
    max_newton: int = 50
    allow_unconverged: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "plane_strategy", PlaneStrategy(self.plane_strategy))
        except ValueError:
            raise ConfigError(f"unknown plane_strategy {self.plane_strategy!r}") from None
        for name in ("mesh_target_edge", "lb_threshold", "tol_pos"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("tol_ma", "tol_angle"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if int(self.grid_n) != self.grid_n or self.grid_n < 9:
            raise ConfigError("grid_n must be an integer >= 9")
        if not 0 <= self.max_split_depth <= 3:
            raise ConfigError("max_split_depth must be between 0 and 3")
        if self.branch not in ("up", "down", "harmonic"):
            raise ConfigError("branch must be 'up', 'down' or 'harmonic'")
        if self.max_newton < 1:
            raise ConfigError("max_newton must be at least 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["plane_strategy"] = self.plane_strategy.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_config(path=None) -> RunConfig:
    """Config from ``path``, else from $GEODESICA_CONFIG, else the defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(data)
