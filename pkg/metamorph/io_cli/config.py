"""Run configuration: defaults, environment, key=value files and CLI overrides."""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field, ValidationInfo, field_validator, model_validator

from metamorph.geodesic import SolverConfig
from metamorph.io_cli.images import ChannelMode
from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

# flat CLI-style keys -> dotted location in RunConfig
FLAT_KEYS: Dict[str, str] = {
    "image-a": "image_a",
    "image-b": "image_b",
    "seg-a": "seg_a",
    "seg-b": "seg_b",
    "out": "out",
    "mode": "mode",
    "frames": "frames",
    "dump-raw": "dump_raw",
    "levels": "solver.levels",
    "threshold": "solver.threshold",
    "sigma2": "solver.sigma2",
    "max-sweeps": "solver.max_sweeps",
    "workers": "solver.workers",
    "model": "solver.material.kind",
    "lambda": "solver.material.lam",
    "mu": "solver.material.mu",
    "gamma": "solver.material.gamma",
    "delta": "solver.material.delta",
    "q": "solver.material.q",
    "r": "solver.material.r",
    "s": "solver.material.s",
    "m": "solver.material.m",
    "identity-offset": "solver.material.identity_offset",
    "weights": "solver.material.channel_weights",
}

SECTIONS: Dict[str, str] = {
    "run": "",
    "solver": "solver",
    "energy": "solver.material",
    "registration": "solver.registration",
    "cg": "solver.cg",
}

RENAMES = {"lambda": "lam", "model": "kind", "weights": "channel_weights"}

LIST_KEYS = {"solver.material.channel_weights"}


class RunConfig(BaseModel):
    """Everything a `run` needs: inputs, outputs and the solver configuration."""
    image_a: Path
    image_b: Path
    seg_a: Optional[Path] = None
    seg_b: Optional[Path] = None
    out: Path = Path("out")
    mode: ChannelMode = ChannelMode.GRAY
    frames: int = Field(0, ge=0, description="number of interpolated frames, 0 = none")
    dump_raw: bool = False
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("image_a", "image_b", "seg_a", "seg_b")
    @classmethod
    def readable(cls, v: Optional[Path], info: ValidationInfo) -> Optional[Path]:
        if v is None or (info.context or {}).get("skip_path_check"):
            return v
        if not v.is_file():
            raise ValueError(f"{v} is not a readable file")
        return v

    @model_validator(mode="after")
    def consistent(self) -> "RunConfig":
        if (self.seg_a is None) != (self.seg_b is None):
            raise ValueError("seg-a and seg-b must be given together")
        K = 2 ** self.solver.levels
        if self.frames and self.frames < K + 1:
            raise ValueError(f"frames must be at least K+1 = {K + 1} when requested, got {self.frames}")
        weights = self.solver.material.channel_weights
        if weights is not None and len(weights) != self.channels:
            raise ValueError(f"{len(weights)} channel weights given for {self.channels} channels")
        return self

    @property
    def image_channels(self) -> int:
        return self.mode.channels

    @property
    def has_segmentation(self) -> bool:
        return self.seg_a is not None

    @property
    def channels(self) -> int:
        return self.image_channels + (1 if self.has_segmentation else 0)


def resolve_key(key: str) -> str:
    """Map a flat or dotted config key to its dotted RunConfig location."""
    key = key.strip().lower()
    if "." not in key:
        if key not in FLAT_KEYS:
            raise InvalidInputError(f"Unknown configuration key '{key}'")
        return FLAT_KEYS[key]
    section, name = key.split(".", 1)
    if section not in SECTIONS:
        raise InvalidInputError(f"Unknown configuration section '{section}'")
    name = RENAMES.get(name, name).replace("-", "_")
    prefix = SECTIONS[section]
    return f"{prefix}.{name}" if prefix else name


def parse_config_file(path: Path) -> Dict[str, str]:
    """
    Read key=value lines; blank lines and '#' comments are skipped.

    Returns:
        Mapping of dotted RunConfig locations to raw string values
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"Cannot read config file {path}: {exc}") from exc

    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{number}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        values[resolve_key(key)] = value.strip()
    logger.debug(f"Read {len(values)} settings from {path}")
    return values


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    for part in parts[:-1]:
        target = target.setdefault(part, {})
    if dotted in LIST_KEYS and isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    target[parts[-1]] = value


def build_run_config(file_values: Optional[Dict[str, Any]] = None,
                     cli_values: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Merge settings with precedence defaults < environment < config file < CLI.

    Environment defaults enter through the model's default factories.

    Args:
        file_values: Dotted locations from parse_config_file
        cli_values: Dotted locations of flags given on the command line (None entries are ignored)

    Returns:
        The validated RunConfig
    """
    merged: Dict[str, Any] = {}
    for source in (file_values or {}, cli_values or {}):
        for dotted, value in source.items():
            if value is not None:
                _set_dotted(merged, dotted, value)
    return RunConfig.model_validate(merged)
