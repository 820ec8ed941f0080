"""Run configuration: defaults, TOML files and MOUSEDYN_* environment overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .ingest import DEFAULT_MAX_X, DEFAULT_MAX_Y
from .resampling import ResampleConfig, ResampleMethod

ENV_PREFIX = "MOUSEDYN_"


@dataclass
class RunConfig:
    data_root: str | None = None
    labels_path: str | None = None
    seed: int = 0
    trees: int = 100
    resample: str = "none"
    hz: float = 20.0
    output_dir: str = "out"
    scenario: str = "B"
    protocol: str = "session"
    folds: int = 10
    jobs: int = 1
    max_x: int = DEFAULT_MAX_X
    max_y: int = DEFAULT_MAX_Y
    strict_tokens: bool = True
    skip_unlabeled: bool = True
    force: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def resample_config(self) -> ResampleConfig:
        return ResampleConfig(self.hz, ResampleMethod(self.resample))

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("force")
        return d

    def digest(self) -> str:
        d = self.echo()
        d.pop("output_dir")
        d.pop("jobs")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _coerce(name, raw):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if not isinstance(raw, str):
        return raw
    if "bool" in kind:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    return raw


def load_config(path=None, env=None, **overrides) -> RunConfig:
    """Defaults, then the TOML file, then environment, then explicit overrides (non-None)."""
    env = os.environ if env is None else env
    values = {}
    names = {f.name for f in fields(RunConfig)} - {"extra"}
    if path is not None:
        with Path(path).open("rb") as fh:
            data = tomllib.load(fh)
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(data)
    for name in names:
        key = ENV_PREFIX + name.upper()
        if key in env:
            values[name] = _coerce(name, env[key])
    for name, v in overrides.items():
        if v is not None:
            values[name] = v
    return RunConfig(**values)
