"""Line-oriented run configuration: ``key = value`` pairs, ``#`` comments,
unknown keys rejected with the offending line number."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Optional

from .errors import ConfigError
from .model import PERIODIC, ZERO_BOUNDARY, Parameters

_START_NAMES = ("minus1", "zero", "plus1")


@dataclass
class RunConfig:
    """Validated experiment configuration (see parse_config for the format)."""

    J: float
    lam: float
    h: float
    L: int
    beta: float
    seed: int = 0
    replicas: int = 1
    max_steps: Optional[int] = None  # None: budget derived from the barrier
    start: str = "minus1"  # minus1 | zero | plus1 | snapshot file path
    target: str = "plus1"  # plus1 | minus1,plus1 | manifold:N | ...
    beta_grid: tuple[float, ...] = ()
    out_dir: str = "out"
    boundary_mode: str = ZERO_BOUNDARY
    stride: int = 100
    supercritical_threshold: Optional[int] = None

    def parameters(self, beta: Optional[float] = None) -> Parameters:
        return Parameters(
            J=self.J,
            lam=self.lam,
            h=self.h,
            L=self.L,
            beta=self.beta if beta is None else beta,
            boundary=self.boundary_mode,
        )


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    value = int(text)
    return value


def _parse_beta_grid(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(",") if part.strip())


def _parse_start(text: str) -> str:
    if text in _START_NAMES or FilePath(text).suffix:
        return text
    raise ValueError(f"start must be one of {_START_NAMES} or a snapshot path")


def _parse_boundary(text: str) -> str:
    if text not in (ZERO_BOUNDARY, PERIODIC):
        raise ValueError(f"boundary_mode must be {ZERO_BOUNDARY!r} or {PERIODIC!r}")
    return text


_KEYS = {
    "J": ("J", _parse_float),
    "lambda": ("lam", _parse_float),
    "h": ("h", _parse_float),
    "L": ("L", _parse_int),
    "beta": ("beta", _parse_float),
    "seed": ("seed", _parse_int),
    "replicas": ("replicas", _parse_int),
    "max_steps": ("max_steps", _parse_int),
    "start": ("start", _parse_start),
    "target": ("target", str),
    "beta_grid": ("beta_grid", _parse_beta_grid),
    "out_dir": ("out_dir", str),
    "boundary_mode": ("boundary_mode", _parse_boundary),
    "stride": ("stride", _parse_int),
    "supercritical_threshold": ("supercritical_threshold", _parse_int),
}

_REQUIRED = ("J", "lambda", "h", "L", "beta")


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError naming the line."""
    values: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, parser = _KEYS[key]
        try:
            values[attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    missing = [k for k in _REQUIRED if _KEYS[k][0] not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = FilePath(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _validate(cfg: RunConfig) -> None:
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if cfg.stride < 1:
        raise ConfigError("stride must be >= 1")
    if cfg.max_steps is not None and cfg.max_steps < 1:
        raise ConfigError("max_steps must be >= 1")
    if cfg.supercritical_threshold is not None and cfg.supercritical_threshold < 0:
        raise ConfigError("supercritical_threshold must be >= 0")
    if any(b2 <= b1 for b1, b2 in zip(cfg.beta_grid, cfg.beta_grid[1:])):
        raise ConfigError("beta_grid must be strictly increasing")
    if any(b <= 0 for b in cfg.beta_grid):
        raise ConfigError("beta_grid entries must be positive")
    from .dynamics import parse_targets  # deferred to avoid an import cycle

    try:
        parse_targets(cfg.target)
    except ValueError as exc:
        raise ConfigError(f"bad target: {exc}") from None
    try:
        cfg.parameters()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
