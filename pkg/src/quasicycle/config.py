"""Experiment configuration: a flat ``key = value`` text format.

Every key is optional. Lists are comma separated, booleans are
``true``/``false`` and ``none`` clears an optional value. Lines starting with
``#`` are comments. :func:`echo_config` writes a file that parses back to an
equal config, floats included.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError

__all__ = ["NetworkConfig", "DEFAULT_SWEEP", "load_config", "parse_config", "echo_config"]

DRIFT_MODES = ("real_time", "lambda_scaled")
AMPLITUDE_VARIANTS = ("difference", "ratio", "other_only", "cosine_factor", "none")
COUPLING_KINDS = ("all_to_all", "explicit")

# 0 plus 12 log-spaced coupling norms from 1 to 2e4
DEFAULT_SWEEP = (0.0,) + tuple(float(x) for x in np.geomspace(1.0, 2e4, 12))


@dataclass(frozen=True)
class NetworkConfig:
    n: int = 100
    n_values: tuple = (2, 10, 66, 100)
    coupling_kind: str = "all_to_all"
    coupling_norm: float = 4950.0
    coupling_matrix: Optional[str] = None
    amplitude_variant: str = "difference"
    ratio_factor: bool = True
    coupling_norm_values: tuple = DEFAULT_SWEEP
    omega_mean: float = 437.72
    omega_sd: float = 1.0
    clip_sds: float = 3.0
    dt: float = 5e-5
    n_steps: int = 10000
    burn_in: int = 5000
    realizations: int = 10
    seed: int = 0
    amplitude_rescale: float = 703.5
    epsilon_floor: float = 1e-4
    drift_time_scaling: str = "real_time"
    explosion_threshold: Optional[float] = None
    snapshot_times: tuple = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.45)
    snapshot_window: float = 5e-3
    single_duration: float = 4.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if any(k < 1 for k in self.n_values):
            raise ConfigError("every entry of n_values must be >= 1")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 <= self.burn_in < self.n_steps:
            raise ConfigError(
                f"burn_in must satisfy 0 <= burn_in < n_steps ({self.burn_in}, {self.n_steps})"
            )
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.omega_sd < 0 or self.clip_sds <= 0:
            raise ConfigError("omega_sd must be >= 0 and clip_sds > 0")
        if not self.epsilon_floor > 0:
            raise ConfigError("epsilon_floor must be > 0")
        if self.coupling_norm < 0 or any(c < 0 for c in self.coupling_norm_values):
            raise ConfigError("coupling norms must be >= 0")
        for name, value, allowed in (
            ("drift_time_scaling", self.drift_time_scaling, DRIFT_MODES),
            ("amplitude_variant", self.amplitude_variant, AMPLITUDE_VARIANTS),
            ("coupling_kind", self.coupling_kind, COUPLING_KINDS),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
        if self.coupling_kind == "explicit" and not self.coupling_matrix:
            raise ConfigError("coupling_kind = explicit needs coupling_matrix = <csv path>")

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def coupling_spec(self, n: Optional[int] = None, norm: Optional[float] = None):
        """CouplingSpec for ``n`` oscillators at 2-norm ``norm`` (defaults from config)."""
        from .network import CouplingSpec

        n = self.n if n is None else n
        norm = self.coupling_norm if norm is None else norm
        opts = dict(ratio_factor=self.ratio_factor, amplitude_variant=self.amplitude_variant)
        if self.coupling_kind == "explicit":
            matrix = np.loadtxt(self.coupling_matrix, delimiter=",", ndmin=2)
            if matrix.shape != (n, n):
                raise ConfigError(f"coupling matrix has shape {matrix.shape}, expected ({n}, {n})")
            return CouplingSpec.explicit(matrix, **opts)
        return CouplingSpec.from_norm(norm, n, **opts)


def _field_types():
    return {f.name: f for f in fields(NetworkConfig)}


def _parse_scalar(name, raw, default):
    text = raw.strip()
    if text.lower() == "none":
        return None
    if isinstance(default, bool):
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"{name}: expected true/false, got {raw!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None and name == "explosion_threshold":
        return float(text)
    return text


def _parse_value(name, raw):
    f = _field_types()[name]
    default = f.default
    try:
        if isinstance(default, tuple):
            items = [s for s in raw.split(",") if s.strip()]
            elem = default[0] if default else 0.0
            return tuple(_parse_scalar(name, s, elem) for s in items)
        return _parse_scalar(name, raw, default)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} ({exc})") from None


def parse_config(text: str, base: Optional[NetworkConfig] = None) -> NetworkConfig:
    known = _field_types()
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        changes[key] = _parse_value(key, value)
    return dataclasses.replace(base or NetworkConfig(), **changes)


def load_config(path) -> NetworkConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, str):
        return value
    return repr(value)


def echo_config(cfg: NetworkConfig, extra: Optional[dict] = None) -> str:
    """Config text that reproduces ``cfg`` exactly; ``extra`` goes in comments."""
    lines = ["# quasicycle run configuration"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
