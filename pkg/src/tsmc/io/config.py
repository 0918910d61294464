"""Run configuration and manifests.

Configs come from three layers: documented per-command defaults, a plain
key=value file, and CLI overrides, later layers winning.  Every run emits a
manifest (config echo, input hash, trace, results, timings) so a result file
can always be traced back to the exact inputs that produced it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields

from tsmc.engine import SmcConfig

__all__ = [
    "COALESCENT_COMMAND",
    "ConfigError",
    "GMM_COMMAND",
    "RunConfig",
    "RunManifest",
    "content_hash",
    "make_manifest",
    "manifest_from_json",
    "manifest_to_json",
    "parse_config",
    "serialise_config",
    "smc_config",
]

GMM_COMMAND = "gmm-evidence"
COALESCENT_COMMAND = "coalescent-online"


class ConfigError(ValueError):
    """Bad configuration or input data; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    data_path: str
    output_dir: str = "."
    particle_count: int = 500
    resample_threshold: float = 0.5
    cess_target: float = 0.99
    seed: int = 0
    deterministic: bool = True
    # gmm-evidence only
    t_max: int = 4
    move: str = "split"
    mode: str = "marginal"
    # coalescent-online only
    lineage_power: float = 1.0
    height_kind: str = "laplace"
    ordering: str = "nearest"
    spr_moves: int = 20

    def __post_init__(self):
        if self.command not in (GMM_COMMAND, COALESCENT_COMMAND):
            raise ConfigError(f"command must be {GMM_COMMAND}|{COALESCENT_COMMAND}")
        if not self.data_path:
            raise ConfigError("data_path missing")
        if self.particle_count < 1:
            raise ConfigError("particle_count out of range")
        if not 0.0 < self.resample_threshold < 1.0:
            raise ConfigError("resample_threshold out of range")
        if not 0.0 < self.cess_target < 1.0:
            raise ConfigError("cess_target out of range")
        if self.seed < 0:
            raise ConfigError("seed out of range")
        if self.t_max < 1:
            raise ConfigError("t_max out of range")
        if self.move not in ("birth", "split"):
            raise ConfigError("move must be birth|split")
        if self.mode not in ("conditional", "marginal"):
            raise ConfigError("mode must be conditional|marginal")
        if self.lineage_power not in (0.0, 1.0, 2.0, 4.0):
            raise ConfigError("lineage_power must be one of 0|1|2|4")
        if self.height_kind not in ("laplace", "exp1"):
            raise ConfigError("height_kind must be laplace|exp1")
        if self.ordering not in ("nearest", "furthest"):
            raise ConfigError("ordering must be nearest|furthest")
        if self.spr_moves < 0:
            raise ConfigError("spr_moves out of range")


# Defaults that differ between the two commands.
_COMMAND_DEFAULTS = {
    GMM_COMMAND: {"particle_count": 500, "cess_target": 0.99},
    COALESCENT_COMMAND: {"particle_count": 250, "cess_target": 0.95},
}

_BOOL_WORDS = {"true": True, "false": False}


def _coerce(name: str, kind: type, value):
    if not isinstance(value, str):
        return value
    try:
        if kind is bool:
            return _BOOL_WORDS[value.lower()]
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
    except (KeyError, ValueError):
        want = {bool: "true|false", int: "an integer", float: "a number"}[kind]
        raise ConfigError(f"{name} must be {want}, got '{value}'") from None
    return value


def parse_config(text: str = "", overrides: dict | None = None, *, command: str | None = None) -> RunConfig:
    """Layer file values under CLI overrides over per-command defaults."""
    known = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")
        values[key] = value
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")
        if value is not None:
            values[key] = value

    cmd = values.get("command", command)
    if cmd is None:
        raise ConfigError("command missing")
    merged = dict(_COMMAND_DEFAULTS.get(cmd, {}))
    merged.update(values)
    merged["command"] = cmd

    types = {"int": int, "float": float, "bool": bool, "str": str}
    kwargs = {}
    for f in fields(RunConfig):
        if f.name in merged:
            kind = types.get(f.type, str) if isinstance(f.type, str) else f.type
            kwargs[f.name] = _coerce(f.name, kind, merged[f.name])
    if "data_path" not in kwargs:
        raise ConfigError("data_path missing")
    return RunConfig(**kwargs)


def serialise_config(config: RunConfig) -> str:
    """key=value lines; floats via repr so parsing reproduces them exactly."""
    out = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        out.append(f"{f.name}={value}")
    return "\n".join(out) + "\n"


def smc_config(config: RunConfig) -> SmcConfig:
    return SmcConfig(
        particle_count=config.particle_count,
        resample_threshold=config.resample_threshold,
        cess_target=config.cess_target,
        seed=config.seed,
        deterministic_reduction=config.deterministic,
    )


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to audit a run; written even when the run fails."""

    config: RunConfig
    input_sha256: str
    trace: tuple
    results: tuple
    wall_seconds: float
    error: str | None = None


def _clean(value):
    """json-safe copy; NaN becomes None so round trips compare equal."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return tuple(_clean(v) for v in value)
    return value


def make_manifest(config, input_sha256, trace, results, wall_seconds, error=None) -> RunManifest:
    return RunManifest(
        config=config,
        input_sha256=input_sha256,
        trace=_clean(tuple(trace)),
        results=_clean(tuple(results)),
        wall_seconds=float(wall_seconds),
        error=error,
    )


def manifest_to_json(manifest: RunManifest) -> str:
    payload = {
        "config": asdict(manifest.config),
        "input_sha256": manifest.input_sha256,
        "trace": list(manifest.trace),
        "results": list(manifest.results),
        "wall_seconds": manifest.wall_seconds,
        "error": manifest.error,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> RunManifest:
    payload = json.loads(text)
    return RunManifest(
        config=RunConfig(**payload["config"]),
        input_sha256=payload["input_sha256"],
        trace=tuple(payload["trace"]),
        results=tuple(payload["results"]),
        wall_seconds=payload["wall_seconds"],
        error=payload["error"],
    )


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
