"""Run configuration: a flat INI-style document with four sections.

```
[model]
n = 8
delta = 1
j1 = -0.1

[engine]
engine = auto
dt = 0.05

[protocol]
window = 50

[output]
csv = run.csv
```

Every key is optional except ``model.n``. Parsing collects every violation
before raising, so one run of ``parse_config`` reports the whole document.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .model import ModelParams
from .protocol import DEFAULT_SAMPLE_DT, DEFAULT_WINDOW, EngineConfig

SECTIONS = ("model", "engine", "protocol", "output")


@dataclass(frozen=True)
class ProtocolSettings:
    window: float | None = DEFAULT_WINDOW
    sample_dt: float = DEFAULT_SAMPLE_DT
    grid: tuple = ()
    kt_grid: tuple = ()
    allow_zero: bool = False
    workers: int = 1
    tolerance: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class OutputSettings:
    csv: str | None = None
    record: str | None = None


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    engine: EngineConfig = field(default_factory=EngineConfig)
    protocol: ProtocolSettings = field(default_factory=ProtocolSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def to_dict(self) -> dict:
        return {
            "model": {"n": self.model.N, "delta": self.model.Delta, "j1": self.model.J1, "j": self.model.J},
            "engine": asdict(self.engine),
            "protocol": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.protocol).items()},
            "output": asdict(self.output),
        }


def parse_grid(text) -> tuple:
    """``"8:24:4"`` (inclusive range) or ``"-0.3, -0.1, 0.2"``."""
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid needs start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"range grid {text!r} is empty or has a non-positive step")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(round(start + k * step, 12)) for k in range(count))
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _as_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _as_int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _optional(conv):
    def inner(text):
        return None if str(text).strip().lower() in ("", "none", "auto") else conv(text)

    return inner


# key -> (target attribute, converter)
SCHEMA = {
    "model": {"n": ("N", _as_int), "delta": ("Delta", float), "j1": ("J1", float), "j": ("J", float)},
    "engine": {
        "engine": ("engine", str),
        "dt": ("dt", float),
        "m": ("m", _as_int),
        "weight_floor": ("weight_floor", float),
        "krylov_tol": ("krylov_tol", float),
        "ed_cap": ("ed_cap", _as_int),
        "density_cap": ("density_cap", _as_int),
        "auto_exact_max": ("auto_exact_max", _as_int),
        "ground_method": ("ground_method", str),
        "discarded_ceiling": ("discarded_ceiling", float),
        "bloch_tol": ("bloch_tol", float),
    },
    "protocol": {
        "window": ("window", _optional(float)),
        "sample_dt": ("sample_dt", float),
        "grid": ("grid", parse_grid),
        "kt_grid": ("kt_grid", parse_grid),
        "allow_zero": ("allow_zero", _as_bool),
        "workers": ("workers", _as_int),
        "tolerance": ("tolerance", float),
        "seed": ("seed", _as_int),
    },
    "output": {"csv": ("csv", _optional(str)), "record": ("record", _optional(str))},
}


def _syntax_error(exc) -> ConfigError:
    line = getattr(exc, "lineno", None)
    if isinstance(exc, configparser.ParsingError) and exc.errors:
        line = exc.errors[0][0]
    where = f"line {line}: " if line else ""
    if isinstance(exc, configparser.DuplicateOptionError):
        msg = f"{where}duplicate key {exc.section}.{exc.option}"
    elif isinstance(exc, configparser.DuplicateSectionError):
        msg = f"{where}duplicate section [{exc.section}]"
    elif isinstance(exc, configparser.MissingSectionHeaderError):
        msg = f"{where}key outside any section"
    else:
        msg = f"{where}{exc.message if hasattr(exc, 'message') else exc}"
    return ConfigError(f"syntax error: {msg}", [msg])


def _read(text) -> dict:
    parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise _syntax_error(exc) from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def validate_values(model: dict, engine: dict, protocol: dict, output: dict, violations: list):
    """Semantic checks with field paths; appends to ``violations``."""

    def bad(path, msg):
        violations.append(f"{path}: {msg}")

    if "N" not in model:
        bad("model.n", "required")
    elif model["N"] < 2:
        bad("model.n", f"must be >= 2, got {model['N']}")
    for key in ("Delta", "J1", "J"):
        if key in model and not np.isfinite(model[key]):
            bad(f"model.{key.lower()}", "must be finite")
    if model.get("J", 1.0) == 0:
        bad("model.j", "must be nonzero")
    if engine.get("engine", "auto") not in ("exact", "mps", "auto"):
        bad("engine.engine", f"must be exact, mps or auto, got {engine['engine']!r}")
    if engine.get("ground_method", "dmrg") not in ("dmrg", "imaginary"):
        bad("engine.ground_method", f"must be dmrg or imaginary, got {engine['ground_method']!r}")
    for key in ("dt", "krylov_tol", "bloch_tol"):
        if key in engine and not engine[key] > 0:
            bad(f"engine.{key}", "must be positive")
    for key in ("m", "ed_cap", "density_cap"):
        if key in engine and engine[key] < 1:
            bad(f"engine.{key}", "must be >= 1")
    if engine.get("weight_floor", 0.0) < 0:
        bad("engine.weight_floor", "must be >= 0")
    if protocol.get("window") is not None and not protocol["window"] > 0:
        bad("protocol.window", "must be positive")
    if "sample_dt" in protocol and not protocol["sample_dt"] > 0:
        bad("protocol.sample_dt", "must be positive")
    if protocol.get("workers", 1) < 1:
        bad("protocol.workers", "must be >= 1")
    if protocol.get("tolerance", 1.0) <= 0:
        bad("protocol.tolerance", "must be positive")
    if any(not k > 0 for k in protocol.get("kt_grid", ())):
        bad("protocol.kt_grid", "temperatures must be positive")
    dt = engine.get("dt", EngineConfig.dt)
    sample_dt = protocol.get("sample_dt", DEFAULT_SAMPLE_DT)
    if dt > 0 and sample_dt > 0 and abs(sample_dt / dt - round(sample_dt / dt)) > 1e-9:
        bad("protocol.sample_dt", f"must be a multiple of engine.dt={dt}")


def build_config(model: dict, engine: dict, protocol: dict, output: dict, violations: list | None = None) -> RunConfig:
    violations = [] if violations is None else violations
    validate_values(model, engine, protocol, output, violations)
    if violations:
        raise ConfigError(f"{len(violations)} configuration error(s): " + "; ".join(violations), violations)
    try:
        return RunConfig(
            model=ModelParams(**model),
            engine=EngineConfig(**engine),
            protocol=ProtocolSettings(**protocol),
            output=OutputSettings(**output),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Validate a configuration document; raises :class:`ConfigError` listing all violations."""
    raw = _read(text)
    violations = []
    values = {s: {} for s in SECTIONS}
    for section, items in raw.items():
        if section not in SCHEMA:
            violations.append(f"[{section}]: unknown section")
            continue
        for key, text_value in items.items():
            if key not in SCHEMA[section]:
                violations.append(f"{section}.{key}: unknown key")
                continue
            attr, conv = SCHEMA[section][key]
            try:
                values[section][attr] = conv(text_value)
            except ValueError as exc:
                violations.append(f"{section}.{key}: {exc}")
    return build_config(values["model"], values["engine"], values["protocol"], values["output"], violations)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_overrides(config: RunConfig | None, overrides: dict) -> RunConfig:
    """Apply ``{"section.key": value}`` overrides (already typed) and revalidate."""
    base = {
        "model": {} if config is None else {"N": config.model.N, "Delta": config.model.Delta,
                                            "J1": config.model.J1, "J": config.model.J},
        "engine": {} if config is None else asdict(config.engine),
        "protocol": {} if config is None else asdict(config.protocol),
        "output": {} if config is None else asdict(config.output),
    }
    for path, value in overrides.items():
        if value is None:
            continue
        section, key = path.split(".")
        attr, _ = SCHEMA[section][key]
        base[section][attr] = value
    return build_config(base["model"], base["engine"], base["protocol"], base["output"])


__all__ = [
    "OutputSettings",
    "ProtocolSettings",
    "RunConfig",
    "build_config",
    "load_config",
    "parse_config",
    "parse_grid",
    "with_overrides",
]
