"""INI experiment configs: sections [sim], [scheduler], [radio], [fl], [data].

Every key is optional except ``sim.seed``.  ``resolved_text`` writes the full
config with defaults filled in, and reading it back yields the same SimConfig.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
import typing
from pathlib import Path

from .diversity import MetricWeights
from .radio import RadioParams
from .scheduler import SchedulerConfig
from .simulator import SCHEDULERS, DataConfig, DeviceRanges, FLConfig, SimConfig

REQUIRED = {("sim", "seed")}

# keys living in [sim] besides SimConfig's scalar fields
_RANGE_KEYS = {
    "power_w_min": ("power_w", 0), "power_w_max": ("power_w", 1),
    "cpu_hz_min": ("cpu_hz", 0), "cpu_hz_max": ("cpu_hz", 1),
    "cycles_per_bit_min": ("cycles_per_bit", 0), "cycles_per_bit_max": ("cycles_per_bit", 1),
}
_SIM_SCALARS = ("seed", "num_devices", "rounds", "target_accuracy", "scheduler", "selected_fraction_cap")
_WEIGHT_KEYS = ("gamma_diversity", "gamma_size", "gamma_age")


class ConfigError(ValueError):
    pass


def _hints(cls):
    return typing.get_type_hints(cls)


def _convert(raw: str, hint, where: str):
    text = raw.strip()
    args = typing.get_args(hint)
    optional = type(None) in args
    if optional:
        if text.lower() in ("none", ""):
            return None
        hint = next(a for a in args if a is not type(None))
    try:
        if hint is bool:
            return {"true": True, "false": False}[text.lower()]
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is str:
            return text
    except (ValueError, KeyError):
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from None
    raise ConfigError(f"{where}: unsupported field type {hint}")


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _locate(text: str, section: str, key: str) -> str:
    """'line N' of a key inside a section, for diagnostics."""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return f"line {n}"
    return "?"


def _build(cls, section: str, items: dict, text: str, source: str, skip=()):
    hints = _hints(cls)
    kwargs = {}
    for key, raw in items.items():
        if key in skip:
            continue
        where = f"{source}: {_locate(text, section, key)}: {section}.{key}"
        if key not in hints:
            raise ConfigError(f"{where}: unknown key (valid: {', '.join(sorted(hints))})")
        kwargs[key] = _convert(raw, hints[key], where)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: [{section}] {exc}") from None


def parse_config(text: str, source: str = "<config>", seed_override: int | None = None) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep lambda_E etc. case-sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = {"sim", "scheduler", "radio", "fl", "data"}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"{source}: unknown section [{name}] (valid: {', '.join(sorted(known))})")
    sec = {name: dict(parser[name]) if parser.has_section(name) else {} for name in known}

    for section, key in REQUIRED:
        if key not in sec[section] and not (key == "seed" and seed_override is not None):
            raise ConfigError(f"{source}: missing required key {section}.{key}")

    scheduler = _build(SchedulerConfig, "scheduler", sec["scheduler"], text, source, skip=_WEIGHT_KEYS)
    weights = _build(MetricWeights, "scheduler", {k: v for k, v in sec["scheduler"].items() if k in _WEIGHT_KEYS}, text, source)
    radio = _build(RadioParams, "radio", sec["radio"], text, source)
    flc = _build(FLConfig, "fl", sec["fl"], text, source)
    data = _build(DataConfig, "data", sec["data"], text, source)

    ranges = {f.name: list(getattr(DeviceRanges(), f.name)) for f in dataclasses.fields(DeviceRanges)}
    sim_items = {}
    hints = _hints(SimConfig)
    for key, raw in sec["sim"].items():
        where = f"{source}: {_locate(text, 'sim', key)}: sim.{key}"
        if key in _RANGE_KEYS:
            name, i = _RANGE_KEYS[key]
            ranges[name][i] = _convert(raw, float, where)
        elif key in _SIM_SCALARS:
            sim_items[key] = _convert(raw, hints[key], where)
        else:
            valid = sorted(_SIM_SCALARS + tuple(_RANGE_KEYS))
            raise ConfigError(f"{where}: unknown key (valid: {', '.join(valid)})")
    if seed_override is not None:
        sim_items["seed"] = seed_override
    if sim_items.get("scheduler", "das") not in SCHEDULERS:
        raise ConfigError(
            f"{source}: {_locate(text, 'sim', 'scheduler')}: unknown scheduler "
            f"{sim_items['scheduler']!r} (valid: {', '.join(SCHEDULERS)})"
        )
    for name, (a, b) in ranges.items():
        if not 0 < a <= b:
            raise ConfigError(f"{source}: sim.{name}_min/max must satisfy 0 < min <= max")
    try:
        return SimConfig(
            scheduler_config=scheduler, radio=radio, fl=flc, data=data, metric_weights=weights,
            ranges=DeviceRanges(**{k: tuple(v) for k, v in ranges.items()}),
            **sim_items,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: [sim] {exc}") from None


def load_config(path, seed_override: int | None = None) -> SimConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path), seed_override)


def resolved_text(cfg: SimConfig) -> str:
    """The complete config, defaults filled in, in the same INI dialect."""
    lines = ["[sim]"]
    for key in _SIM_SCALARS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    for key, (name, i) in _RANGE_KEYS.items():
        lines.append(f"{key} = {_fmt(float(getattr(cfg.ranges, name)[i]))}")
    blocks = [
        ("scheduler", cfg.scheduler_config),
        ("radio", cfg.radio),
        ("fl", cfg.fl),
        ("data", cfg.data),
    ]
    for name, obj in blocks:
        lines += ["", f"[{name}]"]
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        if name == "scheduler":
            for key in _WEIGHT_KEYS:
                lines.append(f"{key} = {_fmt(getattr(cfg.metric_weights, key))}")
    return "\n".join(lines) + "\n"
