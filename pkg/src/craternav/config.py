"""Flat ``key = value`` scenario files.

Keys are exactly the :class:`ScenarioConfig` field names, with the
:class:`KppConfig` fields lifted to the top level. ``#`` starts a comment.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from .core import KppConfig
from .world import ScenarioConfig

_SECTION = "scenario"
_KPP_KEYS = tuple(f.name for f in dataclasses.fields(KppConfig))
_SCENARIO_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig) if f.name != "kpp")
KEYS = _SCENARIO_KEYS + _KPP_KEYS

_FLOAT_TUPLES = {"extent", "crater_diameters"}
_OPTIONAL = {"crater_diameters", "crater_db", "gmm_max_correction"}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


def _field_types() -> dict[str, type]:
    types = {}
    for f in dataclasses.fields(KppConfig):
        types[f.name] = float
    defaults = ScenarioConfig()
    for name in _SCENARIO_KEYS:
        value = getattr(defaults, name)
        types[name] = type(value) if value is not None else float
    types["crater_db"] = str
    return types


_TYPES = _field_types()


def _convert(key: str, text: str):
    text = text.strip()
    if key in _OPTIONAL and text.lower() in ("", "none"):
        return None
    try:
        if key in _FLOAT_TUPLES:
            values = tuple(float(v) for v in text.replace("x", ",").split(",") if v.strip())
            if key == "extent" and len(values) != 2:
                raise ValueError("extent takes two values: width, height")
            return values
        kind = _TYPES[key]
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", key) from None


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), interpolation=None,
        delimiters=("=",),
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = dict(parser.items(_SECTION))
    unknown = [k for k in values if k not in KEYS]
    if unknown:
        raise ConfigError(f"{source}: unknown config key {unknown[0]!r}", unknown[0])

    kpp = {k: _convert(k, v) for k, v in values.items() if k in _KPP_KEYS}
    scenario = {k: _convert(k, v) for k, v in values.items() if k in _SCENARIO_KEYS}
    try:
        return ScenarioConfig(kpp=KppConfig(**kpp), **scenario)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ScenarioConfig) -> str:
    """Every key, resolved, in a stable order. Re-parses to an equal config."""
    lines = []
    for key in _SCENARIO_KEYS:
        lines.append(f"{key} = {_format(getattr(cfg, key))}")
    for key in _KPP_KEYS:
        lines.append(f"{key} = {_format(getattr(cfg.kpp, key))}")
    return "\n".join(lines) + "\n"


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package (``sim400``, ``rumker``, ...)."""
    path = SCENARIO_DIR / f"{name}.cfg"
    if not path.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return path
