"""Strict JSON run-configuration files: a scenario plus an optional ``policy`` section.

Example::

    {
      "impostor_prior": 0.05,
      "legit_score": {"mean": -1.0, "std": 1.0},
      "impostor_score": {"mean": 1.0, "std": 1.0},
      "horizon": 5000,
      "policy": {"costs": {"c_fa": 100, "c_fr": 10, "c_ch_base": 1, "lambda": 0.5}, "beta": 0.1}
    }

Unknown keys anywhere are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import typing
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .domain import ConfigError, CostParameters
from .policy import PolicyConfig
from .simulator import Scenario

# file key -> attribute name
_ALIASES = {CostParameters: {"lambda": "lam"}}


def _field_aliases(cls) -> Dict[str, str]:
    return _ALIASES.get(cls, {})


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    if origin is Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin in (dict, Mapping, typing.Mapping) or tp in (dict, Mapping):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object", field=path)
        _, vt = typing.get_args(tp) or (str, Any)
        return {str(k): _coerce(vt, v, _join(path, str(k))) for k, v in value.items()}
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value)
        except ValueError:
            choices = ", ".join(str(m.value) for m in tp)
            raise ConfigError(f"{path}: {value!r} is not one of {choices}", field=path) from None
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false", field=path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"{path}: expected an integer", field=path)
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number", field=path)
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite", field=path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string", field=path)
        return value
    return value


def _build(cls, data, path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'document'}: expected an object", field=path or None)
    hints = typing.get_type_hints(cls)
    aliases = _field_aliases(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in data.items():
        attr = aliases.get(key, key)
        if attr not in names or (key not in aliases and key in aliases.values()):
            raise ConfigError(f"unknown key {_join(path, key)!r}", field=_join(path, key))
        kwargs[attr] = _coerce(hints[attr], value, _join(path, key))
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        field = _join(path, exc.field) if exc.field else path
        raise ConfigError(f"{field}: {exc}", field=field) from None
    except TypeError as exc:
        # missing required fields
        raise ConfigError(f"{path or 'document'}: {exc}", field=path or None) from None


def _read_document(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def parse_scenario(doc: Mapping) -> Scenario:
    body = {k: v for k, v in doc.items() if k != "policy"}
    return _build(Scenario, body)


def parse_policy(doc: Mapping) -> PolicyConfig:
    if "policy" not in doc:
        raise ConfigError("missing 'policy' section", field="policy")
    return _build(PolicyConfig, doc["policy"], "policy")


def load_scenario(path) -> Scenario:
    return parse_scenario(_read_document(path))


def load_policy_config(path) -> PolicyConfig:
    return parse_policy(_read_document(path))


def load_run_config(path) -> Tuple[Scenario, PolicyConfig]:
    doc = _read_document(path)
    return parse_scenario(doc), parse_policy(doc)


def to_document(obj) -> Any:
    """Plain JSON value for a config dataclass tree, using file key names."""
    if dataclasses.is_dataclass(obj):
        rename = {v: k for k, v in _field_aliases(type(obj)).items()}
        return {rename.get(f.name, f.name): to_document(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): to_document(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_document(v) for v in obj]
    return obj


def dump_run_config(path, scenario: Scenario, policy: Optional[PolicyConfig] = None) -> None:
    doc = to_document(scenario)
    if policy is not None:
        doc["policy"] = to_document(policy)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
