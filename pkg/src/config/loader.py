"""Configuration files, presets, dotted-key overrides and canonical hashing."""

import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from src.models.stochastic import (
    CallClass,
    MarkedMAP,
    Mode,
    ModelConfig,
    PhaseType,
    RetrialPH,
    TruncationPolicy,
)
from src.utils.errors import ConfigError, ValidationError

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent / "presets"
TABLE_PRESET = re.compile(r"^table-ln(?P<lambda_n>\d+(?:\.\d+)?)-mh(?P<mu_h>\d+(?:\.\d+)?)$")
TABLE_LAMBDA_N = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
TABLE_MU_H = (0.5, 0.625, 0.75, 0.875, 1.0, 1.125, 1.25)
TABLE_MU_N = 1.0

SECTIONS = ("mmap", "service_h", "service_n", "retrial", "system")
AXES = ("lambda_h", "lambda_n", "mu_h", "mu_n", "theta", "S")


def _require(section: Dict[str, Any], key: str, where: str) -> Any:
    if key not in section:
        raise ConfigError(f"missing key '{where}.{key}'")
    return section[key]


def config_from_dict(data: Dict[str, Any], name: Optional[str] = None) -> ModelConfig:
    """Build a ModelConfig from the JSON document layout."""
    for section in SECTIONS:
        if not isinstance(data.get(section), dict):
            raise ConfigError(f"missing section '{section}'")
    m = data["mmap"]
    mmap = MarkedMAP(
        _require(m, "C0", "mmap"),
        _require(m, "C_N", "mmap"),
        _require(m, "C_H", "mmap"),
        row_sum_tol=float(m.get("row_sum_tol", MarkedMAP.row_sum_tol)),
    )
    if m.get("renormalize", False):
        mmap = mmap.renormalized()
    services = {}
    for key in ("service_h", "service_n"):
        s = data[key]
        services[key] = PhaseType(_require(s, "beta", key), _require(s, "A", key))
    r = data["retrial"]
    retrial = RetrialPH(
        _require(r, "gamma", "retrial"),
        _require(r, "Gamma", "retrial"),
        _require(r, "exit_leave", "retrial"),
        _require(r, "exit_retry", "retrial"),
    )
    system = data["system"]
    trunc = system.get("truncation", {}) or {}
    try:
        policy = TruncationPolicy(**{k: trunc[k] for k in ("M", "eps", "m_cap", "m_min") if k in trunc})
        mode = Mode(system.get("mode", Mode.LUMPED.value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid system section: {exc}") from exc
    S = _require(system, "S", "system")
    if not isinstance(S, int) or isinstance(S, bool):
        raise ConfigError(f"system.S must be an integer, got {S!r}")
    return ModelConfig(
        mmap=mmap,
        service_h=services["service_h"],
        service_n=services["service_n"],
        retrial=retrial,
        S=S,
        truncation=policy,
        mode=mode,
        name=name or data.get("name", "custom"),
    )


def load_config(path: Union[str, Path]) -> ModelConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, name=data.get("name", path.stem))


def canonical_json(cfg: ModelConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ModelConfig) -> str:
    """SHA-256 of the sorted-key JSON of the resolved configuration."""
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def dump_config(cfg: ModelConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write config to {path}: {exc}") from exc
    return path


def preset_names() -> List[str]:
    names = sorted(p.stem.replace("_", "-") for p in PRESET_DIR.glob("*.json"))
    names.extend(f"table-ln{ln:g}-mh{mh:g}" for ln in TABLE_LAMBDA_N for mh in TABLE_MU_H)
    return names


def table_config(lambda_n: float, mu_h: float) -> ModelConfig:
    """Optimisation table family: baseline with mu_N = 1 and the given lambda_N, mu_H."""
    base = load_preset("baseline")
    cfg = apply_axis(base, "lambda_n", lambda_n)
    cfg = apply_axis(cfg, "mu_n", TABLE_MU_N)
    cfg = apply_axis(cfg, "mu_h", mu_h)
    return cfg.replace(name=f"table-ln{lambda_n:g}-mh{mu_h:g}")


def load_preset(name: str) -> ModelConfig:
    match = TABLE_PRESET.match(name)
    if match:
        return table_config(float(match["lambda_n"]), float(match["mu_h"]))
    path = PRESET_DIR / f"{name.replace('-', '_')}.json"
    if not path.exists():
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(preset_names()[:4])}, table-ln<x>-mh<y>")
    data = json.loads(path.read_text(encoding="utf-8"))
    return config_from_dict(data, name=name)


def apply_axis(cfg: ModelConfig, axis: str, value: float) -> ModelConfig:
    """Rescale one model component so the named rate takes ``value``."""
    if axis == "lambda_h":
        return cfg.replace(mmap=cfg.mmap.with_class_rate(CallClass.HANDOFF, float(value)))
    if axis == "lambda_n":
        return cfg.replace(mmap=cfg.mmap.with_class_rate(CallClass.NEW, float(value)))
    if axis == "mu_h":
        return cfg.replace(service_h=cfg.service_h.scaled_to_rate(float(value)))
    if axis == "mu_n":
        return cfg.replace(service_n=cfg.service_n.scaled_to_rate(float(value)))
    if axis == "theta":
        return cfg.replace(retrial=cfg.retrial.scaled_to_rate(float(value)))
    if axis == "S":
        if float(value) != int(value) or int(value) < 1:
            raise ValidationError(f"S must be a positive integer, got {value}")
        return cfg.replace(S=int(value))
    raise ConfigError(f"unknown axis '{axis}'; expected one of {', '.join(AXES)}")


DERIVED_KEYS = {
    "mmap.lambda_h": "lambda_h",
    "mmap.lambda_n": "lambda_n",
    "service_h.mu": "mu_h",
    "service_n.mu": "mu_n",
    "retrial.theta": "theta",
}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(cfg: ModelConfig, key: str, value: Any) -> ModelConfig:
    """Apply ``key=value``; rate keys rescale a component, other keys replace raw JSON entries."""
    if key in DERIVED_KEYS:
        return apply_axis(cfg, DERIVED_KEYS[key], value)
    data = cfg.to_dict()
    parts = key.split(".")
    if parts[0] not in SECTIONS:
        raise ConfigError(f"unknown override key '{key}'")
    node = data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    if parts[:2] == ["system", "truncation"] and parts[-1] == "M":
        data["system"]["truncation"] = {"M": value}
    return config_from_dict(data, name=cfg.name)


def apply_overrides(cfg: ModelConfig, overrides: Iterable[str]) -> ModelConfig:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        cfg = apply_override(cfg, key.strip(), _parse_value(raw.strip()))
        logger.debug("override %s applied", key)
    return cfg


def resolve_config(config_path: Optional[Union[str, Path]] = None, preset: Optional[str] = None,
                   overrides: Iterable[str] = (), mode: Optional[str] = None,
                   trunc_eps: Optional[float] = None, m_cap: Optional[int] = None) -> ModelConfig:
    """Exactly one source, then overrides, then the command-line truncation and mode flags."""
    if (config_path is None) == (preset is None):
        raise ConfigError("exactly one of --config or --preset is required")
    cfg = load_config(config_path) if config_path is not None else load_preset(preset)
    cfg = apply_overrides(cfg, overrides)
    if mode is not None:
        try:
            cfg = cfg.replace(mode=Mode(mode))
        except ValueError as exc:
            raise ConfigError(f"unknown mode '{mode}'") from exc
    if trunc_eps is not None or m_cap is not None:
        policy = cfg.truncation
        try:
            cfg = cfg.replace(truncation=TruncationPolicy(
                M=None,
                eps=policy.eps if trunc_eps is None else trunc_eps,
                m_cap=policy.m_cap if m_cap is None else m_cap,
                m_min=policy.m_min,
            ))
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


__all__ = [
    "AXES",
    "TABLE_LAMBDA_N",
    "TABLE_MU_H",
    "config_from_dict",
    "load_config",
    "dump_config",
    "canonical_json",
    "config_hash",
    "preset_names",
    "table_config",
    "load_preset",
    "apply_axis",
    "apply_override",
    "apply_overrides",
    "resolve_config",
]
