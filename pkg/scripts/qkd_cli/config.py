"""
YAML configuration with strict units.

Every dimensional value is a string "<number> <unit>" checked against the
field's dimension; a bare number or a unit of the wrong kind is rejected
with the dotted path of the field. Dimensionless fields are plain numbers.
Sections and keys not listed in SCHEMA are errors.

Example:
    source:
      rep_rate: 62.5 MHz
      bin_width: 1 ns
      n_bins: 3
    channel:
      length: 30 km
      attenuation: 0.2 dB/km
    attack:
      kind: ir
      intercept_fraction: 1.0
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from scripts.qkd.analytics import ConstantShrinking, SecureRateParams, ShrinkingModel, TabulatedShrinking
from scripts.qkd.attacks import BsAttackConfig, IrAttackConfig
from scripts.qkd.errors import ConfigurationError
from scripts.qkd.protocol import GuardBandPolicy, SessionConfig

logger = logging.getLogger(__name__)

# Unit -> factor to the field's canonical unit
UNITS: dict[str, dict[str, float]] = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "length": {"m": 1e-3, "km": 1.0},
    "attenuation": {"dB/km": 1.0},
    "loss": {"dB": 1.0},
    "count_rate": {"Hz": 1.0, "cps": 1.0, "/s": 1.0, "kHz": 1e3, "kcps": 1e3},
}

# Canonical unit written back into manifests
CANONICAL_UNIT = {
    "time": "s",
    "frequency": "Hz",
    "length": "km",
    "attenuation": "dB/km",
    "loss": "dB",
    "count_rate": "Hz",
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))\s*(\S+)\s*$")
# YAML 1.1 reads exponent forms without a dot ("1e-9") as strings
_FLOAT = re.compile(r"^\s*[-+]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*$")


def parse_quantity(value: Any, dimension: str, path: str) -> float:
    """Parse "<number> <unit>" into the canonical unit of ``dimension``.

    Raises:
        ConfigurationError: If the value is not a string quantity or the unit
            does not belong to ``dimension``.
    """
    if not isinstance(value, str):
        raise ConfigurationError(
            f"expected a quantity with a {dimension} unit (e.g. '1 {CANONICAL_UNIT[dimension]}'), got {value!r}",
            path,
        )
    match = _QUANTITY.match(value)
    if match is None:
        raise ConfigurationError(f"cannot parse quantity {value!r}", path)
    number, unit = match.groups()
    factors = UNITS[dimension]
    if unit not in factors:
        raise ConfigurationError(
            f"unit {unit!r} is not a {dimension} unit ({', '.join(factors)})", path
        )
    # Decimal product so "42 ps" == 42e-12 exactly
    return float(Decimal(number) * Decimal(repr(factors[unit])))


def format_quantity(value: float, dimension: str) -> str:
    return f"{value!r} {CANONICAL_UNIT[dimension]}"


def _number(value: Any, path: str) -> float:
    if isinstance(value, str) and _FLOAT.match(value):
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a plain number, got {value!r}", path)
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"expected an integer, got {value!r}", path)
    return value


def _boolean(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"expected true or false, got {value!r}", path)
    return value


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigurationError(f"expected a string, got {value!r}", path)
    return value


def _phase_pattern(value: Any, path: str) -> tuple[int, ...]:
    # Differential phases as 0 / pi entries
    if not isinstance(value, list):
        raise ConfigurationError(f"expected a list of phase differences, got {value!r}", path)
    bits = []
    for entry in value:
        text = str(entry).strip().lower()
        if text in ("0", "0.0"):
            bits.append(0)
        elif text in ("pi", "π") or (isinstance(entry, float) and entry == math.pi):
            bits.append(1)
        else:
            raise ConfigurationError(f"phase difference {entry!r} is not 0 or pi", path)
    return tuple(bits)


def _shrinking_table(value: Any, path: str) -> dict[int, tuple[tuple[float, ...], tuple[float, ...]]]:
    if not isinstance(value, dict):
        raise ConfigurationError("expected a mapping n_bins -> {errors: [...], tau: [...]}", path)
    table = {}
    for n, entry in value.items():
        sub = f"{path}.{n}"
        if not isinstance(entry, dict) or set(entry) != {"errors", "tau"}:
            raise ConfigurationError("expected keys 'errors' and 'tau'", sub)
        errors = tuple(_number(e, sub + ".errors") for e in entry["errors"])
        taus = tuple(_number(t, sub + ".tau") for t in entry["tau"])
        if len(errors) != len(taus) or not errors:
            raise ConfigurationError("'errors' and 'tau' must be non-empty and of equal length", sub)
        table[_integer(n, sub)] = (errors, taus)
    return table


@dataclass(frozen=True)
class Field:
    """One configuration key: YAML name, parser and target attribute."""

    key: str
    target: str
    parse: Callable[[Any, str], Any]
    dimension: str | None = None


def _q(key: str, target: str, dimension: str) -> Field:
    return Field(key, target, lambda v, p: parse_quantity(v, dimension, p), dimension)


SCHEMA: dict[str, tuple[Field, ...]] = {
    "source": (
        Field("mean_photon_number", "mean_photon_number", _number),
        _q("rep_rate", "rep_rate", "frequency"),
        Field("n_bins", "n_bins", _integer),
        _q("bin_width", "bin_width", "time"),
        _q("extinction_ratio", "extinction_ratio_db", "loss"),
        _q("rise_time", "rise_time", "time"),
        Field("spatial_paths", "spatial_paths", _boolean),
    ),
    "channel": (
        _q("length", "length_km", "length"),
        _q("attenuation", "attenuation_db_per_km", "attenuation"),
        _q("insertion_loss", "insertion_loss_db", "loss"),
    ),
    "dli": (Field("visibility", "dli_visibility", _number),),
    "detector": (
        Field("efficiency", "efficiency", _number),
        _q("dark_count_rate", "dark_count_rate", "count_rate"),
        Field("afterpulse_prob", "afterpulse_prob", _number),
        _q("hold_off", "hold_off", "time"),
        _q("jitter_sigma", "jitter_sigma", "time"),
        _q("gate_width", "gate_width", "time"),
        _q("gate_delay", "gate_delay", "time"),
        _q("afterpulse_time_constant", "afterpulse_time_constant", "time"),
    ),
    "multiplex": (
        _q("port_delay", "port_delay", "time"),
        _q("coupler_loss", "coupler_loss_db", "loss"),
    ),
    "session": (
        Field("n_pulses", "n_pulses", _integer),
        Field("seed", "seed", _integer),
        _q("guard_time", "guard_time", "time"),
        Field("fixed_pattern", "fixed_pattern", _phase_pattern),
    ),
    "attack": (
        Field("kind", "kind", _string),
        Field("intercept_fraction", "intercept_fraction", _number),
        Field("resend_mean_photon", "resend_mean_photon", _number),
        Field("poisson_resend", "poisson_resend", _boolean),
        Field("tap_ratio", "tap_ratio", _number),
    ),
    "secure": (
        Field("shrinking_factor", "shrinking_factor", _number),
        Field("ec_inefficiency", "ec_inefficiency", _number),
        Field("shrinking_table", "shrinking_table", _shrinking_table),
    ),
}

ATTACK_KINDS = ("none", "ir", "bs")


@dataclass(frozen=True)
class ResolvedConfig:
    """A session configuration plus the secure-rate settings."""

    session: SessionConfig = field(default_factory=SessionConfig)
    shrinking: ShrinkingModel = field(default_factory=ConstantShrinking)
    ec_inefficiency: float = 1.16


def _parse_sections(data: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    if not isinstance(data, Mapping):
        raise ConfigurationError("top level must be a mapping of sections", "<root>")
    parsed: dict[str, dict[str, Any]] = {}
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section (expected one of {', '.join(SCHEMA)})", str(section))
        if body is None:
            body = {}
        if not isinstance(body, Mapping):
            raise ConfigurationError("section must be a mapping", section)
        fields = {f.key: f for f in SCHEMA[section]}
        values = {}
        for key, value in body.items():
            path = f"{section}.{key}"
            if key not in fields:
                raise ConfigurationError(f"unknown key (expected one of {', '.join(fields)})", path)
            values[fields[key].target] = fields[key].parse(value, path)
        parsed[section] = values
    return parsed


def _build_attack(values: dict[str, Any]) -> IrAttackConfig | BsAttackConfig | None:
    kind = values.pop("kind", "none" if not values else None)
    if kind not in ATTACK_KINDS:
        raise ConfigurationError(f"expected one of {', '.join(ATTACK_KINDS)}, got {kind!r}", "attack.kind")
    if kind == "none":
        if values:
            raise ConfigurationError("attack parameters given without an attack kind", "attack")
        return None
    if kind == "bs":
        extra = set(values) - {"tap_ratio"}
        if extra:
            raise ConfigurationError(f"not a beam-splitting parameter: {', '.join(sorted(extra))}", "attack")
        return BsAttackConfig(**values)
    if "tap_ratio" in values:
        raise ConfigurationError("tap_ratio applies to kind 'bs' only", "attack.tap_ratio")
    return IrAttackConfig(**values)


def load_config_mapping(data: Mapping[str, Any] | None) -> ResolvedConfig:
    """Resolve an already-parsed YAML mapping.

    Raises:
        ConfigurationError: On unknown keys, wrong units or invalid values.
    """
    sections = _parse_sections(data or {})
    base = SessionConfig()
    session = dict(sections.get("session", {}))
    guard = GuardBandPolicy(session.pop("guard_time", 0.0))
    secure = dict(sections.get("secure", {}))

    resolved_session = replace(
        base,
        source=replace(base.source, **sections.get("source", {})),
        channel=replace(base.channel, **sections.get("channel", {})),
        spd=replace(base.spd, **sections.get("detector", {})),
        multiplex=replace(base.multiplex, **sections.get("multiplex", {})),
        attack=_build_attack(dict(sections.get("attack", {}))),
        guard=guard,
        **sections.get("dli", {}),
        **session,
    )
    tau = secure.get("shrinking_factor", 1.0)
    shrinking: ShrinkingModel = ConstantShrinking(tau)
    if "shrinking_table" in secure:
        shrinking = TabulatedShrinking(secure["shrinking_table"], default=tau)
    resolved = ResolvedConfig(resolved_session, shrinking, secure.get("ec_inefficiency", 1.16))
    # Validates tau and f
    SecureRateParams(tau, resolved.ec_inefficiency)
    logger.debug("resolved configuration: %s", resolved)
    return resolved


def load_config(path: str | Path | None) -> ResolvedConfig:
    """Load a YAML configuration file; None gives the built-in defaults.

    Raises:
        ConfigurationError: If the file is missing, not YAML or invalid.
    """
    if path is None:
        return ResolvedConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigurationError("file not found", str(path)) from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"invalid YAML: {e}", str(path)) from e
    logger.info("loaded configuration %s", path)
    return load_config_mapping(data)


def config_to_mapping(resolved: ResolvedConfig) -> dict[str, dict[str, Any]]:
    """Inverse of load_config_mapping, with canonical units; reloading it gives an equal config."""
    cfg = resolved.session
    objects: dict[str, Any] = {
        "source": cfg.source,
        "channel": cfg.channel,
        "dli": cfg,
        "detector": cfg.spd,
        "multiplex": cfg.multiplex,
    }
    out: dict[str, dict[str, Any]] = {}
    for section, obj in objects.items():
        out[section] = {}
        for f in SCHEMA[section]:
            value = getattr(obj, f.target)
            out[section][f.key] = format_quantity(value, f.dimension) if f.dimension else value

    session: dict[str, Any] = {
        "n_pulses": cfg.n_pulses,
        "seed": cfg.seed,
        "guard_time": format_quantity(cfg.guard.guard_time, "time"),
    }
    if cfg.fixed_pattern is not None:
        session["fixed_pattern"] = ["pi" if b else "0" for b in cfg.fixed_pattern]
    out["session"] = session

    if isinstance(cfg.attack, IrAttackConfig):
        out["attack"] = {
            "kind": "ir",
            "intercept_fraction": cfg.attack.intercept_fraction,
            "resend_mean_photon": cfg.attack.resend_mean_photon,
            "poisson_resend": cfg.attack.poisson_resend,
        }
    elif isinstance(cfg.attack, BsAttackConfig):
        out["attack"] = {"kind": "bs", "tap_ratio": cfg.attack.tap_ratio}
    else:
        out["attack"] = {"kind": "none"}

    shrinking = resolved.shrinking
    secure: dict[str, Any] = {"ec_inefficiency": resolved.ec_inefficiency}
    if isinstance(shrinking, TabulatedShrinking):
        secure["shrinking_factor"] = shrinking.default
        secure["shrinking_table"] = {
            n: {"errors": list(e), "tau": list(t)} for n, (e, t) in shrinking.table.items()
        }
    else:
        secure["shrinking_factor"] = shrinking.tau(cfg.source.n_bins, 0.0)
    out["secure"] = secure
    return out
