"""Config-file ingestion: INI files with nested sections.

Layering is preset -> config file -> command-line flags, last writer wins.
Frequencies are accepted in Hz with optional SI suffixes ("756 kHz",
"5.31 GHz", "380e3") and converted to rad/s at the core boundary; powers
are plain dBm numbers. The effective configuration is echoed into every
output header together with a short hash, so artifacts are reproducible.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import re

from .core import TWO_PI, SystemParams, get_preset, with_overrides
from .errors import ConfigError

_FREQ_RE = re.compile(
    r"^\s*([+-]?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*(ghz|mhz|khz|hz)?\s*$",
    re.IGNORECASE)
_SI = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, None: 1.0}

#: SystemParams fields settable from the [system] section (values in Hz text).
_SYSTEM_FREQ_KEYS = ("omega_c", "kappa", "kappa_e", "omega_m1", "gamma1",
                     "g1", "omega_m2", "gamma2", "g2")


def parse_frequency_hz(text) -> float:
    """'756 kHz' / '5.31 GHz' / '380e3' -> value in Hz."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _FREQ_RE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse frequency {text!r}")
    value, suffix = m.groups()
    return float(value) * _SI[suffix.lower() if suffix else None]


def parse_frequency_rad(text) -> float:
    return TWO_PI * parse_frequency_hz(text)


def load_config(path: str) -> dict[str, dict[str, str]]:
    """Read an INI file into a plain {section: {key: value}} dict."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return {s: dict(cp.items(s)) for s in cp.sections()}


def apply_system_overrides(params: SystemParams,
                           system_cfg: dict[str, str]) -> SystemParams:
    """Apply a [system] section (frequencies in Hz text) onto params."""
    overrides = {}
    for key, value in system_cfg.items():
        if key not in _SYSTEM_FREQ_KEYS:
            raise ConfigError(f"unknown [system] key {key!r}")
        overrides[key] = parse_frequency_rad(value)
    return with_overrides(params, **overrides) if overrides else params


def resolve_params(preset_name: str, cfg: dict[str, dict[str, str]] | None):
    """Preset plus optional [system] overrides -> SystemParams."""
    preset = get_preset(preset_name)
    params = preset.params
    if cfg and "system" in cfg:
        params = apply_system_overrides(params, cfg["system"])
    return params


def effective_config_text(preset_name: str, params: SystemParams,
                          extra: dict | None = None) -> str:
    """Canonical key=value dump of the effective configuration."""
    buf = io.StringIO()
    buf.write(f"preset = {preset_name}\n")
    for key in _SYSTEM_FREQ_KEYS:
        buf.write(f"system.{key}_hz = {getattr(params, key) / TWO_PI:.12g}\n")
    if extra:
        for key in sorted(extra):
            buf.write(f"{key} = {extra[key]}\n")
    return buf.getvalue()


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
