"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys are case-sensitive and must
appear in :data:`SCHEMA`; values are converted to the listed type.
"""

from __future__ import annotations

from .exceptions import ContractViolation


class ConfigError(ContractViolation):
    """Malformed or unknown configuration entry."""


SCHEMA = {
    "kappa": float, "g": float, "Z": float,
    "omega1": float, "omega2": float, "omega2_ratio": float,
    "omega1_dt": float, "total_time": float, "steps": int,
    "R": float, "expR": float, "r": float,
    "gx_bar": float, "gp_bar": float,
    "target": str, "scenario": str, "workers": int,
    "drive": str, "out": str, "json": str,
}


def _convert(key, raw, lineno):
    typ = SCHEMA[key]
    try:
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {typ.__name__}, got {raw!r}") from None


def parse_config(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _convert(key, raw, lineno)
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def merge(file_values: dict, overrides: dict) -> dict:
    """File values overlaid with every override that is not ``None``."""
    out = dict(file_values)
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out
