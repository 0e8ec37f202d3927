"""Flat ``key = value`` configuration files with dotted section prefixes.

Example::

    # sampler knobs
    sampler.base_size = 384
    sampler.jitter = 64
    predictor.coarse = baseline-contrast
    fusion.mode = replace-uncertain
    metrics.beta_sq = 0.3
    run.jobs = 2

Blank lines and ``#`` comments are ignored. Values keep their raw string
form here; the harness converts them when building typed configs, so
unknown keys and malformed values fail with the offending key named.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["parse_config_text", "load_config_file", "coerce_bool", "coerce_int", "coerce_float"]


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse config text into a flat ``{dotted.key: raw value}`` mapping."""
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"{source}:{line_no}: empty key")
        if key in entries:
            raise ValueError(f"{source}:{line_no}: duplicate key {key!r}")
        entries[key] = value
    return entries


def load_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise OSError(f"failed to read config file {path}: {err}") from err
    return parse_config_text(text, source=str(path))


def coerce_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"config key {key}: expected a boolean, got {value!r}")


def coerce_int(key: str, value: str) -> int:
    try:
        return int(value, 0)
    except ValueError:
        raise ValueError(f"config key {key}: expected an integer, got {value!r}") from None


def coerce_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"config key {key}: expected a number, got {value!r}") from None
