"""Flat ``key = value`` configuration files (SI units, one entry per line)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, required: Iterable[str], optional: Mapping[str, float] | None = None,
                      source: str = "<config>") -> dict[str, float]:
    """Parse ``key = value`` lines.  ``#`` starts a comment; ``:`` also works
    as the separator.  Unknown keys, duplicates, missing keys and values
    that are not finite numbers are errors with the line number."""
    required = list(required)
    optional = dict(optional or {})
    allowed = set(required) | set(optional)
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        elif ":" in line:
            key, _, val = line.partition(":")
        else:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = key.strip(), val.strip()
        if key not in allowed:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} (expected one of {sorted(allowed)})")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            number = float(val)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: value for {key!r} is not a number: {val!r}") from None
        if not math.isfinite(number):
            raise ConfigError(f"{source}:{lineno}: value for {key!r} must be finite")
        values[key] = number
    missing = [k for k in required if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing keys {missing}")
    for k, v in optional.items():
        values.setdefault(k, v)
    return values


def read_config(path: str | Path, required: Iterable[str], optional: Mapping[str, float] | None = None) -> dict[str, float]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config_text(text, required, optional, source=str(p))
