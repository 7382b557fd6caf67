"""Line-oriented ``key = value`` run configuration."""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Any, Mapping

from .errors import ConfigError
from .search import EXHAUSTIVE, FREE, INNER, MODES, OUTER, RANDOM_BALANCED

COMMANDS = ("analyze", "optimal", "enumerate", "sample", "recommend", "moments")
OUTPUTS = ("table", "csv")
NEEDS_SIZES = ("analyze", "enumerate", "sample", "recommend")
RANDOM_COMMANDS = ("sample", "recommend")

_EXTRA_ALIASES = {"outer": OUTER, "inner": INNER, "free": FREE, OUTER: OUTER, INNER: INNER}
_MODE_ALIASES = {"exhaustive": EXHAUSTIVE, "unrestricted": "random-unrestricted",
                 "balanced": RANDOM_BALANCED, **{m: m for m in MODES}}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

# config-file key -> RunConfig attribute
KEYS = {
    "command": "command",
    "periods": "periods",
    "lambda": "lam",
    "icc": "icc",
    "mu": "mu",
    "sizes": "sizes",
    "mean": "mean",
    "cv": "cv",
    "alloc": "alloc",
    "mode": "mode",
    "reps": "reps",
    "seed": "seed",
    "threshold": "threshold",
    "mirror_dedup": "mirror_dedup",
    "extra_rule": "extra_rule",
    "output": "output",
    "top_k": "top_k",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    periods: int
    lam: float | None = None
    icc: float | None = None
    mu: float | None = None
    sizes: tuple[int, ...] | None = None
    mean: float | None = None
    cv: float | None = None
    alloc: str | None = None
    mode: str | None = None
    reps: int = 1000
    seed: int | None = None
    threshold: float = 0.99
    mirror_dedup: bool = False
    extra_rule: str = OUTER
    output: str = "table"
    top_k: int = 10

    @property
    def lam_value(self) -> float:
        if self.lam is not None:
            return self.lam
        return float("inf") if self.icc == 0 else (1 - self.icc) / self.icc

    @property
    def search_mode(self) -> str:
        if self.mode is not None:
            return self.mode
        return EXHAUSTIVE if self.command == "enumerate" else RANDOM_BALANCED

    def to_text(self) -> str:
        """Render as config text that :func:`parse_config` reads back to an equal RunConfig."""
        defaults = {f.name: f.default for f in fields(self)}
        lines = []
        for key, attr in KEYS.items():
            value = getattr(self, attr)
            if value is None or (attr not in ("command", "periods") and value == defaults.get(attr)):
                continue
            lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _int(key, text, line, minimum=None):
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", key, line) from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}, got {v}", key, line)
    return v


def _float(key, text, line):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", key, line) from None


def _convert(key: str, text: str, line: int | None) -> Any:
    text = text.strip()
    if key == "command":
        if text not in COMMANDS:
            raise ConfigError(f"unknown command {text!r}; choose from {', '.join(COMMANDS)}", key, line)
        return text
    if key == "periods":
        return _int(key, text, line, minimum=2)
    if key in ("reps", "top_k"):
        return _int(key, text, line)
    if key == "seed":
        v = _int(key, text, line, minimum=0)
        if v >= 2**64:
            raise ConfigError("seed must fit in 64 bits", key, line)
        return v
    if key == "lambda":
        v = _float(key, text, line)
        if v < 0:
            raise ConfigError("must be nonnegative", key, line)
        return v
    if key == "icc":
        v = _float(key, text, line)
        if not 0 <= v <= 1:
            raise ConfigError("must lie in [0, 1]", key, line)
        return v
    if key in ("mu", "mean", "cv", "threshold"):
        v = _float(key, text, line)
        if v < 0:
            raise ConfigError("must be nonnegative", key, line)
        return v
    if key == "sizes":
        try:
            sizes = tuple(int(s) for s in text.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"sizes must be comma-separated integers, got {text!r}", key, line) from None
        if not sizes or min(sizes) < 1:
            raise ConfigError("sizes must be positive integers", key, line)
        return sizes
    if key == "alloc":
        if not re.fullmatch(r"[\d,;\s]*", text) or not text:
            raise ConfigError(f"malformed allocation {text!r}", key, line)
        return text.replace(" ", "")
    if key == "mode":
        if text not in _MODE_ALIASES:
            raise ConfigError(f"unknown mode {text!r}", key, line)
        return _MODE_ALIASES[text]
    if key == "extra_rule":
        if text not in _EXTRA_ALIASES:
            raise ConfigError(f"unknown extra rule {text!r}; use outer, inner or free", key, line)
        return _EXTRA_ALIASES[text]
    if key == "mirror_dedup":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"expected true/false, got {text!r}", key, line)
    if key == "output":
        if text not in OUTPUTS:
            raise ConfigError(f"output must be table or csv, got {text!r}", key, line)
        return text
    raise ConfigError("unknown key", key, line)


_SPLIT = re.compile(r",\s*(?=[A-Za-z_]+\s*=)")


def _pairs(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for item in _SPLIT.split(line):
            if "=" not in item:
                raise ConfigError(f"expected 'key = value', got {item.strip()!r}", line=lineno)
            key, value = item.split("=", 1)
            yield key.strip().lower(), value, lineno


def parse_config(text: str = "", overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Parse config text; ``overrides`` (config-file key -> raw string) take precedence."""
    values: dict[str, Any] = {}
    where: dict[str, int | None] = {}
    for key, raw, lineno in _pairs(text):
        if key not in KEYS:
            raise ConfigError("unknown key", key, lineno)
        if key in values:
            raise ConfigError(f"duplicate key (first on line {where[key]})", key, lineno)
        values[key] = _convert(key, raw, lineno)
        where[key] = lineno
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in KEYS:
            raise ConfigError("unknown key", key)
        values[key] = raw if isinstance(raw, bool) else _convert(key, str(raw), None)
        where[key] = None
        # a flag for one of lambda/icc replaces a file value for the other
        other = {"lambda": "icc", "icc": "lambda"}.get(key)
        if other and other in values and where[other] is not None:
            del values[other]
    return _validate(values, where)


def _validate(values: dict, where: dict) -> RunConfig:
    if "command" not in values:
        raise ConfigError("missing required key", "command")
    if "periods" not in values:
        raise ConfigError("missing required key", "periods")
    if "lambda" in values and "icc" in values:
        raise ConfigError("give lambda or icc, not both", "icc", where.get("icc"))
    if "lambda" not in values and "icc" not in values:
        raise ConfigError("one of lambda or icc is required", "lambda")
    has_sizes = "sizes" in values
    has_moments = "mean" in values or "cv" in values
    if has_sizes and has_moments:
        key = "mean" if "mean" in values else "cv"
        raise ConfigError("give either sizes or mean/cv, not both", key, where.get(key))
    if not has_sizes and not has_moments:
        raise ConfigError("either sizes or mean and cv must be supplied", "sizes")
    if has_moments and not ("mean" in values and "cv" in values):
        missing = "cv" if "mean" in values else "mean"
        raise ConfigError("mean and cv must be given together", missing)
    command = values["command"]
    if has_moments and command in NEEDS_SIZES:
        raise ConfigError(f"command '{command}' needs individual cluster sizes, not mean/cv",
                          "command", where.get("command"))
    if command == "analyze" and "alloc" not in values:
        raise ConfigError("analyze needs an allocation", "alloc")
    if command in RANDOM_COMMANDS and values.get("reps", 1) < 1:
        raise ConfigError("reps must be >= 1", "reps", where.get("reps"))
    if values.get("top_k", 1) < 1:
        raise ConfigError("top_k must be >= 1", "top_k", where.get("top_k"))
    if "mean" in values and values["mean"] <= 0:
        raise ConfigError("mean cluster size must be positive", "mean", where.get("mean"))
    if values["periods"] < 3:
        raise ConfigError("at least 3 periods (2 sequences) are needed", "periods", where.get("periods"))
    return RunConfig(**{KEYS[k]: v for k, v in values.items()})
