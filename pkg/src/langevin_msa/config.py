"""Experiment configuration: flat ``key=value`` files, flag overrides, defaults.

A config file holds one ``key=value`` per line; ``#`` starts a comment. Output
files written by the harness begin with ``# langevin-msa <mode>`` followed by
``#: key=value`` lines holding the effective config, so an output file can be
passed back as ``--config`` to regenerate it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError

log = logging.getLogger(__name__)

MODES = (
    "sweep-dim",
    "sweep-step",
    "verify-orders",
    "verify-contraction",
    "bounds-report",
    "lower-bound-check",
    "sample",
)

HEADER_MARK = "# langevin-msa"
HEADER_KEY_PREFIX = "#:"

# keys that may not change the produced bytes and so stay out of headers
NON_CONTENT_KEYS = ("out", "workers")


@dataclass
class ExperimentConfig:
    """Effective settings of one harness run.

    ``None`` means "use the mode default", resolved by :func:`resolve`.
    """

    mode: str
    potential: Optional[str] = None
    d: Optional[List[int]] = None
    h: Optional[List[float]] = None
    replicas: Optional[int] = None
    steps: Optional[int] = None
    time: Optional[float] = None
    seed: int = 0
    out: Optional[str] = None
    eps: Optional[List[float]] = None
    x0: Optional[str] = None
    y0: Optional[str] = None
    weak_x0: str = "1"
    workers: int = 1
    substeps: Optional[int] = None
    G: Optional[float] = None
    G_radius: float = 10.0
    G_samples: int = 10000
    ground_truth: str = "exact"
    h_gt: float = 0.005
    M_gt: Optional[int] = None
    T_gt: Optional[float] = None
    slope_range: Optional[Tuple[float, float]] = None
    strong_range: Tuple[float, float] = (1.4, 1.6)
    weak_range: Optional[Tuple[float, float]] = None
    analytic_range: Tuple[float, float] = (1.95, 2.05)
    rate_tol: float = 0.01
    k_cap: int = 10 ** 7

    def header_items(self) -> List[Tuple[str, str]]:
        items = []
        for f in fields(self):
            if f.name in NON_CONTENT_KEYS or f.name == "mode":
                continue
            items.append((f.name, format_value(getattr(self, f.name))))
        return items


VALID_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v} is not an integer")
        out.append(int(f))
    return out


def _int(text: str) -> int:
    vals = _ints(text)
    if len(vals) != 1:
        raise ValueError("expected one integer")
    return vals[0]


def _pair(text: str) -> Tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2 or vals[0] > vals[1]:
        raise ValueError("expected 'lo,hi' with lo <= hi")
    return (vals[0], vals[1])


_PARSERS = {
    "potential": str,
    "d": _ints,
    "h": _floats,
    "replicas": _int,
    "steps": _int,
    "time": float,
    "seed": _int,
    "out": str,
    "eps": _floats,
    "x0": str,
    "y0": str,
    "weak_x0": str,
    "workers": _int,
    "substeps": _int,
    "G": float,
    "G_radius": float,
    "G_samples": _int,
    "ground_truth": str,
    "h_gt": float,
    "M_gt": _int,
    "T_gt": float,
    "slope_range": _pair,
    "strong_range": _pair,
    "weak_range": _pair,
    "analytic_range": _pair,
    "rate_tol": float,
    "k_cap": _int,
}


def parse_value(key: str, text: str):
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(sorted(_PARSERS))}")
    text = text.strip()
    if text.lower() == "none":
        return None
    try:
        return _PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def read_pairs(path) -> List[Tuple[str, str]]:
    """``(key, raw value)`` pairs from a config file or a harness output header."""
    lines = Path(path).read_text().splitlines()
    from_output = bool(lines) and lines[0].startswith(HEADER_MARK)
    pairs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if from_output:
            if line.startswith(HEADER_KEY_PREFIX):
                line = line[len(HEADER_KEY_PREFIX):].strip()
            else:
                continue
        elif not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        pairs.append((key.strip(), value.strip()))
    return pairs


def mode_from_file(path) -> Optional[str]:
    first = Path(path).read_text().splitlines()[:1]
    if first and first[0].startswith(HEADER_MARK):
        parts = first[0].split()
        return parts[2] if len(parts) > 2 else None
    return None


def build_config(mode: str, file_pairs=(), overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Merge file pairs then flag overrides (flags win); duplicates are last-wins."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    values: Dict[str, object] = {}
    for key, text in file_pairs:
        if key == "mode":
            continue
        if key in values:
            log.warning("duplicate config key %r; the last value wins", key)
        values[key] = parse_value(key, text)
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, text)
    cfg = ExperimentConfig(mode=mode, **values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Range checks that do not depend on the potential."""

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.d is None or (cfg.d and all(v >= 1 for v in cfg.d)), "d values must be >= 1")
    need(cfg.h is None or (cfg.h and all(v > 0 and math.isfinite(v) for v in cfg.h)), "h values must be > 0")
    need(cfg.replicas is None or cfg.replicas >= 1, "replicas must be >= 1")
    need(cfg.steps is None or cfg.steps >= 0, "steps must be >= 0")
    need(cfg.time is None or cfg.time > 0, "time must be > 0")
    need(cfg.seed >= 0, "seed must be >= 0")
    need(cfg.eps is None or (cfg.eps and all(v > 0 for v in cfg.eps)), "eps values must be > 0")
    need(cfg.workers >= 1, "workers must be >= 1")
    need(cfg.substeps is None or cfg.substeps >= 1, "substeps must be >= 1")
    need(cfg.G is None or cfg.G >= 0, "G must be >= 0")
    need(cfg.G_radius > 0 and cfg.G_samples >= 1, "G_radius must be > 0 and G_samples >= 1")
    need(cfg.ground_truth in ("exact", "pilot"), "ground_truth must be 'exact' or 'pilot'")
    need(cfg.h_gt > 0, "h_gt must be > 0")
    need(cfg.M_gt is None or cfg.M_gt >= 1, "M_gt must be >= 1")
    need(cfg.T_gt is None or cfg.T_gt > 0, "T_gt must be > 0")
    need(0 < cfg.rate_tol < 1, "rate_tol must lie in (0, 1)")
    need(cfg.k_cap >= 1, "k_cap must be >= 1")
    if cfg.mode == "verify-orders" and cfg.h is not None:
        need(len(cfg.h) >= 2, "verify-orders needs at least two step sizes in h")
    if cfg.mode == "sweep-step" and cfg.d is not None:
        need(len(cfg.d) == 1, "sweep-step takes a single d")
