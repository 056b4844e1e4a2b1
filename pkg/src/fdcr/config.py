"""Experiment configuration: TOML files with explicit unit suffixes.

Dimensional quantities are strings of the form ``"<number> <unit>"``:

==============  ==========================================
kind            accepted units
==============  ==========================================
time            ``s``, ``ms``, ``us``
frequency       ``Hz``, ``kHz``, ``MHz``, ``GHz``
rate            ``1/s``, ``1/ms``, ``1/min``
power ratio     ``dB``, ``linear``
==============  ==========================================

Dimensionless numbers (``chi``, ``beta``, probabilities, counts) are
plain TOML numbers.  Unknown keys and bare numbers where a unit is
required are rejected.  The README documents every block and key.
"""

from __future__ import annotations

import copy
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from fdcr.dettheory import SensingConfig, linear_to_db, sample_count
from fdcr.exceptions import ConfigurationError
from fdcr.outage import WindowPolicy
from fdcr.throughput import LinkModel, snr_to, snr_tr
from fdcr.traffic import TrafficModel

EXPERIMENTS = (
    "sense-curves",
    "collision-curves",
    "throughput-curves",
    "optimize-p1",
    "optimize-p2",
    "strategy-sweep",
    "simulate",
)

_UNITS = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "rate": {"1/s": 1.0, "1/ms": 1e3, "1/min": 1.0 / 60.0},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


class SchemaError(ConfigurationError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def parse_quantity(value: Any, kind: str, key: str) -> float:
    """Convert ``"<number> <unit>"`` to SI (or linear, for ratios)."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise SchemaError([f"{key}: expected a string with a {kind} unit, got {value!r}"])
    match = _QUANTITY.match(value)
    if not match:
        raise SchemaError([f"{key}: cannot parse {value!r} as '<number> <unit>'"])
    number, unit = float(match.group(1)), match.group(2)
    if kind == "ratio":
        if unit == "dB":
            return float(10.0 ** (number / 10.0))
        if unit == "linear":
            return number
        raise SchemaError([f"{key}: unknown ratio unit {unit!r} (use dB or linear)"])
    scale = _UNITS[kind].get(unit)
    if scale is None:
        allowed = ", ".join(_UNITS[kind])
        raise SchemaError([f"{key}: unknown {kind} unit {unit!r} (use one of {allowed})"])
    return number * scale


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError([f"{key}: expected a plain number, got {value!r}"])
    return float(value)


def _integer(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError([f"{key}: expected an integer, got {value!r}"])
    return value


# schema: block -> key -> (kind, required)
_SCHEMA: Dict[str, Dict[str, Tuple[str, bool]]] = {
    "sensing": {
        "f_s": ("frequency", True),
        "alpha_s": ("ratio", True),
        "alpha_l": ("ratio", True),
        "chi": ("number", False),
        "sigma_w2": ("ratio", False),
        "gamma": ("gamma", False),
        "target_pf": ("number", False),
    },
    "traffic": {"lambda_off": ("rate", True), "beta": ("number", True)},
    "link": {"snr": ("ratio", True), "self_snr": ("ratio", True), "eta": ("number", False)},
    "frame": {
        "t_s0": ("time", False),
        "t": ("time", False),
        "t_r": ("time", False),
        "m": ("integer", False),
        "b_sum_mode": ("choice:literal,partition", False),
        "window_rule": ("choice:si-offset,same,target-pf", False),
        "window_target_pf": ("number", False),
    },
    "optimize": {
        "constraint": ("number", False),
        "constraint_ts": ("number", False),
        "constraint_tr": ("number", False),
        "t_s0_range": ("time-pair", False),
        "t_range": ("time-pair", False),
        "points": ("integer", False),
        "refinement": ("integer", False),
        "zoom_points": ("integer", False),
    },
    "sweep": {
        "t_s": ("time-range", False),
        "t": ("time-range", False),
        "t_s0": ("time-range", False),
        "chi": ("number-list", False),
        "beta": ("number-range", False),
        "modes": ("mode-list", False),
    },
    "simulate": {
        "frames": ("integer", False),
        "trials": ("integer", False),
        "detector": ("choice:analytic,sampled", False),
        "method": ("choice:exact,samples", False),
        "sensing_quality": ("choice:imperfect,perfect", False),
        "batches": ("integer", False),
        "modes": ("mode-list", False),
        "t_s": ("time", False),
    },
    "sensitivity": {
        "lambda_scale": ("number-list", False),
        "window_rules": ("choice-list:si-offset,same,target-pf", False),
        "window_target_pf": ("number", False),
    },
}
_REQUIRED_BLOCKS = ("sensing", "traffic", "link")
_TOP_LEVEL = {"experiment", "seed", "output_dir", "preset"}

PRESETS: Dict[str, Dict[str, Any]] = {
    "section-6-defaults": {
        "sensing": {
            "f_s": "6 MHz",
            "alpha_s": "20 dB",
            "alpha_l": "-15 dB",
            "chi": 0.235,
            "sigma_w2": "1 linear",
            "gamma": "midpoint",
        },
        "traffic": {"lambda_off": "0.01 1/s", "beta": 0.5},
        "link": {"snr": "15 dB", "self_snr": "20 dB", "eta": 4},
        "frame": {"t_s0": "4 ms", "t": "100 ms", "m": 500, "b_sum_mode": "literal", "window_rule": "si-offset"},
        "optimize": {
            "constraint": 0.04,
            "t_s0_range": ["0.5 ms", "50 ms"],
            "t_range": ["50 ms", "20 s"],
            "points": 40,
            "refinement": 2,
            "zoom_points": 21,
        },
        "sweep": {
            "t_s": {"start": "0.1 ms", "stop": "5 ms", "points": 50},
            "t": {"start": "10 ms", "stop": "10 s", "points": 60, "spacing": "log"},
            "t_s0": {"start": "0.5 ms", "stop": "50 ms", "points": 60, "spacing": "log"},
            "chi": [0.0, 0.1, 0.2, 0.3],
            "beta": {"start": 0.04, "stop": 0.96, "points": 25},
            "modes": ["TO", "TS", "TR"],
        },
        "simulate": {
            "frames": 100000,
            "trials": 100000,
            "detector": "analytic",
            "method": "exact",
            "sensing_quality": "imperfect",
            "batches": 50,
            "modes": ["TO", "TS", "TR"],
        },
        "sensitivity": {
            "lambda_scale": [0.25, 0.5, 1.0, 2.0, 4.0],
            "window_rules": ["si-offset", "same", "target-pf"],
            "window_target_pf": 1e-3,
        },
    }
}


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; ``override`` wins."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    """A parsed, unit-resolved experiment configuration."""

    experiment: str
    seed: int
    output_dir: Optional[str]
    raw: Dict[str, Any]
    values: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, block: str, key: str, default=None):
        return self.values.get(block, {}).get(key, default)

    # model objects ---------------------------------------------------

    @property
    def gamma_spec(self):
        return self.get("sensing", "gamma", "midpoint")

    def sensing(self, chi: Optional[float] = None) -> SensingConfig:
        cfg = SensingConfig(
            chi=self.get("sensing", "chi", 0.0) if chi is None else chi,
            alpha_s=self.get("sensing", "alpha_s"),
            alpha_l=self.get("sensing", "alpha_l"),
            gamma=None,
            f_s=self.get("sensing", "f_s"),
            sigma_w2=self.get("sensing", "sigma_w2", 1.0),
        )
        spec = self.gamma_spec
        if spec == "midpoint":
            return cfg.with_gamma(cfg.midpoint_gamma)
        if spec == "target-pf":
            # resolved per sensing duration by the caller
            return cfg
        return cfg.with_gamma(spec)

    def traffic(self, lambda_scale: float = 1.0) -> TrafficModel:
        return TrafficModel(self.get("traffic", "lambda_off") * lambda_scale, self.get("traffic", "beta"))

    def link(self, chi: Optional[float] = None) -> LinkModel:
        chi = self.get("sensing", "chi", 0.0) if chi is None else chi
        return LinkModel.symmetric(
            float(linear_to_db(self.get("link", "snr"))),
            float(linear_to_db(self.get("link", "self_snr"))),
            chi=chi,
            eta=self.get("link", "eta", 4.0),
        )

    def window(self) -> WindowPolicy:
        return WindowPolicy(
            self.get("frame", "window_rule", "si-offset"), self.get("frame", "window_target_pf")
        )


def _parse_range(value, kind, key, default_spacing):
    if not isinstance(value, dict):
        raise SchemaError([f"{key}: expected a table with start, stop, points"])
    extra = set(value) - {"start", "stop", "points", "spacing"}
    if extra:
        raise SchemaError([f"{key}: unknown keys {sorted(extra)}"])
    missing = {"start", "stop", "points"} - set(value)
    if missing:
        raise SchemaError([f"{key}: missing {sorted(missing)}"])
    if kind == "time":
        start = parse_quantity(value["start"], "time", f"{key}.start")
        stop = parse_quantity(value["stop"], "time", f"{key}.stop")
    else:
        start, stop = _number(value["start"], f"{key}.start"), _number(value["stop"], f"{key}.stop")
    points = _integer(value["points"], f"{key}.points")
    spacing = value.get("spacing", default_spacing)
    if points < 1 or not stop >= start:
        raise SchemaError([f"{key}: need points >= 1 and stop >= start"])
    if spacing == "log":
        if start <= 0:
            raise SchemaError([f"{key}: log spacing needs start > 0"])
        return tuple(float(v) for v in np.geomspace(start, stop, points))
    if spacing == "linear":
        return tuple(float(v) for v in np.linspace(start, stop, points))
    raise SchemaError([f"{key}.spacing: expected 'log' or 'linear', got {spacing!r}"])


def _parse_value(kind: str, value: Any, key: str):
    if kind in ("time", "frequency", "rate", "ratio"):
        return parse_quantity(value, kind, key)
    if kind == "number":
        return _number(value, key)
    if kind == "integer":
        return _integer(value, key)
    if kind.startswith("choice:"):
        allowed = kind.split(":", 1)[1].split(",")
        if value not in allowed:
            raise SchemaError([f"{key}: expected one of {allowed}, got {value!r}"])
        return value
    if kind.startswith("choice-list:"):
        allowed = kind.split(":", 1)[1].split(",")
        if not isinstance(value, list) or any(v not in allowed for v in value):
            raise SchemaError([f"{key}: expected a list drawn from {allowed}"])
        return tuple(value)
    if kind == "gamma":
        if value in ("midpoint", "target-pf"):
            return value
        return parse_quantity(value, "ratio", key)
    if kind == "time-pair":
        if not isinstance(value, list) or len(value) != 2:
            raise SchemaError([f"{key}: expected [low, high]"])
        pair = tuple(parse_quantity(v, "time", key) for v in value)
        if not 0 < pair[0] < pair[1]:
            raise SchemaError([f"{key}: need 0 < low < high"])
        return pair
    if kind == "time-range":
        return _parse_range(value, "time", key, "linear")
    if kind == "number-range":
        if isinstance(value, list):
            return tuple(_number(v, key) for v in value)
        return _parse_range(value, "number", key, "linear")
    if kind == "number-list":
        if not isinstance(value, list) or not value:
            raise SchemaError([f"{key}: expected a nonempty list of numbers"])
        return tuple(_number(v, key) for v in value)
    if kind == "mode-list":
        if not isinstance(value, list) or any(v not in ("TO", "TS", "TR") for v in value):
            raise SchemaError([f"{key}: expected a list drawn from ['TO', 'TS', 'TR']"])
        return tuple(value)
    raise AssertionError(kind)


def parse(raw: Dict[str, Any], preset: Optional[str] = None) -> ExperimentConfig:
    """Validate ``raw`` (a TOML document) and resolve its units.

    ``preset`` (or a top-level ``preset`` key) names a set of defaults
    that the document's own keys override.  All problems are collected
    and raised together as one :class:`SchemaError`.
    """
    preset = preset or raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise SchemaError([f"preset: unknown preset {preset!r} (known: {sorted(PRESETS)})"])
        raw = merge(PRESETS[preset], raw)

    errors: List[str] = []
    for key in raw:
        if key not in _TOP_LEVEL and key not in _SCHEMA:
            errors.append(f"{key}: unknown key")
    experiment = raw.get("experiment")
    if experiment is None:
        errors.append("experiment: missing required key")
    elif experiment not in EXPERIMENTS:
        errors.append(f"experiment: expected one of {list(EXPERIMENTS)}, got {experiment!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        errors.append(f"seed: expected an integer in [0, 2^64), got {seed!r}")
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        errors.append("output_dir: expected a string")

    values: Dict[str, Dict[str, Any]] = {}
    for block, schema in _SCHEMA.items():
        content = raw.get(block)
        if content is None:
            if block in _REQUIRED_BLOCKS:
                errors.append(f"[{block}]: missing required block")
            continue
        if not isinstance(content, dict):
            errors.append(f"[{block}]: expected a table")
            continue
        resolved = {}
        for key, value in content.items():
            if key not in schema:
                errors.append(f"{block}.{key}: unknown key")
                continue
            try:
                resolved[key] = _parse_value(schema[key][0], value, f"{block}.{key}")
            except SchemaError as exc:
                errors.extend(exc.errors)
        for key, (_, required) in schema.items():
            if required and key not in content:
                errors.append(f"{block}.{key}: missing required key")
        values[block] = resolved

    if not errors:
        errors.extend(_semantic_errors(values))
    if errors:
        raise SchemaError(errors)
    return ExperimentConfig(experiment, int(seed), output_dir, raw, values)


def _semantic_errors(values) -> List[str]:
    errors = []
    sensing = values.get("sensing", {})
    if sensing.get("gamma") == "target-pf" and "target_pf" not in sensing:
        errors.append("sensing.target_pf: required when gamma = 'target-pf'")
    frame = values.get("frame", {})
    if frame.get("window_rule") == "target-pf" and "window_target_pf" not in frame:
        errors.append("frame.window_target_pf: required when window_rule = 'target-pf'")
    try:
        TrafficModel(values["traffic"]["lambda_off"], values["traffic"]["beta"])
    except ConfigurationError as exc:
        errors.append(f"[traffic]: {exc}")
    try:
        SensingConfig(
            sensing.get("chi", 0.0), sensing["alpha_s"], sensing["alpha_l"], None, sensing["f_s"],
            sensing.get("sigma_w2", 1.0),
        )
    except ConfigurationError as exc:
        errors.append(f"[sensing]: {exc}")
    return errors


def load(path: str, preset: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except OSError as exc:
        raise SchemaError([f"cannot read {path}: {exc.strerror}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError([f"{path}: TOML syntax error: {exc}"]) from exc
    return parse(raw, preset)


def _echo_ratio(text, value):
    return {"input": text, "linear": value, "dB": float(linear_to_db(value))}


def describe(config: ExperimentConfig) -> Dict[str, Any]:
    """Resolved units and derived quantities, for ``fdcr validate``."""
    raw = config.raw
    resolved: Dict[str, Any] = {}
    for block, entries in config.values.items():
        for key, value in entries.items():
            kind = _SCHEMA[block][key][0]
            text = raw.get(block, {}).get(key)
            if kind == "ratio" or (kind == "gamma" and isinstance(value, float)):
                resolved[f"{block}.{key}"] = _echo_ratio(text, value)
            elif kind in ("time", "frequency", "rate"):
                unit = {"time": "s", "frequency": "Hz", "rate": "1/s"}[kind]
                resolved[f"{block}.{key}"] = {"input": text, "si": value, "unit": unit}
            else:
                resolved[f"{block}.{key}"] = value if not isinstance(value, tuple) else list(value)

    derived: Dict[str, Any] = {}
    traffic = config.traffic()
    derived["lambda_on_per_s"] = traffic.lambda_on
    sense = config.sensing()
    derived["sigma_s2"] = sense.sigma_s2
    derived["sigma_l2"] = sense.sigma_l2
    if sense.gamma is not None:
        derived["gamma_linear"] = sense.gamma
    link = config.link()
    derived["snr_to_linear"] = snr_to(link)
    derived["snr_tr_linear"] = snr_tr(link, "j")
    t_s0 = config.get("frame", "t_s0")
    if t_s0 is not None:
        derived["n_initial_sensing"] = int(sample_count(t_s0, sense.f_s))
        t = config.get("frame", "t")
        m = config.get("frame", "m", 500)
        if t is not None and m:
            derived["n_per_window"] = int(sample_count(t / m, sense.f_s))
    return {"experiment": config.experiment, "seed": config.seed, "resolved": resolved, "derived": derived}


__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ExperimentConfig",
    "SchemaError",
    "describe",
    "load",
    "merge",
    "parse",
    "parse_quantity",
]
