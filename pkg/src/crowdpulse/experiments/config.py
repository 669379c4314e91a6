"""JSON experiment configuration: schema, line-aware validation and unit conversion.

Every physical key carries its unit as a suffix (``_GHz``, ``_MHz``, ``_ns``,
``_rad``).  Cyclic frequencies are converted to rad/ns on load.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field

import jsonschema

from crowdpulse.hardware import FilterSpec
from crowdpulse.model import GATES, SystemParams, TargetRotation, ghz, mhz
from crowdpulse.optimizer import Mode, OptimizerConfig
from crowdpulse.propagator import Method


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, source=None):
        self.message = message
        self.line = line
        self.source = source
        where = source or "<config>"
        prefix = f"{where}:{line}: " if line is not None else f"{where}: "
        super().__init__(prefix + message)


_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_NUM_LIST = {"type": "array", "items": _NUMBER, "minItems": 1}
_RANGE = {
    "oneOf": [
        _NUM_LIST,
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "step"],
            "properties": {"start": _NUMBER, "stop": _NUMBER, "step": _POS},
        },
    ]
}


_RANGE_KEYS = ("tg_ns", "crowding_MHz", "tg_bar", "tg_period_fraction", "speed_limit_tg_ns",
               "crowding_deviation", "anharmonicity_deviation")


def _block(properties, required=()):
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": properties,
        "required": list(required),
    }


SCHEMA = _block(
    {
        "seed": _NONNEG_INT,
        "workers": _POS_INT,
        "system": _block(
            {
                "omega1_GHz": _POS,
                "omega2_GHz": _POS,
                "crowding_MHz": _POS,
                "anharmonicity_MHz": _NUMBER,
                "lambda1": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "lambda2": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
            }
        ),
        "target": _block(
            {
                "gate1": {"enum": sorted(GATES)},
                "gate2": {"enum": sorted(GATES)},
                "theta1_rad": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                "theta2_rad": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
            }
        ),
        "pulse": _block(
            {
                "tg_ns": _POS,
                "n_windows": _POS_INT,
                "mode": {"enum": [m.value for m in Mode]},
                "exact_amplitudes": {"type": "boolean"},
            }
        ),
        "optimizer": _block(
            {
                "restarts": _POS_INT,
                "max_iter": _POS_INT,
                "tol": _POS,
                "leakage_weight": {"type": "number", "minimum": 0},
                "coeff_scale": _POS,
                "detuning_scale_MHz": _POS,
                "coeff_start": _POS,
                "detuning_start_MHz": _POS,
                "trace": {"type": "boolean"},
            }
        ),
        "grid": _block(
            {
                "search_dt_ns": _POS,
                "steps": _POS_INT,
                "method": {"enum": [m.value for m in Method]},
            }
        ),
        "sweep": _block(
            {
                "tg_ns": _RANGE,
                "crowding_MHz": _RANGE,
                "tg_bar": _RANGE,
                "tg_period_fraction": _RANGE,
                "speed_limit_tg_ns": _RANGE,
                "crowding_deviation": _RANGE,
                "anharmonicity_deviation": _RANGE,
                "strategies": {
                    "type": "array",
                    "items": {"enum": ["gaussian", "derivative", "resonant", "off_resonant"]},
                    "minItems": 1,
                },
                "threshold": _POS,
                "stop_at_threshold": {"type": "boolean"},
                "pulse_file": {"type": "string"},
            }
        ),
        "filter": _block({"omega0_MHz": _POS, "pad_length_ns": {"type": "number", "minimum": 0}}),
        "output": _block({"dir": {"type": "string"}}),
        "sequence": _block(
            {
                "gates1": {"type": "array", "items": {"enum": sorted(GATES)}, "minItems": 1},
                "gates2": {"type": "array", "items": {"enum": sorted(GATES)}, "minItems": 1},
            }
        ),
        "assert": _block(
            {
                "max_gate_error": _POS,
                "max_leakage": _POS,
                "alpha_range": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
            }
        ),
    }
)


# -- position-aware JSON reading ------------------------------------------------

_WS = re.compile(r"\s*")
_decoder = json.JSONDecoder()


def _parse_with_lines(text):
    """Parse JSON and return ``(value, lines)`` where ``lines`` maps a path tuple
    to the 1-based line of its key (or of the element, inside arrays)."""
    lines = {}
    starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def line_of(pos):
        lo, hi = 0, len(starts)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if starts[mid] <= pos:
                lo = mid
            else:
                hi = mid
        return lo + 1

    def skip(pos):
        return _WS.match(text, pos).end()

    def value(pos, path):
        pos = skip(pos)
        lines.setdefault(path, line_of(pos))
        ch = text[pos : pos + 1]
        if ch == "{":
            out = {}
            pos = skip(pos + 1)
            if text[pos : pos + 1] == "}":
                return out, pos + 1
            while True:
                pos = skip(pos)
                key, end = _decoder.raw_decode(text, pos)
                if not isinstance(key, str):
                    raise json.JSONDecodeError("Expecting property name", text, pos)
                if key in out:
                    raise ConfigError(f"duplicate key {key!r}", line_of(pos))
                lines[path + (key,)] = line_of(pos)
                pos = skip(end)
                if text[pos : pos + 1] != ":":
                    raise json.JSONDecodeError("Expecting ':' delimiter", text, pos)
                out[key], pos = value(pos + 1, path + (key,))
                pos = skip(pos)
                ch = text[pos : pos + 1]
                if ch == "}":
                    return out, pos + 1
                if ch != ",":
                    raise json.JSONDecodeError("Expecting ',' delimiter", text, pos)
                pos += 1
        if ch == "[":
            out = []
            pos = skip(pos + 1)
            if text[pos : pos + 1] == "]":
                return out, pos + 1
            while True:
                item, pos = value(pos, path + (len(out),))
                out.append(item)
                pos = skip(pos)
                ch = text[pos : pos + 1]
                if ch == "]":
                    return out, pos + 1
                if ch != ",":
                    raise json.JSONDecodeError("Expecting ',' delimiter", text, pos)
                pos += 1
        return _decoder.raw_decode(text, pos)

    try:
        data, end = value(0, ())
        if skip(end) != len(text):
            raise json.JSONDecodeError("Extra data", text, skip(end))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return data, lines


def _error_line(error, lines):
    path = tuple(error.absolute_path)
    if error.validator == "additionalProperties":
        allowed = set(error.schema.get("properties", {}))
        extra = sorted(k for k in error.instance if k not in allowed)
        if extra:
            return lines.get(path + (extra[0],)), f"unknown key {extra[0]!r}"
    while path and path not in lines:
        path = path[:-1]
    where = "/".join(str(p) for p in error.absolute_path) or "<root>"
    return lines.get(path), f"{where}: {error.message}"


def validate(data, lines=None, source=None):
    """Raise :class:`ConfigError` for the first schema violation (by line)."""
    lines = lines or {}
    errors = list(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data))
    if not errors:
        return
    located = [_error_line(e, lines) for e in errors]
    line, message = min(located, key=lambda lm: (lm[0] is None, lm[0] or 0))
    raise ConfigError(message, line, source)


# -- typed configuration ----------------------------------------------------------

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "system": {"omega1_GHz": 5.508, "omega2_GHz": 5.903, "anharmonicity_MHz": -350.0},
    "target": {"gate1": "X180", "gate2": "X180"},
    "pulse": {"tg_ns": 30.0, "n_windows": 3, "mode": "off_resonant", "exact_amplitudes": False},
    "optimizer": {
        "restarts": 32,
        "max_iter": 2000,
        "tol": 1e-12,
        "leakage_weight": 0.0,
        "coeff_scale": 0.25,
        "detuning_scale_MHz": 2.0,
        "coeff_start": 2.0,
        "detuning_start_MHz": 5.0,
        "trace": False,
    },
    "grid": {"search_dt_ns": 0.05, "method": "cf4"},
    "sweep": {
        "tg_ns": {"start": 20, "stop": 60, "step": 2},
        "crowding_MHz": {"start": 30, "stop": 90, "step": 7.5},
        "speed_limit_tg_ns": {"start": 12, "stop": 44, "step": 2},
        "tg_bar": [0.8, 0.85, 0.9, 1.0, 1.25, 1.5, 1.75, 2.0],
        "crowding_deviation": {"start": -0.06, "stop": 0.06, "step": 0.005},
        "anharmonicity_deviation": {"start": -0.06, "stop": 0.06, "step": 0.005},
        "strategies": ["gaussian", "derivative", "resonant", "off_resonant"],
        "threshold": 1e-4,
        "stop_at_threshold": False,
    },
    "filter": {"omega0_MHz": 425.4},
    "output": {"dir": "out"},
    "assert": {},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def expand_range(spec):
    """Explicit list, or inclusive ``start..stop`` in ``step`` increments."""
    if isinstance(spec, list):
        return [float(v) for v in spec]
    n = int(round((spec["stop"] - spec["start"]) / spec["step"]))
    return [round(spec["start"] + i * spec["step"], 12) for i in range(n + 1)]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with defaults filled in.

    ``raw`` is the merged JSON document (units as written); accessors
    return internal units.
    """

    raw: dict = field(repr=False)
    source: str = None

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def workers(self):
        return int(self.raw["workers"])

    @property
    def digest(self):
        """SHA-256 of the canonical merged document; identifies result tables."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def params(self):
        s = self.raw["system"]
        lambdas = (tuple(s.get("lambda1", (1.0, 2**0.5))), tuple(s.get("lambda2", (1.0, 2**0.5))))
        anharm = mhz(s["anharmonicity_MHz"])
        if "crowding_MHz" in s:
            return SystemParams.from_crowding(ghz(s["omega1_GHz"]), anharm, mhz(s["crowding_MHz"]), lambdas)
        return SystemParams(ghz(s["omega1_GHz"]), ghz(s["omega2_GHz"]), anharm, lambdas)

    def target(self):
        t = self.raw["target"]
        thetas = []
        for k in (1, 2):
            if f"theta{k}_rad" in t:
                re_, im_ = t[f"theta{k}_rad"]
                thetas.append(complex(re_, im_))
            else:
                thetas.append(GATES[t.get(f"gate{k}", "I")])
        return TargetRotation(*thetas)

    @property
    def tg(self):
        return float(self.raw["pulse"]["tg_ns"])

    @property
    def n_windows(self):
        return int(self.raw["pulse"]["n_windows"])

    @property
    def mode(self):
        return Mode(self.raw["pulse"]["mode"])

    @property
    def exact_amplitudes(self):
        return bool(self.raw["pulse"]["exact_amplitudes"])

    def optimizer(self, seed=None, workers=None):
        o = self.raw["optimizer"]
        return OptimizerConfig(
            seed=self.seed if seed is None else int(seed),
            restarts=o["restarts"],
            max_iter=o["max_iter"],
            tol=o["tol"],
            coeff_scale=o["coeff_scale"],
            detuning_scale=mhz(o["detuning_scale_MHz"]),
            coeff_start=o["coeff_start"],
            detuning_start=mhz(o["detuning_start_MHz"]),
            workers=self.workers if workers is None else int(workers),
            trace=o["trace"],
        )

    @property
    def leakage_weight(self):
        return float(self.raw["optimizer"]["leakage_weight"])

    @property
    def search_dt(self):
        return float(self.raw["grid"]["search_dt_ns"])

    @property
    def method(self):
        return Method(self.raw["grid"]["method"])

    @property
    def steps(self):
        return self.raw["grid"].get("steps")

    def sweep(self, key):
        value = self.raw["sweep"][key]
        if key in _RANGE_KEYS:
            return expand_range(value)
        return value

    def filter_spec(self):
        f = self.raw["filter"]
        return FilterSpec(mhz(f["omega0_MHz"]), f.get("pad_length_ns"))

    @property
    def out_dir(self):
        return self.raw["output"]["dir"]

    @property
    def assertions(self):
        return dict(self.raw["assert"])

    def replace(self, **sections):
        """Copy with some top-level entries overridden (validated again)."""
        merged = _merge(self.raw, sections)
        validate(merged, source=self.source)
        return ExperimentConfig(merged, self.source)


def parse_config(text, source=None):
    try:
        data, lines = _parse_with_lines(text)
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.line, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", 1, source)
    validate(data, lines, source)
    merged = _merge(DEFAULTS, data)
    try:
        cfg = ExperimentConfig(merged, source)
        cfg.params()
        cfg.target()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), None, source) from None
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    try:
        return parse_config(text, str(path))
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.line, str(path)) from None


def default_config(**sections):
    return ExperimentConfig(_merge(DEFAULTS, sections))
