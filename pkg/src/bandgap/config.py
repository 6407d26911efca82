"""Experiment configuration: JSON parsing, validation and defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

__all__ = ["ConfigError", "ExperimentConfig", "EXPERIMENTS", "GEOMETRIES", "parse_config", "emit_config", "cell_length"]

EXPERIMENTS = ("bands", "convergence", "limit2d", "figure3", "certificate", "curvature", "isoperimetric", "minmax-selftest")
GEOMETRIES = ("dumbbell", "cylinder-linked", "flat-cylinder", "conformal")

# Geometry parameters each kind needs (besides d).
_GEOMETRY_FIELDS = {
    "dumbbell": ("eps",),
    "cylinder-linked": ("eps", "L"),
    "flat-cylinder": ("r", "L"),
    "conformal": ("eps", "r", "a", "b"),
}
_SWEEP_EXPERIMENTS = ("bands", "convergence", "curvature", "isoperimetric")
_ANALYTIC_T = 65
_SWEEP_T = 33


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    geometry: str | None = None
    d: int | None = None
    eps: float | None = None
    L: float | None = None
    r: float | None = None
    a: float | None = None
    b: float | None = None
    T: int | None = None
    k_max: int = 8
    lambda_max: float = 40.0
    eps_list: tuple[float, ...] | None = None
    H_body: float | None = None
    neck_divisions: int = 16
    m: int | None = None
    nu: float = 2.0
    seed: int = 0
    instances: int = 200
    threads: int | None = None
    format: str = "csv"
    precision: int = 12

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["eps_list"] is not None:
            out["eps_list"] = list(out["eps_list"])
        return out


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
# Accepted spelling variants in config files.
_ALIASES = {"lam_max": "lambda_max", "λ_max": "lambda_max", "ε": "eps", "h_body": "H_body"}


def cell_length(geometry: str, L: float | None) -> float:
    """Period length ``S`` of the cell a geometry kind produces."""
    if geometry == "dumbbell":
        return math.pi
    if geometry == "cylinder-linked":
        return math.pi + L
    if geometry == "flat-cylinder":
        return L
    return 1.0


def _number(data, key, kind=float, *, positive=False, lo=None, hi=None, required=False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(key, "missing required field")
        return None
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(key, f"must be finite, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(key, f"must be positive, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value!r}")
    return value


def _missing(data, names):
    gone = [n for n in names if data.get(n) is None]
    if gone:
        raise ConfigError(",".join(gone), "missing required field" + ("s" if len(gone) > 1 else ""))


def _check_eps(eps, path):
    if not (0.0 < eps < 0.25):
        raise ConfigError(path, f"must lie in (0, 0.25), got {eps!r}")


def parse_config(text: str | dict) -> ExperimentConfig:
    """Validate a JSON experiment description and fill in explicit defaults."""
    if isinstance(text, dict):
        data = dict(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("$", "top level must be an object")
    data = {_ALIASES.get(k, k): v for k, v in data.items() if not k.startswith("_")}
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    exp = data.get("experiment")
    if exp is None:
        raise ConfigError("experiment", "missing required field")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")

    out = {"experiment": exp}
    for key, kind, kw in (
        ("d", int, {"lo": 2}),
        ("eps", float, {"positive": True}),
        ("L", float, {"positive": True}),
        ("r", float, {"positive": True}),
        ("a", float, {"lo": 0.0}),
        ("b", float, {"lo": 0.0}),
        ("T", int, {"lo": 2}),
        ("k_max", int, {"lo": 1}),
        ("lambda_max", float, {"positive": True}),
        ("H_body", float, {"positive": True}),
        ("neck_divisions", int, {"lo": 2}),
        ("m", int, {"lo": 1}),
        ("nu", float, {"lo": 1.0}),
        ("seed", int, {"lo": 0}),
        ("instances", int, {"lo": 1}),
        ("threads", int, {"lo": 1}),
        ("precision", int, {"lo": 1, "hi": 17}),
    ):
        value = _number(data, key, kind, **kw)
        if value is not None:
            out[key] = value

    fmt = data.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format", f"expected 'csv' or 'json', got {fmt!r}")
    out["format"] = fmt

    if data.get("eps_list") is not None:
        raw = data["eps_list"]
        if not isinstance(raw, list) or len(raw) < 2:
            raise ConfigError("eps_list", "expected a list of at least two numbers")
        values = []
        for i, v in enumerate(raw):
            values.append(_number({f"eps_list[{i}]": v}, f"eps_list[{i}]", positive=True))
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ConfigError("eps_list", "must be strictly descending")
        out["eps_list"] = tuple(values)

    geometry = data.get("geometry")
    if exp in _SWEEP_EXPERIMENTS:
        if geometry is None:
            raise ConfigError("geometry", f"missing required field (one of {', '.join(GEOMETRIES)})")
        if geometry not in GEOMETRIES:
            raise ConfigError("geometry", f"unknown geometry {geometry!r}")
        needed = ["d", *_GEOMETRY_FIELDS[geometry]]
        if "eps" in needed and (exp == "convergence" or (exp in ("curvature", "isoperimetric") and "eps_list" in out)):
            needed.remove("eps")
            needed.append("eps_list")
        _missing(out, needed)
        if exp == "convergence" and geometry == "flat-cylinder":
            raise ConfigError("geometry", "convergence needs a family with a limit (not flat-cylinder)")
        if exp == "convergence" and geometry == "conformal" and out["d"] < 3:
            raise ConfigError("d", "conformal convergence compares with a product limit that needs d >= 3")
        for path, eps in ([("eps", out["eps"])] if "eps" in out else []) + [
            (f"eps_list[{i}]", e) for i, e in enumerate(out.get("eps_list") or ())
        ]:
            if geometry == "conformal":
                if not eps < 1:
                    raise ConfigError(path, f"must lie in (0, 1), got {eps!r}")
            elif geometry != "flat-cylinder":
                _check_eps(eps, path)
        if geometry == "conformal":
            if not (0.0 < out["a"] < out["b"] < 1.0):
                raise ConfigError("a,b", f"need 0 < a < b < 1, got a={out['a']}, b={out['b']}")
        if exp == "isoperimetric" and geometry == "conformal":
            raise ConfigError("geometry", "isoperimetric bound is defined for profile cells")
        out["geometry"] = geometry
        out.setdefault("T", _SWEEP_T)
        out.setdefault("H_body", cell_length(geometry, out.get("L")) / 400.0)
    elif geometry is not None:
        raise ConfigError("geometry", f"not used by experiment {exp!r}")

    if exp in ("limit2d", "figure3", "certificate"):
        _missing(out, ["L", "r"] + (["m"] if exp == "certificate" else []))
        if exp != "certificate" and not out["L"] < 1.0:
            raise ConfigError("L", f"must lie in (0, 1), got {out['L']!r}")
        if exp != "certificate":
            out.setdefault("T", _ANALYTIC_T)
            if out["T"] < 9:
                raise ConfigError("T", f"must be >= 9, got {out['T']}")
    return ExperimentConfig(**out)


def emit_config(config: ExperimentConfig) -> str:
    """Canonical JSON text; ``parse_config(emit_config(c)) == c``."""
    payload = {k: v for k, v in config.to_dict().items() if v is not None}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
