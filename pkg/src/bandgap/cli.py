"""Command-line experiment runner.

``bandgap <experiment> --config <path> [--out <dir>] [--threads N]``

Exit status: 0 ok, 1 I/O failure, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    RootBracketError,
    chain_limit_spectrum,
    figure3_curves,
    gap_certificate,
    limit2d_bands,
    product_neumann_spectrum,
)
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, emit_config, parse_config
from .floquet import band_convergence, band_sweep, detect_gaps
from .geometry import (
    MeshSpec,
    conformal_cell,
    conformal_curvature,
    cylinder_linked_cell,
    dumbbell_cell,
    flat_cylinder_cell,
    isoperimetric_slice_bound,
    sectional_curvature,
)
from .spectral import SolverError, minmax_compare, random_minmax_instance

__all__ = ["main", "run", "build_cell"]

log = logging.getLogger("bandgap")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (SolverError, RootBracketError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def build_cell(config: ExperimentConfig, eps: float | None = None):
    """Period cell described by ``config`` (``eps`` overrides ``config.eps``)."""
    eps = config.eps if eps is None else eps
    mesh = MeshSpec(h_body=config.H_body, neck_divisions=config.neck_divisions)
    if config.geometry == "dumbbell":
        return dumbbell_cell(config.d, eps, mesh)
    if config.geometry == "cylinder-linked":
        return cylinder_linked_cell(config.d, eps, config.L, mesh)
    if config.geometry == "flat-cylinder":
        return flat_cylinder_cell(config.d, config.r, config.L, mesh)
    return conformal_cell(config.d, config.r, config.a, config.b, eps, mesh)


def _eps_values(config: ExperimentConfig) -> list[float]:
    if config.eps_list is not None:
        return list(config.eps_list)
    if config.eps is None:
        raise ConfigError("eps", "missing required field")
    return [config.eps]


class _Writer:
    """Emits files whose first line records the config and tool version."""

    def __init__(self, out: Path, config: ExperimentConfig):
        self.out = out
        self.header = f"bandgap {__version__} config={emit_config(config)}"
        self.precision = config.precision
        self.written: list[Path] = []

    def num(self, x: float) -> str:
        x = float(x)
        if x == 0.0:
            x = 0.0  # drop the sign of negative zero
        return format(x, f".{self.precision}g")

    def csv(self, name: str, columns: list[str], rows) -> Path:
        path = self.out / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([self.num(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.written.append(path)
        return path

    def _round(self, obj):
        if isinstance(obj, dict):
            return {k: self._round(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [self._round(v) for v in obj]
        if isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, (float, np.floating)):
            x = float(obj)
            return x if not math.isfinite(x) else float(self.num(x))
        return obj

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        body = {"_comment": self.header, **self._round(payload)}
        path.write_text(json.dumps(body, indent=2, allow_nan=True) + "\n", encoding="utf-8")
        self.written.append(path)
        return path


def _run_bands(config, w, threads):
    cell = build_cell(config)
    structure = band_sweep(cell, T=config.T, lam_max=config.lambda_max, k_max=config.k_max, threads=threads)
    gaps = detect_gaps(structure.bands, config.lambda_max)
    rows = []
    for i, theta in enumerate(structure.thetas):
        for fn in structure.functions:
            rows.append((float(theta), fn.index, float(fn.values[i]), fn.modes[i]))
    w.csv("bands.csv", ["theta", "k", "lambda", "mode_label"], rows)
    payload = gaps.to_dict()
    payload["bands"] = [{"k": b.index, "lo": b.lo, "hi": b.hi} for b in structure.bands]
    payload["truncated"] = structure.truncated
    w.json("gaps.json", payload)


def _reference(config):
    if config.geometry == "conformal":
        return product_neumann_spectrum(config.r, config.b - config.a, config.d, config.k_max).first(config.k_max)
    return chain_limit_spectrum(config.geometry, config.d, config.L, config.k_max)


def _run_convergence(config, w, threads):
    cells = [(eps, build_cell(config, eps)) for eps in config.eps_list]
    rows = band_convergence(cells, _reference(config), config.k_max, T=config.T, threads=threads)
    w.csv(
        "convergence.csv",
        ["eps", "k", "lo", "hi", "reference", "distance"],
        [(r.eps, r.k, r.lo, r.hi, r.reference, r.distance) for r in rows],
    )


def _run_limit2d(config, w, threads):
    result = limit2d_bands(config.L, config.r, config.lambda_max, config.T)
    w.json(
        "limit2d.json",
        {
            "L": config.L,
            "r": config.r,
            "lambda_max": config.lambda_max,
            "bands": [{"branch": c.label, "lo": c.band[0], "hi": c.band[1]} for c in result.curves],
            "gaps": [{"a": a, "b": b} for a, b in result.gaps],
            "count": len(result.gaps),
        },
    )


def _run_figure3(config, w, threads):
    rows = []
    for curve in figure3_curves(config.L, config.r, config.T):
        for theta, value in zip(curve.thetas, curve.values):
            rows.append((float(theta), curve.label, float(value)))
    w.csv("figure3.csv", ["theta", "branch", "sqrt_lambda"], rows)


def _run_certificate(config, w, threads):
    w.json("certificate.json", gap_certificate(config.L, config.r, config.m).to_dict())


def _run_curvature(config, w, threads):
    entries = []
    for eps in _eps_values(config):
        cell = build_cell(config, eps)
        rep = conformal_curvature(cell) if config.geometry == "conformal" else sectional_curvature(cell)
        spherical = None if rep.spherical is None else float(np.max(np.abs(rep.spherical)))
        entries.append({"eps": eps, "max_abs": rep.max_abs, "max_abs_radial": float(np.max(np.abs(rep.radial))), "max_abs_spherical": spherical})
    w.json("curvature.json", {"geometry": config.geometry, "entries": entries})


def _run_isoperimetric(config, w, threads):
    entries = []
    for eps in _eps_values(config):
        bound = isoperimetric_slice_bound(build_cell(config, eps), config.nu)
        entries.append({"eps": eps, "value": bound.value, "slice": list(bound.slice)})
    w.json("isoperimetric.json", {"geometry": config.geometry, "nu": config.nu, "entries": entries})


def minmax_selftest(seed: int, instances: int, max_draws: int | None = None) -> dict:
    """Draw seeded instances until ``instances`` of them satisfy the hypotheses."""
    rng = np.random.default_rng(seed)
    max_draws = max_draws or 20 * instances
    checked = failures = draws = 0
    worst = -math.inf
    while checked < instances:
        if draws >= max_draws:
            raise ArithmeticError(f"only {checked} of {instances} instances satisfied the hypotheses in {draws} draws")
        draws += 1
        rep = minmax_compare(random_minmax_instance(rng))
        if not rep.hypotheses_hold.all():
            continue
        checked += 1
        failures += not rep.passed
        worst = max(worst, float(np.max(rep.lam_prime - rep.lam - rep.delta)))
    return {"seed": seed, "instances": checked, "draws": draws, "failures": failures, "worst_margin": worst, "all_pass": failures == 0}


def _run_minmax(config, w, threads):
    report = minmax_selftest(config.seed, config.instances)
    w.json("minmax.json", report)
    if not report["all_pass"]:
        raise ArithmeticError(f"{report['failures']} min-max verdicts failed")


_RUNNERS = {
    "bands": _run_bands,
    "convergence": _run_convergence,
    "limit2d": _run_limit2d,
    "figure3": _run_figure3,
    "certificate": _run_certificate,
    "curvature": _run_curvature,
    "isoperimetric": _run_isoperimetric,
    "minmax-selftest": _run_minmax,
}


def run(config: ExperimentConfig, out: str | Path = ".", threads: int | None = None) -> list[Path]:
    """Execute one experiment and return the files written."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    writer = _Writer(out, config)
    _RUNNERS[config.experiment](config, writer, threads or config.threads)
    return writer.written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bandgap", description="Floquet bands and gaps of periodic manifolds.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON experiment file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"bandgap: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
        if config.experiment != args.experiment:
            raise ConfigError("experiment", f"config is for {config.experiment!r}, subcommand is {args.experiment!r}")
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads", f"must be >= 1, got {args.threads}")
            config = replace(config, threads=args.threads)
    except ConfigError as exc:
        print(f"bandgap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        written = run(config, args.out)
    except ConfigError as exc:
        print(f"bandgap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"bandgap: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NUMERIC_ERRORS as exc:
        print(f"bandgap: numeric failure in {config.experiment}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
