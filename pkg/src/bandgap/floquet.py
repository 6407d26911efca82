"""Floquet sweep over the dual group, band assembly and gap detection."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import ConformalCell, ProfileCell
from .reduction import AngularMode, enumerate_modes, reduce_cell
from .spectral import ZERO_TOL, assemble, solve

__all__ = [
    "theta_grid",
    "BandFunction",
    "Band",
    "BandStructure",
    "GapReport",
    "band_sweep",
    "detect_gaps",
    "interval_gaps",
    "band_convergence",
    "ConvergenceRow",
    "end_mass_fraction",
]

log = logging.getLogger(__name__)

GAP_TOL = 1e-6


def theta_grid(T: int) -> np.ndarray:
    """``T`` samples of the half zone ``[0, pi]``, endpoints exact."""
    if T < 2:
        raise ValueError(f"need T >= 2 theta samples, got {T}")
    grid = np.arange(T) * (math.pi / (T - 1))
    grid[-1] = math.pi
    return grid


@dataclass(frozen=True)
class BandFunction:
    index: int
    values: np.ndarray
    modes: tuple[str, ...]


@dataclass(frozen=True)
class Band:
    index: int
    lo: float
    hi: float
    label: str = ""


@dataclass(frozen=True)
class BandStructure:
    thetas: np.ndarray
    functions: list[BandFunction]
    bands: list[Band]
    lam_max: float
    truncated: bool

    def __iter__(self):
        # Allows ``functions, bands = band_sweep(...)``.
        return iter((self.functions, self.bands))


@dataclass(frozen=True)
class GapReport:
    lam_max: float
    gaps: list[tuple[float, float]]

    @property
    def count(self) -> int:
        return len(self.gaps)

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lam_max,
            "gaps": [{"a": a, "b": b} for a, b in self.gaps],
            "count": self.count,
        }


def _theta_spectrum(cell, modes: list[AngularMode], theta: float, per_mode: int, cap: float):
    values, labels = [], []
    for mode in modes:
        pencil = assemble(reduce_cell(cell, mode, theta))
        k = min(per_mode, pencil.size)
        ev = solve(pencil, k).values
        ev = ev[ev <= cap]
        for lam in ev:
            values.extend([lam] * mode.multiplicity)
            labels.extend([mode.label] * mode.multiplicity)
    order = np.argsort(values, kind="stable")
    return np.asarray(values)[order], [labels[i] for i in order]


def band_sweep(cell, T: int = 33, lam_max: float = 40.0, k_max: int = 8, threads: int | None = None, margin: float = 0.25) -> BandStructure:
    """Sample the band functions ``lam_k(theta)`` on ``theta_grid(T)``.

    Modes are enumerated up to ``lam_max * (1 + margin)``; eigenvalues below
    that cap are complete.  A band is kept only if its eigenvalue is certified
    at every theta sample; dropping bands sets ``truncated``.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    thetas = theta_grid(T)
    cap = lam_max * (1.0 + margin)
    d = cell.d
    modes = enumerate_modes(d, cell, cap)
    if not modes:
        raise ValueError("mode enumeration is empty")

    def work(theta):
        try:
            return _theta_spectrum(cell, modes, theta, k_max, cap)
        except Exception as exc:
            raise type(exc)(f"{exc} (theta={theta:.6g})") from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(work, thetas))
    else:
        spectra = [work(t) for t in thetas]

    available = min(len(v) for v, _ in spectra)
    k_eff = min(k_max, available)
    truncated = k_eff < k_max
    if truncated:
        log.warning("band list truncated to %d of %d bands below %.6g", k_eff, k_max, cap)

    functions, bands = [], []
    for k in range(k_eff):
        vals = np.array([v[k] for v, _ in spectra])
        labs = tuple(lab[k] for _, lab in spectra)
        if k == 0 and available > 1:
            second = np.array([abs(v[1]) for v, _ in spectra])
            vals = np.where(np.abs(vals) <= ZERO_TOL * (1 + second), 0.0, vals)
        functions.append(BandFunction(index=k + 1, values=vals, modes=labs))
        bands.append(Band(index=k + 1, lo=float(vals.min()), hi=float(vals.max())))
    return BandStructure(thetas=thetas, functions=functions, bands=bands, lam_max=lam_max, truncated=truncated)


def interval_gaps(intervals, top: float, tol: float = GAP_TOL) -> list[tuple[float, float]]:
    """Open intervals of ``(0, top)`` not covered by the closed ``intervals``."""
    spans = sorted((float(lo), float(hi)) for lo, hi in intervals)
    gaps = []
    reach = None
    for lo, hi in spans:
        if lo >= top:
            break
        if reach is not None and lo - reach > tol and reach > 0:
            gaps.append((reach, lo))
        reach = hi if reach is None else max(reach, hi)
    return gaps


def detect_gaps(bands: list[Band], lam_max: float, tol: float = GAP_TOL) -> GapReport:
    """Gaps between bands below ``min(lam_max, hi of the top band)``."""
    if not bands:
        raise ValueError("no bands")
    top = min(lam_max, bands[-1].hi)
    return GapReport(lam_max=lam_max, gaps=interval_gaps([(b.lo, b.hi) for b in bands], top, tol))


@dataclass(frozen=True)
class ConvergenceRow:
    eps: float
    k: int
    lo: float
    hi: float
    reference: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def distance(self) -> float:
        return max(abs(self.lo - self.reference), abs(self.hi - self.reference))


def band_convergence(cells, reference, k_max: int, T: int = 17, lam_max: float | None = None, threads: int | None = None) -> list[ConvergenceRow]:
    """Distance of the first ``k_max`` bands to a limit spectrum, per eps.

    ``cells`` is a sequence of ``(eps, cell)`` pairs with eps descending.
    """
    ref = list(reference)
    if len(ref) < k_max:
        raise ValueError(f"reference has {len(ref)} values, need {k_max}")
    eps_values = [e for e, _ in cells]
    if len(eps_values) < 2 or any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ValueError("need at least two eps values in descending order")
    cap = lam_max if lam_max is not None else 1.5 * max(ref[:k_max]) + 1.0
    rows = []
    for eps, cell in cells:
        structure = band_sweep(cell, T=T, lam_max=cap, k_max=k_max, threads=threads)
        if structure.truncated:
            raise ValueError(f"fewer than {k_max} certified bands at eps={eps}")
        for band in structure.bands:
            rows.append(ConvergenceRow(eps=eps, k=band.index, lo=band.lo, hi=band.hi, reference=ref[band.index - 1]))
    return rows


def _default_region(cell):
    if isinstance(cell, ConformalCell):
        return [(0.0, cell.a), (cell.b, 1.0)]
    if cell.kind not in ("dumbbell", "cylinder-linked"):
        raise ValueError(f"no default end region for a {cell.kind} cell; pass region")
    width = 0.5 * cell.neck_length + 2.0 * cell.eps
    return [(0.0, width), (cell.length - width, cell.length)]


def end_mass_fraction(cell, theta: float, region=None, mode: AngularMode | None = None) -> float:
    """Share of the first nonconstant eigenfunction's mass inside ``region``.

    The eigenfunction is the rotationally symmetric one (``l = 0``): the
    second at ``theta = 0`` (the first is constant), the first otherwise.
    ``region`` defaults to the cylindrical ends ``[0, 2eps]`` and
    ``[S - 2eps, S]`` (widened by any inserted cylinder) for profile cells and
    to the deformed part outside ``[a, b]`` for conformal cells.
    """
    from .reduction import angular_mode

    mode = mode or angular_mode(cell.d, 0)
    pencil = assemble(reduce_cell(cell, mode, theta))
    k = 2 if abs(math.remainder(theta, 2 * math.pi)) < 1e-12 else 1
    result = solve(pencil, k, vectors=True)
    u = pencil.full_vector(result.vectors[:, k - 1])
    slp = reduce_cell(cell, mode, theta)
    s = slp.grid
    h = np.diff(s)
    mm = 0.5 * (slp.m[1:] + slp.m[:-1])
    ua, ub = u[:-1], u[1:]
    # Exact P1 mass per element: h m (|ua|^2 + Re(ua conj ub) + |ub|^2) / 3.
    local = h * mm * (np.abs(ua) ** 2 + np.real(ua * np.conj(ub)) + np.abs(ub) ** 2) / 3.0
    mid = 0.5 * (s[1:] + s[:-1])
    region = region if region is not None else _default_region(cell)
    inside = np.zeros_like(mid, dtype=bool)
    for lo, hi in region:
        inside |= (mid >= lo) & (mid <= hi)
    return float(local[inside].sum() / local.sum())
