"""Closed-form oracles: limit spectra and the exact two-dimensional dispersion
relations of the conformally deformed cylinder."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .floquet import interval_gaps, theta_grid
from .reduction import angular_mode

__all__ = [
    "RootBracketError",
    "SpectrumEntry",
    "LimitSpectrum",
    "interval_spectrum",
    "sphere_spectrum",
    "product_neumann_spectrum",
    "chain_limit_spectrum",
    "secular_n0",
    "secular_n",
    "dispersion_n0",
    "dispersion_n",
    "DispersionCurve",
    "Limit2DBands",
    "limit2d_bands",
    "figure3_curves",
    "GapCertificate",
    "gap_certificate",
]

SCAN_POINTS = 512
REL_TOL = 1e-12


class RootBracketError(RuntimeError):
    """No sign change where the dispersion relation must have a root."""


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    multiplicity: int
    label: str


@dataclass(frozen=True)
class LimitSpectrum:
    entries: tuple[SpectrumEntry, ...]

    def __post_init__(self):
        vals = [e.value for e in self.entries]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("limit spectrum must be ascending")
        if any(e.multiplicity < 1 for e in self.entries):
            raise ValueError("multiplicities must be >= 1")

    @property
    def values(self) -> list[float]:
        """Eigenvalues repeated according to multiplicity."""
        out = []
        for e in self.entries:
            out.extend([e.value] * e.multiplicity)
        return out

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return sum(e.multiplicity for e in self.entries)

    def first(self, count: int) -> "LimitSpectrum":
        """Truncate to ``count`` eigenvalues counted with multiplicity."""
        kept, left = [], count
        for e in self.entries:
            if left <= 0:
                break
            take = min(left, e.multiplicity)
            kept.append(SpectrumEntry(e.value, take, e.label))
            left -= take
        return LimitSpectrum(tuple(kept))


def _merged(entries) -> LimitSpectrum:
    return LimitSpectrum(tuple(sorted(entries, key=lambda e: (e.value, e.label))))


def interval_spectrum(L: float, bc: str, count: int) -> LimitSpectrum:
    """``(m pi / L)^2`` with ``m >= 1`` (Dirichlet) or ``m >= 0`` (Neumann)."""
    if L <= 0:
        raise ValueError(f"interval length must be positive, got {L}")
    bc = bc.lower()
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    start = 1 if bc == "dirichlet" else 0
    return LimitSpectrum(tuple(SpectrumEntry((m * math.pi / L) ** 2, 1, f"interval-{m}") for m in range(start, start + count)))


def sphere_spectrum(d: int, count: int) -> LimitSpectrum:
    """First ``count`` distinct eigenvalues ``l (l + d - 1)`` of the round ``S^d``."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    entries = []
    for l in range(count):
        mult = comb(l + d, l) - (comb(l + d - 2, l - 2) if l >= 2 else 0)
        entries.append(SpectrumEntry(float(l * (l + d - 1)), mult, f"sphere-{l}"))
    return LimitSpectrum(tuple(entries))


def product_neumann_spectrum(r: float, L: float, d: int, count: int) -> LimitSpectrum:
    """Neumann spectrum of ``[0, L] x S^{d-1}_r``: ``(m pi/L)^2 + mu_l / r^2``."""
    if r <= 0 or L <= 0:
        raise ValueError("r and L must be positive")
    if d < 3:
        raise ValueError("product limit only applies for d >= 3")
    entries = []
    for m in range(count):
        for l in range(count):
            mode = angular_mode(d, l)
            entries.append(SpectrumEntry((m * math.pi / L) ** 2 + mode.mu / r**2, mode.multiplicity, f"product-({m},{l})"))
    entries.sort(key=lambda e: (e.value, e.label))
    return LimitSpectrum(tuple(entries[:count]))


def chain_limit_spectrum(kind: str, d: int, L: float | None = None, count: int = 8) -> LimitSpectrum:
    """Limit of the chain spectra as the necks close, ``count`` values with multiplicity.

    Dumbbell chains collapse onto the sphere spectrum; cylinder-linked chains
    add the Dirichlet spectrum of the connecting interval.
    """
    if kind == "dumbbell":
        entries = list(sphere_spectrum(d, count).entries)
    elif kind == "cylinder-linked":
        if L is None or L <= 0:
            raise ValueError("cylinder-linked limit needs L > 0")
        entries = list(sphere_spectrum(d, count).entries) + list(interval_spectrum(L, "dirichlet", count).entries)
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    return _merged(entries).first(count)


# Dispersion relations ---------------------------------------------------------


def secular_n0(omega, L: float, theta: float):
    """``2 (cos(L w) - cos(theta)) - (1 - L) w sin(L w)``; zero on the n = 0 branches."""
    omega = np.asarray(omega, dtype=float)
    return 2.0 * (np.cos(L * omega) - math.cos(theta)) - (1.0 - L) * omega * np.sin(L * omega)


def _hyperbolic(x: float) -> tuple[float, float]:
    # coth(x) and 1/sinh(x) without overflow for large x.
    e = math.exp(-x)
    return (1.0 + e * e) / (1.0 - e * e), 2.0 * e / (1.0 - e * e)


def secular_n(omega, L: float, r: float, n: int, theta: float):
    """Angular mode ``n != 0``: ``(w^2 - k^2) sin(L w) - 2 w k (coth(l k) cos(L w) - cos(theta)/sinh(l k))``, ``k = n/r``."""
    omega = np.asarray(omega, dtype=float)
    k = n / r
    coth, csch = _hyperbolic((1.0 - L) * k)
    return (omega**2 - k * k) * np.sin(L * omega) - 2.0 * omega * k * (coth * np.cos(L * omega) - math.cos(theta) * csch)


def _bisect(func, lo: float, hi: float, flo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= REL_TOL * max(abs(mid), 1e-300):
            break
        fmid = func(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_L(L):
    if not (0.0 < L < 1.0):
        raise ValueError(f"need 0 < L < 1, got {L}")


def dispersion_n0(L: float, theta: float, m: int) -> float:
    """Root ``w_m(theta)`` of the n = 0 relation in ``[m pi/L, (m+1) pi/L]``.

    A root sitting exactly on a bracket endpoint (``theta`` in ``{0, pi}``) is
    assigned to the branch it bounds from below.
    """
    _check_L(L)
    if m < 0:
        raise ValueError(f"branch index must be >= 0, got {m}")
    lo, hi = m * math.pi / L, (m + 1) * math.pi / L
    xs = np.linspace(lo, hi, SCAN_POINTS + 1)
    fs = secular_n0(xs, L, theta)
    scale = 2.0 + (1.0 - L) * hi
    tiny = 1e-12 * scale
    if abs(fs[0]) <= tiny:
        return float(lo)
    if abs(fs[-1]) <= tiny:
        # The right endpoint root belongs to the next branch; look just inside.
        xs[-1] = hi - 1e-9 * (hi - lo)
        fs[-1] = secular_n0(xs[-1], L, theta)
    changes = np.nonzero(np.signbit(fs[1:]) != np.signbit(fs[:-1]))[0]
    if len(changes) == 0:
        raise RootBracketError(f"no sign change for m={m}, theta={theta}: F samples {fs[[0, SCAN_POINTS // 2, -1]].tolist()}")
    if len(changes) > 1:
        warnings.warn(f"branch m={m} at theta={theta:.6g} has {len(changes)} sign changes; using the first", RuntimeWarning)
    i = int(changes[0])
    return float(_bisect(lambda w: float(secular_n0(w, L, theta)), xs[i], xs[i + 1], fs[i]))


def dispersion_n(L: float, r: float, n: int, theta: float, p: int, omega_cap: float | None = None) -> float:
    """``eta_{n,p}(theta) = sqrt(w^2 + n^2/r^2)`` for the ``p``-th positive root ``w``."""
    _check_L(L)
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    step = math.pi / L
    cap = omega_cap if omega_cap is not None else (p + 4) * step + n / r
    roots = []
    lo = 0.0
    func = lambda w: float(secular_n(w, L, r, n, theta))  # noqa: E731
    while lo < cap and len(roots) < p:
        hi = min(lo + step, cap)
        xs = np.linspace(lo, hi, SCAN_POINTS + 1)
        if lo == 0.0:
            xs[0] = 1e-9 * step  # w = 0 is a trivial root
        fs = secular_n(xs, L, r, n, theta)
        for i in np.nonzero(np.signbit(fs[1:]) != np.signbit(fs[:-1]))[0]:
            roots.append(_bisect(func, xs[i], xs[i + 1], fs[i]))
        lo = hi
    if len(roots) < p:
        raise RootBracketError(f"only {len(roots)} roots below omega={cap:g} for n={n}, theta={theta}")
    omega = float(roots[p - 1])
    return math.sqrt(omega * omega + (n / r) ** 2)


@dataclass(frozen=True)
class DispersionCurve:
    branch: tuple[int, ...]
    thetas: np.ndarray
    values: np.ndarray
    L: float
    r: float

    @property
    def label(self) -> str:
        if len(self.branch) == 1:
            return f"m={self.branch[0]}"
        return f"n={self.branch[0]},p={self.branch[1]}"

    @property
    def band(self) -> tuple[float, float]:
        sq = self.values**2
        return float(sq.min()), float(sq.max())


@dataclass(frozen=True)
class Limit2DBands:
    L: float
    r: float
    lam_max: float
    curves: list[DispersionCurve]
    gaps: list[tuple[float, float]]

    def band(self, label: str) -> tuple[float, float]:
        for c in self.curves:
            if c.label == label:
                return c.band
        raise KeyError(label)

    @property
    def bands(self) -> dict[str, tuple[float, float]]:
        return {c.label: c.band for c in self.curves}


def _n0_curve(L, r, m, thetas):
    return DispersionCurve((m,), thetas, np.array([dispersion_n0(L, t, m) for t in thetas]), L, r)


def _n_curve(L, r, n, p, thetas):
    return DispersionCurve((n, p), thetas, np.array([dispersion_n(L, r, n, t, p) for t in thetas]), L, r)


def limit2d_bands(L: float, r: float, lam_max: float, T: int = 65) -> Limit2DBands:
    """Bands of the limit operator over ``theta in [0, pi]`` and their gaps below ``lam_max``."""
    _check_L(L)
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if T < 9:
        raise ValueError(f"need T >= 9, got {T}")
    thetas = theta_grid(T)
    curves = []
    m = 0
    while (m * math.pi / L) ** 2 <= lam_max:
        curves.append(_n0_curve(L, r, m, thetas))
        m += 1
    n = 1
    while (n / r) ** 2 <= lam_max:
        p = 1
        while True:
            curve = _n_curve(L, r, n, p, thetas)
            if curve.band[0] > lam_max:
                break
            curves.append(curve)
            p += 1
        n += 1
    gaps = interval_gaps([c.band for c in curves], lam_max)
    return Limit2DBands(L=L, r=r, lam_max=lam_max, curves=curves, gaps=gaps)


def figure3_curves(L: float, r: float, T: int = 65, branches_m: int = 5, branches_np=((1, 1),)) -> list[DispersionCurve]:
    """Branches ``w_m`` and ``eta_{n,p}`` over the full zone ``[0, 2 pi]``."""
    half = theta_grid(T)
    thetas = np.concatenate([half, 2 * math.pi - half[-2::-1]])
    curves = []
    for m in range(branches_m):
        c = _n0_curve(L, r, m, half)
        curves.append(DispersionCurve(c.branch, thetas, np.concatenate([c.values, c.values[-2::-1]]), L, r))
    for n, p in branches_np:
        c = _n_curve(L, r, n, p, half)
        curves.append(DispersionCurve(c.branch, thetas, np.concatenate([c.values, c.values[-2::-1]]), L, r))
    return curves


@dataclass(frozen=True)
class GapCertificate:
    L: float
    r: float
    m: int
    threshold: float
    certified: bool

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "r": self.r,
            "m": self.m,
            "threshold": self.threshold,
            "verdict": "certified" if self.certified else "not-certified",
        }


def gap_certificate(L: float, r: float, m: int) -> GapCertificate:
    """At least ``m`` gaps are guaranteed when ``r <= L / (m pi)``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    threshold = L / (m * math.pi)
    return GapCertificate(L=L, r=r, m=m, threshold=threshold, certified=r <= threshold)
