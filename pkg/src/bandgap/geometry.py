"""Period cells of the periodic manifolds and their geometric diagnostics.

Two carriers are provided.  A :class:`ProfileCell` is a warped product
``[0, S] x S^{d-1}`` with metric ``ds^2 + f(s)^2 dsigma^2``; dumbbell chains,
cylinder-linked chains and straight cylinders are all of this form.  A
:class:`ConformalCell` is the flat cylinder ``[0, 1] x S^{d-1}_r`` carrying a
conformal factor ``rho(x)`` that equals 1 on the protected region ``[a, b]``
and ``eps`` away from it.

Every cell is sampled on a 1-D grid; arrays are frozen after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshSpec",
    "ProfileCell",
    "ConformalCell",
    "CurvatureReport",
    "IsoperimetricBound",
    "smoothstep",
    "neck_radius",
    "neck_cutoff",
    "dumbbell_profile",
    "conformal_factor",
    "dumbbell_cell",
    "cylinder_linked_cell",
    "flat_cylinder_cell",
    "conformal_cell",
    "profile_curvature",
    "sectional_curvature",
    "conformal_curvature",
    "sphere_area",
    "isoperimetric_slice_bound",
    "cell_to_json",
    "cell_from_json",
]

# Largest admissible neck radius; twice it must stay below the injectivity
# scale of the unit sphere used as base manifold.
EPS_MAX = 0.25
MIN_COLLAR_INTERVALS = 8
_GLUE_RTOL = 1e-8


@dataclass(frozen=True)
class MeshSpec:
    """Grid resolution for cell construction.

    ``h_body`` is the spacing away from the necks (``None`` means
    ``S / 400``).  Near a neck or a conformal transition the spacing is the
    local length scale divided by ``neck_divisions``.
    """

    h_body: float | None = None
    neck_divisions: int = 16

    def body_spacing(self, length: float) -> float:
        if self.h_body is None:
            return length / 400.0
        if self.h_body <= 0:
            raise ValueError(f"mesh h_body must be positive, got {self.h_body}")
        return float(self.h_body)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _segment(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = max(1, int(math.ceil((hi - lo) / spacing - 1e-9)))
    return np.linspace(lo, hi, n + 1)


def _join(*segments: np.ndarray) -> np.ndarray:
    parts = [segments[0]] + [seg[1:] for seg in segments[1:]]
    return np.concatenate(parts)


@dataclass(frozen=True)
class ProfileCell:
    """Warped-product period cell with profile ``f`` sampled on ``grid``."""

    d: int
    grid: np.ndarray
    profile: np.ndarray
    eps: float
    collar: float = 0.0
    kind: str = "custom"
    neck_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "grid", _frozen(self.grid))
        object.__setattr__(self, "profile", _frozen(self.profile))
        self.validate()

    @property
    def length(self) -> float:
        return float(self.grid[-1])

    @property
    def n_intervals(self) -> int:
        return len(self.grid) - 1

    def profile_at(self, s) -> np.ndarray | float:
        """Piecewise-linear interpolation of the sampled profile."""
        return np.interp(s, self.grid, self.profile)

    def validate(self) -> None:
        s, f = self.grid, self.profile
        if self.d < 2:
            raise ValueError(f"dimension d must be >= 2, got {self.d}")
        if s.ndim != 1 or s.shape != f.shape or len(s) < 3:
            raise ValueError("grid and profile must be 1-D arrays of equal length >= 3")
        if s[0] != 0.0:
            raise ValueError("grid must start at s = 0")
        if np.any(np.diff(s) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(f <= 0):
            raise ValueError("profile must be positive")
        if abs(f[0] - f[-1]) > _GLUE_RTOL * max(f[0], f[-1]):
            raise ValueError(f"ends do not glue: f(0)={f[0]!r}, f(S)={f[-1]!r}")
        # One-sided slopes at the seam may differ by O(h * f'') only.
        slopes = np.diff(f) / np.diff(s)
        bend = np.max(np.abs(np.diff(slopes))) if len(slopes) > 1 else 0.0
        if abs(slopes[0] - slopes[-1]) > 2.0 * bend + 1e-9:
            raise ValueError("profile is not C^1 across the glued ends")
        if self.collar > 0:
            left = s <= self.collar * (1 + 1e-12)
            right = s >= (s[-1] - self.collar * (1 + 1e-12))
            if np.any(f[left | right] != self.eps):
                raise ValueError("profile must equal eps on the end collars")
        if self.kind in ("dumbbell", "cylinder-linked"):
            lo, hi = self.collar - 0.5 * self.eps, self.collar
            nodes = (s >= lo * (1 - 1e-12)) & (s <= hi * (1 + 1e-12))
            inside = np.count_nonzero(nodes) - 1
            if inside < MIN_COLLAR_INTERVALS:
                raise ValueError(
                    f"mesh too coarse: {inside} intervals in [0, eps/2], "
                    f"need at least {MIN_COLLAR_INTERVALS}"
                )


@dataclass(frozen=True)
class ConformalCell:
    """Flat cylinder cell ``[0, 1] x S^{d-1}_r`` with conformal factor ``rho``."""

    d: int
    r: float
    a: float
    b: float
    eps: float
    grid: np.ndarray
    rho: np.ndarray
    kind: str = field(default="conformal")

    def __post_init__(self):
        object.__setattr__(self, "grid", _frozen(self.grid))
        object.__setattr__(self, "rho", _frozen(self.rho))
        x, rho = self.grid, self.rho
        if self.d < 2:
            raise ValueError(f"dimension d must be >= 2, got {self.d}")
        if x.shape != rho.shape or len(x) < 3:
            raise ValueError("grid and rho must have equal length >= 3")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("grid must increase strictly from 0 to 1")
        if np.any(rho <= 0) or np.any(rho > 1):
            raise ValueError("conformal factor must lie in (0, 1]")

    @property
    def length(self) -> float:
        return 1.0

    @property
    def protected_length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class CurvatureReport:
    grid: np.ndarray
    radial: np.ndarray
    spherical: np.ndarray | None
    max_abs: float


@dataclass(frozen=True)
class IsoperimetricBound:
    nu: float
    value: float
    slice: tuple[float, float]


def smoothstep(t):
    """Quintic smoothstep ``6t^5 - 15t^4 + 10t^3`` clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_integral(t):
    # Antiderivative of the smoothstep with value 0 at t=0, continued linearly
    # (slope 1) beyond t=1.
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    inner = tc**6 - 3.0 * tc**5 + 2.5 * tc**4
    return inner + np.maximum(t - 1.0, 0.0)


def neck_radius(s, eps: float):
    """Monotone C^2 radius equal to ``eps`` on [0, eps/2] and to ``s`` from 3eps/2 on.

    Its derivative ramps from 0 to 1 by a smoothstep over ``[eps/2, 3eps/2]``;
    integrating the ramp lands exactly on the identity.
    """
    s = np.asarray(s, dtype=float)
    return eps + eps * _smoothstep_integral((s - 0.5 * eps) / eps)


def neck_cutoff(s, eps: float):
    """Cut-off that vanishes for ``s <= eps`` and equals 1 for ``s >= 2 eps``."""
    return smoothstep((np.asarray(s, dtype=float) - eps) / eps)


def _half_profile(s, eps):
    s = np.asarray(s, dtype=float)
    chi = neck_cutoff(s, eps)
    r = neck_radius(s, eps)
    sin = np.sin(s)
    blended = np.sqrt(chi * sin * sin + (1.0 - chi) * r * r)
    out = np.where(chi >= 1.0, sin, blended)
    return np.where(chi <= 0.0, r, out)


def dumbbell_profile(s, eps: float):
    """Profile of the unit sphere with both poles opened into necks of radius eps.

    The cross-sectional metric is the convex combination
    ``chi h_s + (1 - chi) r^2 dsigma^2`` with ``h_s = sin(s)^2 dsigma^2``,
    mirrored about the equator.
    """
    s = np.asarray(s, dtype=float)
    near = np.minimum(s, math.pi - s)
    out = _half_profile(near, eps)
    return out if out.ndim else float(out)


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < EPS_MAX):
        raise ValueError(f"eps must lie in (0, {EPS_MAX}), got {eps}")


def _dumbbell_grid(eps: float, spacing_body: float, divisions: int) -> np.ndarray:
    neck = 2.0 * eps
    h_neck = min(eps / divisions, spacing_body)
    return _join(
        _segment(0.0, neck, h_neck),
        _segment(neck, math.pi - neck, spacing_body),
        math.pi - _segment(0.0, neck, h_neck)[::-1],
    )


def dumbbell_cell(d: int, eps: float, mesh: MeshSpec | None = None) -> ProfileCell:
    """Period cell of the dumbbell chain built from the round sphere ``S^d``."""
    return cylinder_linked_cell(d, eps, 0.0, mesh)


def cylinder_linked_cell(d: int, eps: float, L: float, mesh: MeshSpec | None = None) -> ProfileCell:
    """Dumbbell cell with a straight cylinder of length ``L`` and radius ``eps``.

    Half of the inserted cylinder sits at each end so that the cell stays
    symmetric; ``L = 0`` gives :func:`dumbbell_cell` exactly.
    """
    if d < 2:
        raise ValueError(f"dimension d must be >= 2, got {d}")
    _check_eps(eps)
    if L < 0:
        raise ValueError(f"cylinder length L must be >= 0, got {L}")
    mesh = mesh or MeshSpec()
    spacing = mesh.body_spacing(math.pi + L)
    core = _dumbbell_grid(eps, spacing, mesh.neck_divisions)
    f_core = dumbbell_profile(core, eps)
    if L == 0:
        grid, profile = core, f_core
        kind = "dumbbell"
    else:
        half = 0.5 * L
        tube = _segment(0.0, half, spacing)
        grid = _join(tube, core + half, math.pi + half + tube)
        profile = np.concatenate([np.full(len(tube) - 1, eps), f_core, np.full(len(tube) - 1, eps)])
        kind = "cylinder-linked"
    return ProfileCell(
        d=d, grid=grid, profile=profile, eps=eps, collar=0.5 * L + 0.5 * eps, kind=kind, neck_length=L
    )


def flat_cylinder_cell(d: int, radius: float, S: float, mesh: MeshSpec | None = None) -> ProfileCell:
    """Straight cylinder of the given radius and cell length (uniform grid)."""
    if d < 2:
        raise ValueError(f"dimension d must be >= 2, got {d}")
    if radius <= 0 or S <= 0:
        raise ValueError("radius and S must be positive")
    mesh = mesh or MeshSpec()
    grid = _segment(0.0, S, mesh.body_spacing(S))
    return ProfileCell(d=d, grid=grid, profile=np.full(len(grid), float(radius)), eps=float(radius), kind="flat-cylinder")


def conformal_factor(x, a: float, b: float, eps: float, d: int):
    """Factor equal to 1 on [a, b], ``eps`` at distance >= eps^d, smoothstep between."""
    x = np.asarray(x, dtype=float)
    width = eps**d
    dist = np.maximum(np.maximum(a - x, x - b), 0.0)
    out = 1.0 - (1.0 - eps) * smoothstep(dist / width)
    out = np.where(dist >= width, eps, out)
    return out if out.ndim else float(out)


def conformal_cell(d: int, r: float, a: float, b: float, eps: float, mesh: MeshSpec | None = None) -> ConformalCell:
    if d < 2:
        raise ValueError(f"dimension d must be >= 2, got {d}")
    if not (0.0 < a < b < 1.0):
        raise ValueError(f"need 0 < a < b < 1, got a={a}, b={b}")
    if r <= 0:
        raise ValueError(f"radius r must be positive, got {r}")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    width = eps**d
    if width >= min(a, 1.0 - b):
        raise ValueError(
            f"transition width eps^d={width:g} overlaps the period boundary "
            f"(need eps < min(a, 1-b)^(1/d) = {min(a, 1 - b) ** (1 / d):g})"
        )
    mesh = mesh or MeshSpec()
    h = mesh.body_spacing(1.0)
    h_fine = min(width / mesh.neck_divisions, h)
    grid = _join(
        _segment(0.0, a - width, h),
        _segment(a - width, a, h_fine),
        _segment(a, b, h),
        _segment(b, b + width, h_fine),
        _segment(b + width, 1.0, h),
    )
    return ConformalCell(d=d, r=float(r), a=float(a), b=float(b), eps=float(eps), grid=grid, rho=conformal_factor(grid, a, b, eps, d))


def _derivatives(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(x) < 3:
        raise ValueError("curvature needs a grid with at least 3 points")
    first = np.gradient(y, x, edge_order=2)
    hm = np.diff(x)[:-1]
    hp = np.diff(x)[1:]
    inner = 2.0 * ((y[2:] - y[1:-1]) / hp - (y[1:-1] - y[:-2]) / hm) / (hp + hm)
    second = np.concatenate([inner[:1], inner, inner[-1:]])
    return first, second


def profile_curvature(s, f, d: int) -> CurvatureReport:
    """Sectional curvatures of ``ds^2 + f(s)^2 dsigma^2``.

    ``K_rad = -f''/f`` on planes containing ``d/ds``; for ``d >= 3`` also
    ``K_sph = (1 - f'^2)/f^2`` on planes tangent to the cross-section.
    """
    s = np.asarray(s, dtype=float)
    f = np.asarray(f, dtype=float)
    df, ddf = _derivatives(s, f)
    radial = -ddf / f
    spherical = (1.0 - df * df) / (f * f) if d >= 3 else None
    peak = np.max(np.abs(radial))
    if spherical is not None:
        peak = max(peak, np.max(np.abs(spherical)))
    return CurvatureReport(grid=s, radial=radial, spherical=spherical, max_abs=float(peak))


def sectional_curvature(cell: ProfileCell) -> CurvatureReport:
    return profile_curvature(cell.grid, cell.profile, cell.d)


def conformal_curvature(cell: ConformalCell) -> CurvatureReport:
    """Curvature terms induced by the conformal factor on the flat product.

    Uses ``K_rad = rho^5 (-rho'')`` and ``K_sph = rho^6 (-rho'^2)``, i.e. the
    background-free part of the conformal curvature formula.
    """
    rho = cell.rho
    drho, ddrho = _derivatives(cell.grid, rho)
    radial = rho**5 * (-ddrho)
    spherical = rho**6 * (-(drho**2)) if cell.d >= 3 else None
    peak = np.max(np.abs(radial))
    if spherical is not None:
        peak = max(peak, np.max(np.abs(spherical)))
    return CurvatureReport(grid=cell.grid, radial=radial, spherical=spherical, max_abs=float(peak))


def sphere_area(k: int) -> float:
    """Area of the unit sphere ``S^k``."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def isoperimetric_slice_bound(cell: ProfileCell, nu: float) -> IsoperimetricBound:
    """Upper bound on the nu-isoperimetric constant from slices ``(s1, s2) x S^{d-1}``.

    Minimizes ``area(boundary)^nu / volume^(nu-1)`` over all pairs of grid
    nodes; volumes use the trapezoidal rule on the cell grid.
    """
    if nu <= 1:
        raise ValueError(f"nu must be > 1, got {nu}")
    s = cell.grid
    sigma = sphere_area(cell.d - 1)
    w = cell.profile ** (cell.d - 1)
    vol = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(s))]) * sigma
    area = sigma * w
    best, where = math.inf, (0, 0)
    for i in range(len(s) - 1):
        ratio = (area[i] + area[i + 1 :]) ** nu / (vol[i + 1 :] - vol[i]) ** (nu - 1)
        j = int(np.argmin(ratio))
        if ratio[j] < best:
            best, where = float(ratio[j]), (i, i + 1 + j)
    return IsoperimetricBound(nu=float(nu), value=best, slice=(float(s[where[0]]), float(s[where[1]])))


def cell_to_json(cell: ProfileCell | ConformalCell) -> str:
    if isinstance(cell, ProfileCell):
        payload = {
            "type": "profile",
            "kind": cell.kind,
            "d": cell.d,
            "eps": cell.eps,
            "collar": cell.collar,
            "neck_length": cell.neck_length,
            "grid": cell.grid.tolist(),
            "profile": cell.profile.tolist(),
        }
    else:
        payload = {
            "type": "conformal",
            "d": cell.d,
            "r": cell.r,
            "a": cell.a,
            "b": cell.b,
            "eps": cell.eps,
            "grid": cell.grid.tolist(),
            "rho": cell.rho.tolist(),
        }
    return json.dumps(payload)


def cell_from_json(text: str) -> ProfileCell | ConformalCell:
    data = json.loads(text)
    kind = data.pop("type")
    if kind == "profile":
        return ProfileCell(**data)
    if kind == "conformal":
        return ConformalCell(**data)
    raise ValueError(f"unknown cell type {kind!r}")
