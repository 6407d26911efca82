"""Separation of variables: one 1-D Sturm-Liouville problem per angular mode."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .geometry import ConformalCell, ProfileCell

__all__ = [
    "AngularMode",
    "SturmLiouvilleProblem",
    "BOUNDARY_CONDITIONS",
    "angular_mode",
    "mode_floor",
    "enumerate_modes",
    "reduce_profile",
    "reduce_conformal",
    "reduce_cell",
]

BOUNDARY_CONDITIONS = ("quasi-periodic", "dirichlet", "neumann", "neumann-dirichlet", "dirichlet-neumann")


@dataclass(frozen=True)
class AngularMode:
    """Spherical harmonic degree ``l`` on ``S^{d-1}``."""

    degree: int
    mu: float
    multiplicity: int

    @property
    def label(self) -> str:
        return f"l={self.degree}"


def angular_mode(d: int, degree: int) -> AngularMode:
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    n = d - 1  # dimension of the cross-section sphere
    mult = comb(degree + n, degree) - (comb(degree + n - 2, degree - 2) if degree >= 2 else 0)
    return AngularMode(degree=degree, mu=float(degree * (degree + d - 2)), multiplicity=mult)


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    """``-(p u')' + q u = lam m u`` on ``grid`` with a boundary condition.

    ``theta`` is only used for quasi-periodic conditions, where the solution
    satisfies ``u(S) = exp(i theta) u(0)`` (and likewise for the flux).
    """

    grid: np.ndarray
    p: np.ndarray
    q: np.ndarray
    m: np.ndarray
    bc: str = "quasi-periodic"
    theta: float = 0.0

    def __post_init__(self):
        for name in ("grid", "p", "q", "m"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        n = len(self.grid)
        if any(len(a) != n for a in (self.p, self.q, self.m)):
            raise ValueError("coefficient arrays must match the grid")
        if np.any(self.p <= 0) or np.any(self.m <= 0):
            raise ValueError("stiffness p and mass m must be positive")
        if np.any(self.q < 0):
            raise ValueError("potential q must be nonnegative")

    def with_bc(self, bc: str, theta: float = 0.0) -> "SturmLiouvilleProblem":
        return SturmLiouvilleProblem(self.grid, self.p, self.q, self.m, bc=bc, theta=theta)


def mode_floor(cell: ProfileCell | ConformalCell) -> float:
    """Lower bound of ``q/m`` per unit ``mu`` over the cell."""
    if isinstance(cell, ProfileCell):
        return float(np.min(cell.profile ** -2.0))
    return float(np.min(1.0 / (cell.r**2 * cell.rho**2)))


def enumerate_modes(d: int, cell: ProfileCell | ConformalCell, lam_max: float) -> list[AngularMode]:
    """All angular modes that can carry an eigenvalue ``<= lam_max``.

    A mode with ``mu * floor > lam_max`` has Rayleigh quotient above
    ``lam_max`` for every trial function, so dropping it loses nothing below
    the cap.
    """
    if lam_max <= 0:
        raise ValueError(f"lam_max must be positive, got {lam_max}")
    if len(cell.grid) < 2:
        raise ValueError("empty cell")
    floor = mode_floor(cell)
    modes = []
    degree = 0
    while True:
        mode = angular_mode(d, degree)
        if mode.mu * floor > lam_max:
            return modes
        modes.append(mode)
        degree += 1


def _bc_args(theta, bc):
    if bc is None:
        bc = "quasi-periodic"
    return bc, (0.0 if theta is None else float(theta))


def reduce_profile(cell: ProfileCell, mode: AngularMode, theta: float | None = None, bc: str | None = None) -> SturmLiouvilleProblem:
    """Mode form ``int (|u'|^2 + mu f^-2 |u|^2) f^(d-1) ds``."""
    bc, theta = _bc_args(theta, bc)
    f, d = cell.profile, cell.d
    return SturmLiouvilleProblem(
        grid=cell.grid,
        p=f ** (d - 1),
        q=mode.mu * f ** (d - 3),
        m=f ** (d - 1),
        bc=bc,
        theta=theta,
    )


def reduce_conformal(cell: ConformalCell, mode: AngularMode, theta: float | None = None, bc: str | None = None) -> SturmLiouvilleProblem:
    """Mode form of ``int |du|^2 rho^(d-2)`` against ``int |u|^2 rho^d``."""
    bc, theta = _bc_args(theta, bc)
    rho, d = cell.rho, cell.d
    stiff = rho ** (d - 2)
    return SturmLiouvilleProblem(
        grid=cell.grid,
        p=stiff,
        q=mode.mu * stiff / cell.r**2,
        m=rho**d,
        bc=bc,
        theta=theta,
    )


def reduce_cell(cell, mode, theta=None, bc=None) -> SturmLiouvilleProblem:
    if isinstance(cell, ConformalCell):
        return reduce_conformal(cell, mode, theta, bc)
    return reduce_profile(cell, mode, theta, bc)
