"""Piecewise-linear finite elements for the reduced problems, plus the
finite-dimensional eigenvalue comparison engine."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .reduction import SturmLiouvilleProblem

__all__ = [
    "SolverError",
    "HermitianPencil",
    "EigenResult",
    "MinmaxInstance",
    "MinmaxReport",
    "assemble",
    "solve",
    "convergence_order",
    "minmax_compare",
    "ZERO_TOL",
    "random_minmax_instance",
]

ZERO_TOL = 1e-8


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class HermitianPencil:
    """Stiffness/mass pair ``(A, B)`` on the free nodal values.

    ``nodes`` lists which grid nodes the unknowns are; ``closure`` gives the
    phase linking the last grid node to node 0 (quasi-periodic case) or is
    ``None``.
    """

    A: np.ndarray
    B: np.ndarray
    nodes: np.ndarray
    n_grid: int
    closure: complex | None = None

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def full_vector(self, v: np.ndarray) -> np.ndarray:
        """Expand a free-node vector to all grid nodes."""
        out = np.zeros(self.n_grid, dtype=complex)
        out[self.nodes] = v
        if self.closure is not None:
            out[-1] = self.closure * v[0]
        return out


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray | None = None
    residuals: np.ndarray | None = None


def _element_matrices(slp: SturmLiouvilleProblem):
    h = np.diff(slp.grid)
    pm = 0.5 * (slp.p[1:] + slp.p[:-1])
    qm = 0.5 * (slp.q[1:] + slp.q[:-1])
    mm = 0.5 * (slp.m[1:] + slp.m[:-1])
    a_diag = pm / h + qm * h / 3.0
    a_off = -pm / h + qm * h / 6.0
    b_diag = mm * h / 3.0
    b_off = mm * h / 6.0
    return a_diag, a_off, b_diag, b_off


def _main_diagonal(diag_el, n_nodes):
    main = np.zeros(n_nodes)
    main[:-1] += diag_el
    main[1:] += diag_el
    return main


def assemble(slp: SturmLiouvilleProblem) -> HermitianPencil:
    """Conforming P1 discretization with per-element midpoint coefficients."""
    n = len(slp.grid)
    if n < 3:
        raise ValueError("need at least 3 grid points")
    a_diag, a_off, b_diag, b_off = _element_matrices(slp)
    a_main = _main_diagonal(a_diag, n)
    b_main = _main_diagonal(b_diag, n)

    if slp.bc == "quasi-periodic":
        phase = cmath.exp(1j * slp.theta)
        if slp.theta in (0.0, math.pi):
            phase = complex(round(phase.real), 0.0)
        size = n - 1
        dtype = float if phase.imag == 0 else complex
        A = np.zeros((size, size), dtype=dtype)
        B = np.zeros((size, size), dtype=dtype)
        idx = np.arange(size)
        A[idx, idx] = a_main[:-1]
        B[idx, idx] = b_main[:-1]
        A[0, 0] += a_main[-1]
        B[0, 0] += b_main[-1]
        k = np.arange(size - 1)
        A[k, k + 1] = a_off[:-1]
        A[k + 1, k] = a_off[:-1]
        B[k, k + 1] = b_off[:-1]
        B[k + 1, k] = b_off[:-1]
        # Last element couples node n-2 with node n-1 = phase * node 0.
        ph = phase if dtype is complex else phase.real
        A[size - 1, 0] += a_off[-1] * ph
        A[0, size - 1] += a_off[-1] * np.conj(ph)
        B[size - 1, 0] += b_off[-1] * ph
        B[0, size - 1] += b_off[-1] * np.conj(ph)
        nodes = np.arange(size)
        closure = phase
    else:
        lo = 1 if slp.bc.startswith("dirichlet") else 0
        hi = n - 1 if slp.bc.endswith("dirichlet") else n
        nodes = np.arange(lo, hi)
        A = np.diag(a_main) + np.diag(a_off, 1) + np.diag(a_off, -1)
        B = np.diag(b_main) + np.diag(b_off, 1) + np.diag(b_off, -1)
        A = A[lo:hi, lo:hi]
        B = B[lo:hi, lo:hi]
        closure = None
    return HermitianPencil(A=A, B=B, nodes=nodes, n_grid=n, closure=closure)


def solve(pencil: HermitianPencil, k: int, vectors: bool = False) -> EigenResult:
    """Lowest ``k`` eigenvalues of ``A v = lam B v``.

    The mass matrix is factored ``B = L L^*``, the pencil reduced to the
    Hermitian matrix ``L^-1 A L^-*`` and that matrix diagonalized densely.
    """
    n = pencil.size
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    try:
        chol = sla.cholesky(pencil.B, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError("mass matrix is not positive definite") from exc
    tmp = sla.solve_triangular(chol, pencil.A, lower=True)
    C = sla.solve_triangular(chol, tmp.conj().T, lower=True).conj().T
    C = 0.5 * (C + C.conj().T)
    if vectors:
        w, y = sla.eigh(C, subset_by_index=[0, k - 1])
        v = sla.solve_triangular(chol.conj().T, y, lower=False)
        Bv = pencil.B @ v
        res = np.linalg.norm(pencil.A @ v - Bv * w, axis=0) / np.linalg.norm(Bv, axis=0)
        return EigenResult(values=w, vectors=v, residuals=res)
    w = sla.eigh(C, eigvals_only=True, subset_by_index=[0, k - 1])
    return EigenResult(values=w)


def convergence_order(hs, values, exact: float) -> float:
    """Observed order of ``|value - exact|`` as ``h`` is refined.

    Least-squares slope of ``log error`` against ``log h``; the errors must
    decrease strictly with ``h``.
    """
    hs = np.asarray(hs, dtype=float)
    err = np.abs(np.asarray(values, dtype=float) - exact)
    if len(hs) < 3:
        raise ValueError("need at least 3 refinement levels")
    order = np.argsort(hs)[::-1]
    hs, err = hs[order], err[order]
    if np.any(np.diff(err) >= 0) or np.any(err == 0):
        raise ValueError(f"errors are not strictly decreasing under refinement: {err.tolist()}")
    slope, _ = np.polyfit(np.log(hs), np.log(err), 1)
    return float(slope)


# Min-max comparison engine ----------------------------------------------------


@dataclass(frozen=True)
class MinmaxInstance:
    """Two form/norm pairs and a transfer map ``Phi`` from the first to the second.

    ``(Q, G)`` act on C^N, ``(Qp, Gp)`` on C^N', ``Phi`` is ``N' x N``.
    """

    Q: np.ndarray
    G: np.ndarray
    Qp: np.ndarray
    Gp: np.ndarray
    Phi: np.ndarray
    caps: np.ndarray


@dataclass(frozen=True)
class MinmaxReport:
    lam: np.ndarray
    lam_prime: np.ndarray
    delta_norm: np.ndarray  # delta'_k
    delta_form: np.ndarray  # delta''_k
    delta: np.ndarray
    hypotheses: dict = field(default_factory=dict)
    verdict: np.ndarray | None = None

    @property
    def hypotheses_hold(self) -> np.ndarray:
        flags = np.ones_like(self.lam, dtype=bool)
        for value in self.hypotheses.values():
            flags &= np.asarray(value, dtype=bool)
        return flags

    @property
    def passed(self) -> bool:
        """True when every index with satisfied hypotheses obeys the bound."""
        ok = self.hypotheses_hold
        return bool(np.all(self.verdict[ok]))


def _is_hermitian(M, tol=1e-10):
    return np.allclose(M, M.conj().T, atol=tol * (1 + np.abs(M).max()))


def _min_eig(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def minmax_compare(inst: MinmaxInstance, rtol: float = 1e-10) -> MinmaxReport:
    """Quantitative eigenvalue comparison ``lam'_k <= lam_k + delta_k``.

    For the first ``K = len(caps)`` eigenpairs ``(lam_i, phi_i)`` of
    ``(Q, G)``:

    * ``delta'_k = k max_{i,j<=k} |delta_ij - <Phi phi_i, Phi phi_j>_{G'}|``
    * ``delta''_k`` = largest eigenvalue of ``Phi^* Q' Phi - Q`` on
      ``span(phi_1..phi_k)``, clipped at 0
    * ``delta_k = (c_k delta'_k + delta''_k) / (1 - delta'_k)``

    The bound is certain whenever ``delta'_k < 1`` and ``lam_k <= c_k``;
    ``rtol`` absorbs rounding in the verdict only.
    """
    Q, G, Qp, Gp, Phi = (np.asarray(x) for x in (inst.Q, inst.G, inst.Qp, inst.Gp, inst.Phi))
    caps = np.asarray(inst.caps, dtype=float)
    K = len(caps)
    n, n_prime = G.shape[0], Gp.shape[0]
    if Phi.shape != (n_prime, n):
        raise ValueError(f"Phi must have shape {(n_prime, n)}, got {Phi.shape}")
    if K > min(n, n_prime):
        raise ValueError("more caps than available eigenvalues")

    lam, phi = sla.eigh(Q, G)
    lam_p = sla.eigh(Qp, Gp, eigvals_only=True)
    lam, phi, lam_p = lam[:K], phi[:, :K], lam_p[:K]

    image = Phi @ phi
    gram = image.conj().T @ Gp @ image
    defect = np.abs(np.eye(K) - gram)
    diff_form = phi.conj().T @ (Phi.conj().T @ Qp @ Phi - Q) @ phi

    d_norm = np.empty(K)
    d_form = np.empty(K)
    delta = np.full(K, np.inf)
    for k in range(1, K + 1):
        d_norm[k - 1] = k * defect[:k, :k].max()
        sub = diff_form[:k, :k]
        d_form[k - 1] = max(0.0, float(np.linalg.eigvalsh(0.5 * (sub + sub.conj().T))[-1]))
        if d_norm[k - 1] < 1:
            delta[k - 1] = (caps[k - 1] * d_norm[k - 1] + d_form[k - 1]) / (1 - d_norm[k - 1])

    scale = max(1.0, float(np.max(np.abs(lam))))
    hyp = {
        "norms_positive": np.full(K, _min_eig(G) > 0 and _min_eig(Gp) > 0),
        "forms_hermitian_psd": np.full(
            K,
            all(_is_hermitian(M) for M in (Q, G, Qp, Gp)) and _min_eig(Q) > -rtol * scale and _min_eig(Qp) > -rtol * scale,
        ),
        "norm_defect_below_one": d_norm < 1,
        "caps_respected": lam <= caps * (1 + rtol),
    }
    verdict = lam_p <= lam + delta + rtol * scale
    return MinmaxReport(
        lam=lam,
        lam_prime=lam_p,
        delta_norm=d_norm,
        delta_form=d_form,
        delta=delta,
        hypotheses=hyp,
        verdict=verdict,
    )


def _random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * rng.uniform(1.0, cond, n)) @ q.T


def random_minmax_instance(rng: np.random.Generator, n: int = 8, n_prime: int = 10, K: int = 4, noise: float = 0.05) -> MinmaxInstance:
    """Random instance with ``Phi`` a perturbed embedding, so ``delta'_k < 1`` typically.

    ``Q'`` is the compression-compatible lift of ``Q`` plus a random PSD
    perturbation of size ``noise``; caps are the exact ``lam_k`` padded by 10 %.
    """
    if not (1 <= K <= n <= n_prime):
        raise ValueError("need 1 <= K <= n <= n_prime")
    G = _random_spd(rng, n, 3.0)
    Q = _random_spd(rng, n, 50.0)
    Q -= np.eye(n) * (np.linalg.eigvalsh(Q)[0] - rng.uniform(0.0, 1.0))
    Phi = np.zeros((n_prime, n))
    Phi[:n] = np.eye(n)
    Phi += noise * rng.standard_normal((n_prime, n))
    Gp = np.eye(n_prime)
    Gp[:n, :n] = G
    extra = rng.standard_normal((n_prime, n_prime))
    Qp = np.eye(n_prime) * 100.0
    Qp[:n, :n] = Q
    Qp += noise * extra @ extra.T
    caps = sla.eigh(Q, G, eigvals_only=True)[:K] * 1.1 + 1e-12
    return MinmaxInstance(Q=Q, G=G, Qp=Qp, Gp=Gp, Phi=Phi, caps=caps)
