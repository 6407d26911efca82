import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandgap.geometry import MeshSpec, flat_cylinder_cell
from bandgap.reduction import SturmLiouvilleProblem, angular_mode, reduce_cell
from bandgap.spectral import (
    MinmaxInstance,
    assemble,
    convergence_order,
    minmax_compare,
    random_minmax_instance,
    solve,
)


def unit_problem(n, bc="quasi-periodic", theta=0.0, length=1.0):
    g = np.linspace(0.0, length, n + 1)
    return SturmLiouvilleProblem(g, np.ones(n + 1), np.zeros(n + 1), np.ones(n + 1), bc=bc, theta=theta)


def cylinder_lambda(h, theta, degree=0, k=1):
    cell = flat_cylinder_cell(2, 0.2, 1.0, MeshSpec(h_body=h))
    return solve(assemble(reduce_cell(cell, angular_mode(2, degree), theta)), k).values


def test_periodic_constant_in_kernel():
    pencil = assemble(unit_problem(64))
    assert np.abs(pencil.A @ np.ones(pencil.size)).max() == 0.0


def test_theta_pi_real_and_above_exact():
    pencil = assemble(unit_problem(64, theta=math.pi))
    assert not np.iscomplexobj(pencil.A)
    lam = solve(pencil, 1).values[0]
    assert math.pi**2 <= lam <= math.pi**2 * (1 + (1 / 64) ** 2)


def test_dirichlet_half_interval():
    lam = solve(assemble(unit_problem(128, bc="dirichlet", length=0.5)), 1).values[0]
    assert lam >= 4 * math.pi**2
    assert lam == pytest.approx(4 * math.pi**2, rel=1e-3)


def test_flat_cylinder_modes():
    lam = cylinder_lambda(1 / 256, 0.0, k=2)
    assert abs(lam[0]) <= 1e-10 * lam[1]
    assert lam[1] == pytest.approx(4 * math.pi**2, rel=1e-3)
    assert cylinder_lambda(1 / 256, 0.0, degree=1)[0] == pytest.approx(25.0, rel=1e-10)


def test_convergence_orders():
    hs = [1 / 64, 1 / 128, 1 / 256]
    vals = [cylinder_lambda(h, math.pi)[0] for h in hs]
    assert 1.8 <= convergence_order(hs, vals, math.pi**2) <= 2.2
    dvals = [solve(assemble(unit_problem(int(0.5 / h), bc="dirichlet", length=0.5)), 1).values[0] for h in hs]
    assert 1.8 <= convergence_order(hs, dvals, 4 * math.pi**2) <= 2.2
    for h in hs:
        assert abs(cylinder_lambda(h, 0.0)[0]) <= 1e-10


def test_convergence_order_rejects_stagnation():
    with pytest.raises(ValueError):
        convergence_order([0.1, 0.05, 0.025], [1.0, 1.0, 1.0], 0.0)


def test_galerkin_monotone_under_nested_refinement():
    prev = math.inf
    for n in (16, 32, 64, 128):
        lam = solve(assemble(unit_problem(n, theta=math.pi)), 3).values
        assert lam[0] >= math.pi**2
        assert lam[0] <= prev
        prev = lam[0]


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.0, 2 * math.pi, exclude_max=True))
def test_conjugation_symmetry(theta):
    g = np.linspace(0, 1, 41)
    p = 1.0 + 0.5 * np.sin(2 * math.pi * g)
    slp = SturmLiouvilleProblem(g, p, 0.3 * p, p, theta=theta)
    a = assemble(slp)
    b = assemble(slp.with_bc("quasi-periodic", 2 * math.pi - theta))
    np.testing.assert_allclose(a.A, np.conj(b.A), atol=1e-12)
    np.testing.assert_allclose(solve(a, 5).values, solve(b, 5).values, rtol=1e-9, atol=1e-9)


def test_residuals_and_nonnegative():
    cell = flat_cylinder_cell(2, 0.2, 1.0)
    res = solve(assemble(reduce_cell(cell, angular_mode(2, 1), 1.3)), 6, vectors=True)
    assert np.all(res.values >= 0)
    assert np.all(res.residuals <= 1e-8)


def test_solve_rejects_bad_k():
    with pytest.raises(ValueError):
        solve(assemble(unit_problem(8)), 0)


def test_minmax_identity():
    rng = np.random.default_rng(1)
    inst = random_minmax_instance(rng)
    same = MinmaxInstance(Q=inst.Q, G=inst.G, Qp=inst.Q, Gp=inst.G, Phi=np.eye(inst.Q.shape[0]), caps=inst.caps)
    rep = minmax_compare(same)
    assert np.all(rep.delta_norm < 1e-10) and np.all(rep.delta_form < 1e-8)
    np.testing.assert_allclose(rep.lam_prime, rep.lam, rtol=1e-10)
    assert rep.passed


def _orthonormal(rng, n_prime, n):
    q, _ = np.linalg.qr(rng.standard_normal((n_prime, n)))
    return q


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shrink=st.floats(0.0, 0.9))
def test_minmax_isometric_with_lowered_form(seed, shrink):
    # G'-isometric Phi (delta' = 0) and Q' = Phi Q Phi^* - shrink Phi Q Phi^* + stiff complement.
    rng = np.random.default_rng(seed)
    n, n_prime, K = 6, 9, 4
    B = rng.standard_normal((n, n))
    Q = B @ B.T
    Phi = _orthonormal(rng, n_prime, n)
    P = Phi @ Phi.T
    Qp = (1 - shrink) * Phi @ Q @ Phi.T + 1e3 * (np.eye(n_prime) - P)
    caps = np.linalg.eigvalsh(Q)[:K] + 1.0
    rep = minmax_compare(MinmaxInstance(Q=Q, G=np.eye(n), Qp=Qp, Gp=np.eye(n_prime), Phi=Phi, caps=caps))
    assert np.all(rep.delta_norm < 1e-10)
    assert np.all(rep.delta_form <= 1e-8 * (1 + np.abs(Q).max()))
    assert rep.hypotheses_hold.all()
    assert rep.passed


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), noise=st.floats(0.0, 0.2))
def test_minmax_conclusion_holds_under_hypotheses(seed, noise):
    rep = minmax_compare(random_minmax_instance(np.random.default_rng(seed), noise=noise))
    ok = rep.hypotheses_hold
    assert np.all(rep.delta[ok] >= 0)
    assert np.all(rep.lam_prime[ok] <= rep.lam[ok] + rep.delta[ok] + 1e-10 * max(1.0, np.abs(rep.lam).max()))


def test_minmax_shape_check():
    inst = random_minmax_instance(np.random.default_rng(0))
    with pytest.raises(ValueError):
        minmax_compare(MinmaxInstance(inst.Q, inst.G, inst.Qp, inst.Gp, inst.Phi.T, inst.caps))
