import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandgap.geometry import (
    MeshSpec,
    ProfileCell,
    cell_from_json,
    cell_to_json,
    conformal_cell,
    conformal_curvature,
    cylinder_linked_cell,
    dumbbell_cell,
    dumbbell_profile,
    flat_cylinder_cell,
    isoperimetric_slice_bound,
    profile_curvature,
    sectional_curvature,
    smoothstep,
)


def test_dumbbell_body_and_collar():
    cell = dumbbell_cell(2, 0.1)
    assert cell.profile_at(math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert dumbbell_profile(0.04, 0.1) == 0.1
    assert dumbbell_profile(math.pi - 0.04, 0.1) == 0.1


def test_dumbbell_blend_value():
    # Oracle: the blend sqrt(chi sin^2 + (1 - chi) r^2) with the quintic smoothstep.
    s, eps = 0.15, 0.1
    chi = smoothstep((s - eps) / eps)
    t = (s - eps / 2) / eps
    r = eps + eps * (t**6 - 3 * t**5 + 2.5 * t**4)
    expected = math.sqrt(chi * math.sin(s) ** 2 + (1 - chi) * r**2)
    assert dumbbell_profile(s, eps) == pytest.approx(expected, rel=1e-14)
    assert 0.1 < dumbbell_profile(s, eps) < math.sin(s) + 1e-3
    ss = np.linspace(0.05, 0.2, 301)
    assert np.all(np.diff(dumbbell_profile(ss, eps)) >= 0)


def test_dumbbell_is_sine_on_body():
    eps = 0.1
    cell = dumbbell_cell(2, eps)
    body = (cell.grid >= 2 * eps) & (cell.grid <= math.pi - 2 * eps)
    # exact on the first half; the mirrored half evaluates sin(pi - s)
    np.testing.assert_allclose(cell.profile[body], np.sin(cell.grid[body]), rtol=1e-14, atol=0)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05, 0.025])
def test_profile_cell_invariants(eps):
    for cell in (dumbbell_cell(2, eps), cylinder_linked_cell(3, eps, 0.7)):
        cell.validate()
        assert np.all(cell.profile > 0)
        assert cell.profile[0] == cell.profile[-1]
        collar = cell.grid <= cell.collar
        assert np.all(cell.profile[collar] == eps)
        assert np.all(np.diff(cell.grid) > 0)
        inside = np.count_nonzero((cell.grid >= cell.collar - eps / 2) & (cell.grid <= cell.collar)) - 1
        assert inside >= 8


def test_cylinder_linked():
    cell = cylinder_linked_cell(2, 0.05, 1.0)
    assert cell.length == pytest.approx(math.pi + 1.0, rel=1e-14)
    assert cell.profile_at(0.3) == 0.05
    a = cylinder_linked_cell(2, 0.05, 0.0)
    b = dumbbell_cell(2, 0.05)
    assert np.array_equal(a.grid, b.grid) and np.array_equal(a.profile, b.profile)


def test_flat_cylinder():
    cell = flat_cylinder_cell(2, 0.2, 1.0, MeshSpec(h_body=0.01))
    assert len(cell.grid) == 101
    assert np.all(cell.profile == 0.2)
    assert np.all(flat_cylinder_cell(3, 1.0, 2.0).profile == 1.0)
    rep = sectional_curvature(cell)
    assert rep.max_abs == 0.0


def test_conformal_examples():
    cell = conformal_cell(2, 1 / 13, 0.25, 0.75, 0.1)
    x = np.array([0.05, 0.5])
    rho = np.interp(x, cell.grid, cell.rho)
    assert rho[1] == 1.0 and rho[0] == 0.1
    c3 = conformal_cell(3, 1.0, 0.25, 0.75, 0.2)
    val = np.interp(0.754, c3.grid, c3.rho)
    assert 0.2 < val < 1.0


@pytest.mark.parametrize("d,eps", [(2, 0.2), (2, 0.05), (3, 0.2), (4, 0.3)])
def test_conformal_invariants(d, eps):
    a, b = 0.25, 0.75
    cell = conformal_cell(d, 1.0, a, b, eps)
    assert np.all((cell.rho >= eps) & (cell.rho <= 1))
    dist = np.maximum(np.maximum(a - cell.grid, cell.grid - b), 0)
    assert np.all(cell.rho[dist >= eps**d] == eps)
    assert np.all(cell.rho[(cell.grid >= a) & (cell.grid <= b)] == 1.0)
    left = cell.grid <= a
    assert np.all(np.diff(cell.rho[left]) >= 0)


def test_conformal_rejects_wide_transition():
    with pytest.raises(ValueError, match="transition width"):
        conformal_cell(2, 1.0, 0.05, 0.95, 0.5)


def test_sphere_curvature_second_order():
    errs = []
    for n in (200, 400, 800):
        s = np.linspace(0.3, math.pi - 0.3, n + 1)
        rep = profile_curvature(s, np.sin(s), 3)
        inner = slice(2, -2)
        errs.append(max(np.abs(rep.radial[inner] - 1).max(), np.abs(rep.spherical[inner] - 1).max()))
    assert errs[0] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_cone_is_flat():
    s = np.linspace(0.5, 2.0, 201)
    rep = profile_curvature(s, s, 3)
    assert rep.max_abs < 1e-10


def test_dumbbell_curvature_scaling():
    k = [sectional_curvature(dumbbell_cell(2, e)).max_abs for e in (0.2, 0.1, 0.05)]
    assert 2 <= k[1] / k[0] <= 8
    assert 2 <= k[2] / k[1] <= 8


def test_conformal_curvature():
    k = [conformal_curvature(conformal_cell(3, 1.0, 0.25, 0.75, e)).max_abs for e in (0.2, 0.1, 0.05)]
    assert k[0] < k[1] < k[2]
    cell = conformal_cell(3, 1.0, 0.25, 0.75, 0.2)
    rep = conformal_curvature(cell)
    inner = (cell.grid > 0.26) & (cell.grid < 0.74)
    assert np.all(rep.radial[inner] == 0) and np.all(rep.spherical[inner] == 0)


def test_isoperimetric_flat_closed_form():
    cell = flat_cylinder_cell(2, 0.1, 1.0)
    bound = isoperimetric_slice_bound(cell, 2.0)
    assert bound.value == pytest.approx(0.8 * math.pi, rel=1e-12)
    assert bound.slice == (0.0, 1.0)
    b15 = isoperimetric_slice_bound(cell, 1.5)
    assert b15.value == pytest.approx((0.4 * math.pi) ** 1.5 / (0.2 * math.pi) ** 0.5, rel=1e-12)


def test_isoperimetric_decreases_with_eps():
    v = [isoperimetric_slice_bound(dumbbell_cell(2, e), 2.0).value for e in (0.2, 0.1, 0.05)]
    assert v[0] > v[1] > v[2] > 0


def test_isoperimetric_refinement_monotone():
    coarse = dumbbell_cell(2, 0.1, MeshSpec(h_body=math.pi / 100, neck_divisions=16))
    fine = ProfileCell(
        d=2,
        grid=np.sort(np.concatenate([coarse.grid, 0.5 * (coarse.grid[1:] + coarse.grid[:-1])])),
        profile=dumbbell_profile(np.sort(np.concatenate([coarse.grid, 0.5 * (coarse.grid[1:] + coarse.grid[:-1])])), 0.1),
        eps=0.1,
    )
    assert isoperimetric_slice_bound(fine, 2.0).value <= isoperimetric_slice_bound(coarse, 2.0).value


def test_json_round_trip():
    for cell in (dumbbell_cell(2, 0.1), conformal_cell(3, 1.0, 0.25, 0.75, 0.2)):
        back = cell_from_json(cell_to_json(cell))
        assert np.array_equal(back.grid, cell.grid)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        dumbbell_cell(1, 0.1)
    with pytest.raises(ValueError):
        dumbbell_cell(2, 0.5)
    with pytest.raises(ValueError):
        flat_cylinder_cell(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        ProfileCell(d=2, grid=np.array([0.0, 1.0, 2.0]), profile=np.array([1.0, -1.0, 1.0]), eps=0.1).validate()


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(0.02, 0.25, exclude_max=True), d=st.integers(2, 5))
def test_dumbbell_property(eps, d):
    cell = dumbbell_cell(d, eps, MeshSpec(h_body=math.pi / 200))
    cell.validate()
    assert np.all(cell.profile > 0) and np.all(cell.profile <= 1.0)
    assert cell.profile[0] == cell.profile[-1] == eps
