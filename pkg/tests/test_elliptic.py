import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from eulerlab.elliptic import (BoundaryData, LevelCurve, coarea_identity_check, default_sample_points,
                               extract_level_curves, newtonian_potential, poisson_residual,
                               single_layer, solve_poisson, solve_semilinear)
from eulerlab.errors import DegenerateLevel, GridError, NoConvergence, PointOnCurve
from eulerlab.fields import Grid, ScalarField, laplacian
from eulerlab.monotone import MonotoneProfile

ANN = Grid.annulus(1.0, 2.0, 64, 128)
DISK = Grid.disk(1.0, 64, 128)


def zeros(g):
    return ScalarField.zeros(g)


# ---- solve_poisson ------------------------------------------------------------------

def test_harmonic_annulus_value_at_mid_radius():
    g = Grid.annulus(1.0, 2.0, 128, 128)
    u = solve_poisson(g, zeros(g), BoundaryData(1.0, 0.0))
    assert abs(float(u.at(1.5, 0.0)) - np.log(1.5) / np.log(2)) < 1e-6


def test_constant_vorticity_on_disk():
    u = solve_poisson(DISK, ScalarField(DISK, np.full(DISK.shape, 4.0)), BoundaryData(0.0))
    assert np.abs(u.values - (DISK.R**2 - 1)).max() < 1e-10
    assert abs(float(u.at(0.5, 0.0)) + 0.75) < 1e-8


def test_r4_recovered_from_its_laplacian():
    errs = []
    for n in (32, 64):
        g = Grid.annulus(1.0, 2.0, n, 64)
        u = solve_poisson(g, ScalarField(g, 16 * g.R**2), BoundaryData(16.0, 1.0))
        errs.append(np.abs(u.values - g.R**4).max())
    assert errs[1] < 16 / 63**2
    assert np.log2(errs[0] / errs[1]) > 1.9


def test_boundary_rows_match_bc_exactly():
    prof = np.cos(ANN.theta)
    u = solve_poisson(ANN, ScalarField(ANN, ANN.R), BoundaryData(prof, 2.5))
    assert np.array_equal(u.values[-1], prof)
    assert np.all(u.values[0] == 2.5)


def test_mismatched_profile_rejected():
    with pytest.raises(GridError):
        solve_poisson(ANN, zeros(ANN), BoundaryData(np.zeros(7), 0.0))
    with pytest.raises(GridError):
        solve_poisson(ANN, zeros(ANN), BoundaryData(0.0))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["annulus", "disk"]))
def test_round_trip_through_laplacian(seed, kind):
    g = Grid.annulus(1.0, 2.0, 24, 32) if kind == "annulus" else Grid.disk(1.0, 24, 32)
    rng = np.random.default_rng(seed)
    w = ScalarField(g, 50 * rng.standard_normal(g.shape))
    bc = BoundaryData(rng.standard_normal(g.n_theta)) if g.is_disk else \
        BoundaryData(rng.standard_normal(g.n_theta), float(rng.standard_normal()))
    u = solve_poisson(g, w, bc)
    assert poisson_residual(u, w) < 1e-8


def test_linearity():
    rng = np.random.default_rng(3)
    w1, w2 = (ScalarField(ANN, rng.standard_normal(ANN.shape)) for _ in range(2))
    b1, b2 = BoundaryData(1.0, -2.0), BoundaryData(np.sin(ANN.theta), 0.5)
    a, b = 1.7, -0.6
    lhs = solve_poisson(ANN, a * w1 + b * w2, b1.combine(a, b2, b))
    rhs = a * solve_poisson(ANN, w1, b1).values + b * solve_poisson(ANN, w2, b2).values
    assert np.abs(lhs.values - rhs).max() < 1e-10


def test_maximum_principle():
    rng = np.random.default_rng(5)
    w = ScalarField(DISK, -np.abs(rng.standard_normal(DISK.shape)))
    u = solve_poisson(DISK, w, BoundaryData(0.3))
    assert u.values.min() >= 0.3 - 1e-12


# ---- semilinear ---------------------------------------------------------------------------

def test_semilinear_constant_profile():
    res = solve_semilinear(DISK, MonotoneProfile.constant(4.0), BoundaryData(0.0))
    assert np.abs(res.u.values - (DISK.R**2 - 1)).max() < 1e-10


def test_semilinear_zero_profile_is_harmonic_extension():
    bc = BoundaryData(np.cos(2 * ANN.theta), 1.0)
    res = solve_semilinear(ANN, MonotoneProfile.constant(0.0), bc)
    assert np.abs(res.u.values - solve_poisson(ANN, zeros(ANN), bc).values).max() < 1e-12


def test_semilinear_clamp_two_start_agreement():
    f = MonotoneProfile.clamp(-1.0, 0.0)
    bc = BoundaryData(-0.5)
    a = solve_semilinear(DISK, f, bc)
    b = solve_semilinear(DISK, f, bc, ScalarField(DISK, 3 * np.cos(DISK.TH) * DISK.R - 2))
    assert a.residual < 1e-8 and b.residual < 1e-8
    assert np.abs(a.u.values - b.u.values).max() < 1e-8


def test_semilinear_iteration_cap():
    with pytest.raises(NoConvergence) as info:
        solve_semilinear(DISK, MonotoneProfile.clamp(-1.0, 0.0), BoundaryData(-0.5), max_iter=2)
    assert info.value.iterations == 2 and np.isfinite(info.value.residual)


# ---- potentials ----------------------------------------------------------------------------

def test_newtonian_potential_of_unit_disk_at_centre():
    # independent oracle: radial quadrature of r log r
    exact = quad(lambda r: r * np.log(r), 0, 1)[0]
    one = ScalarField(DISK, np.ones(DISK.shape))
    assert abs(newtonian_potential(one, (0.0, 0.0)) - exact) < 1e-3


def test_newtonian_potential_outside_support():
    one = ScalarField(DISK, np.ones(DISK.shape))
    assert abs(newtonian_potential(one, (2.0, 0.0)) - 0.5 * np.log(2)) < 1e-3
    assert abs(newtonian_potential(one, (0.0, -2.0)) - 0.5 * np.log(2)) < 1e-3


def test_newtonian_potential_of_zero():
    assert newtonian_potential(zeros(DISK), (0.3, 0.1)) == 0.0


def unit_circle(n=400):
    t = np.linspace(0, 2 * np.pi, n + 1)
    pts = np.column_stack([np.cos(t), np.sin(t)])
    return LevelCurve(pts, 0.0, np.ones(n + 1), True)


@pytest.mark.parametrize("rule", ["trapezoid", "segment"])
def test_single_layer_of_unit_circle(rule):
    c = unit_circle(400)
    # nodes lie on the circle; exact segment integration sees the inscribed polygon,
    # whose distance from the centre is cos(pi / n) = 1 - O((pi / n)^2)
    tol = 1e-10 if rule == "trapezoid" else (np.pi / 400) ** 2
    assert abs(single_layer(c, 1.0, (0.0, 0.0), rule)) < tol
    assert abs(single_layer(c, 1.0, (2.0, 0.0), rule) - np.log(2)) < 1e-3
    assert single_layer(c, 0.0, (2.0, 0.0), rule) == 0.0


def test_single_layer_rejects_points_on_curve():
    with pytest.raises(PointOnCurve):
        single_layer(unit_circle(), 1.0, (1.0, 0.0))


# ---- level curves ------------------------------------------------------------------------------

def test_level_curve_circle_on_disk():
    u = ScalarField(DISK, DISK.R**2 - 1)
    (curve,) = extract_level_curves(u, [-0.75])
    assert curve.closed
    assert np.abs(np.hypot(*curve.points.T) - 0.5).max() < DISK.dr
    assert np.all(curve.normal_derivative > 0)


def test_level_on_boundary_rejected():
    u = ScalarField(ANN, ANN.R**4)
    with pytest.raises(DegenerateLevel):
        extract_level_curves(u, [16.0])


def test_level_curve_length_on_annulus():
    u = ScalarField(ANN, ANN.R**4)
    (curve,) = extract_level_curves(u, [1.5**4])
    assert abs(curve.length - 3 * np.pi) < 0.02 * 3 * np.pi


def test_degenerate_gradient_rejected():
    g = Grid.disk(1.0, 32, 64)
    u = ScalarField(g, 1e-7 * g.R**2)
    # the level r = 1/2 carries |grad u| = 1e-7, below the cut-off
    with pytest.raises(DegenerateLevel):
        extract_level_curves(u, [0.25e-7], min_gradient=1e-6)
    assert extract_level_curves(u, [0.25e-7], min_gradient=1e-8)[0].closed


# ---- coarea identity ------------------------------------------------------------------------------

def test_coarea_identity_constant_profile():
    u = ScalarField(DISK, DISK.R**2 - 1)
    pts = default_sample_points(DISK, 10)
    a = coarea_identity_check(u, MonotoneProfile.constant(4.0), pts, 200)
    b = coarea_identity_check(u, MonotoneProfile.constant(4.0), pts, 400)
    assert a.deviation < 1e-2
    assert b.deviation < a.deviation


def test_coarea_identity_zero_profile_harmonic():
    u = ScalarField(DISK, DISK.R * np.cos(DISK.TH) + 0.2 * DISK.R**2 * np.sin(2 * DISK.TH))
    assert np.abs(laplacian(u).values[DISK.interior]).max() < 1e-9
    res = coarea_identity_check(u, MonotoneProfile.constant(0.0), default_sample_points(DISK, 10), 50)
    assert res.deviation < 1e-8


def test_default_samples_are_interior():
    for g in (ANN, DISK):
        r = np.hypot(*default_sample_points(g, 10).T)
        assert np.all((r > g.r_inner) & (r < g.r_outer))
