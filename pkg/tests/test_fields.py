import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulerlab.errors import GridError
from eulerlab.fields import (Grid, ScalarField, VectorField, curl, divergence, dumps_field, gradient,
                             integrate, laplacian, loads_field, velocity_from_stream)


def annulus(n_r=64, n_t=128):
    return Grid.annulus(1.0, 2.0, n_r, n_t)


def field(g, fn):
    return ScalarField(g, fn(g.R, g.TH))


# ---- grid ------------------------------------------------------------------------

@pytest.mark.parametrize("g", [Grid.annulus(1, 2, 17, 24), Grid.disk(1.0, 20, 32), Grid.disk(2.5, 9, 8)])
def test_cell_areas_sum_to_domain_area(g):
    exact = np.pi * (g.r_outer**2 - g.r_inner**2)
    assert abs(np.sum(g.areas) - exact) < 1e-12 * exact


@pytest.mark.parametrize("args", [("annulus", 2.0, 1.0, 8, 8), ("annulus", 1.0, 2.0, 3, 8),
                                  ("annulus", 1.0, 2.0, 8, 7), ("disk", 0.5, 1.0, 8, 8),
                                  ("annulus", 0.0, 1.0, 8, 8)])
def test_invalid_grids_rejected(args):
    with pytest.raises(GridError):
        Grid(*args)


def test_uniform_spacing():
    for g in (annulus(9, 16), Grid.disk(1.0, 9, 16)):
        assert np.allclose(np.diff(g.r), g.dr)
        assert np.allclose(np.diff(g.theta), g.dtheta)
        assert g.theta[0] == 0.0 and np.isclose(g.theta[-1] + g.dtheta, 2 * np.pi)
    d = Grid.disk(1.0, 9, 16)
    assert np.isclose(d.r[0], d.dr / 2) and np.isclose(d.r[-1], 1.0)


# ---- gradient -------------------------------------------------------------------------

def grad_error(n):
    g = annulus(n, 2 * n)
    v = gradient(field(g, lambda r, t: r**2 * np.sin(t)))
    er = np.abs(v.v_r - 2 * g.R * np.sin(g.TH)).max()
    et = np.abs(v.v_theta - g.R * np.cos(g.TH)).max()
    return max(er, et)


def test_gradient_of_r_squared():
    g = annulus()
    v = gradient(field(g, lambda r, t: r**2))
    assert np.abs(v.v_r - 2 * g.R).max() < 1e-10
    assert np.abs(v.v_theta).max() < 1e-12


def test_gradient_of_sin_theta():
    g = annulus()
    v = gradient(field(g, lambda r, t: np.sin(t)))
    assert np.abs(v.v_r).max() < 1e-12
    # centred difference in theta: truncation dtheta^2 / 6 times |f'''| / r
    assert np.abs(v.v_theta - np.cos(g.TH) / g.R).max() < g.dtheta**2 / 6


def test_gradient_of_constant_is_zero():
    v = gradient(ScalarField(annulus(), np.full((64, 128), 3.7)))
    assert v.max_abs() < 1e-12


def test_gradient_converges_at_second_order():
    e = [grad_error(n) for n in (16, 32, 64)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert orders.min() >= 1.9


# ---- laplacian ----------------------------------------------------------------------

def test_laplacian_of_r4():
    g = annulus()
    lap = laplacian(field(g, lambda r, t: r**4)).values
    exact = 16 * g.R**2
    assert (np.abs(lap - exact) / exact)[g.interior].max() < 1e-2


def test_laplacian_of_log_r():
    g = annulus()
    assert np.abs(laplacian(field(g, lambda r, t: np.log(r))).values).max() < 1e-3


def test_laplacian_of_r_squared_on_disk():
    g = Grid.disk(1.0, 32, 64)
    assert np.abs(laplacian(field(g, lambda r, t: r**2)).values - 4).max() < 1e-10


def lap_error(n, disk=False):
    g = Grid.disk(1.0, n, 2 * n) if disk else annulus(n, 2 * n)
    u = field(g, lambda r, t: r**3 * np.cos(3 * t) + np.exp(r))
    exact = np.exp(g.R) * (1 + 1 / g.R)
    err = np.abs(laplacian(u).values - exact)
    # near the pole the truncation error scales like h^2 / r; measure on a fixed region r >= 1/4
    return err[g.r >= 0.25].max()


@pytest.mark.parametrize("disk", [False, True])
def test_laplacian_converges_at_second_order(disk):
    e = [lap_error(n, disk) for n in (16, 32, 64)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert orders.min() >= 1.9


# ---- velocity and curl ------------------------------------------------------------------

def test_velocity_of_r4():
    g = annulus()
    v = velocity_from_stream(field(g, lambda r, t: r**4))
    assert np.abs(v.v_r).max() < 1e-12
    # v_theta = +du/dr with omega = laplacian(u); the one-sided boundary rows bound
    # the truncation by dr^2 / 3 times max|u'''| = 48
    assert np.abs(v.v_theta - 4 * g.R**3).max() < 16 * g.dr**2


def test_velocity_of_constant_is_zero():
    assert velocity_from_stream(ScalarField(annulus(), np.ones((64, 128)))).max_abs() < 1e-12


def test_velocity_of_cartesian_y():
    g = annulus()
    v = velocity_from_stream(field(g, lambda r, t: r * np.sin(t)))
    # u = y gives the Cartesian velocity (-u_y, u_x) = (-1, 0)
    vx, vy = v.cartesian()
    tol = g.dtheta**2 / 6
    assert np.abs(vx + 1).max() < tol and np.abs(vy).max() < tol
    assert np.abs(v.v_r + np.cos(g.TH)).max() < tol
    assert np.abs(v.v_theta - np.sin(g.TH)).max() < 1e-9


def test_curl_of_shear_profile():
    g = annulus()
    v = VectorField(g, np.zeros(g.shape), 4 * g.R**3)
    assert (np.abs(curl(v).values - 16 * g.R**2) / (16 * g.R**2))[g.interior].max() < 1e-3


def test_curl_matches_laplacian_sign():
    g = annulus()
    u = field(g, lambda r, t: r**4 + 0.3 * r**2 * np.sin(2 * t))
    w = curl(velocity_from_stream(u)).values
    lap = laplacian(u).values
    assert np.abs(w - lap)[2:-2].max() < 1e-2 * np.abs(lap).max()


def test_curl_of_rigid_rotation_and_zero():
    g = Grid.disk(1.0, 32, 64)
    v = VectorField(g, np.zeros(g.shape), g.R.copy())
    assert np.abs(curl(v).values - 2).max() < 1e-10
    assert curl(VectorField(g, np.zeros(g.shape), np.zeros(g.shape))).max_abs() == 0.0


def test_velocity_is_divergence_free_and_fluxless():
    g = annulus()
    u = field(g, lambda r, t: r**3 * np.cos(2 * t) + r * np.sin(t))
    v = velocity_from_stream(u)
    div = divergence(v).values
    assert np.abs(div).max() < 1e-2
    flux = np.sum(v.v_r, axis=1) * g.r * g.dtheta
    assert np.abs(flux).max() < 1e-10


# ---- integration ---------------------------------------------------------------------------

def test_integrate_one_on_annulus():
    assert abs(integrate(ScalarField(annulus(), np.ones((64, 128)))) - 3 * np.pi) < 1e-10


def test_integrate_r_squared_on_disk():
    g = Grid.disk(1.0, 64, 128)
    assert abs(integrate(field(g, lambda r, t: r**2)) - np.pi / 2) < 1e-3


def test_integrate_sin_theta_vanishes():
    assert abs(integrate(field(annulus(), lambda r, t: np.sin(t)))) < 1e-12


@pytest.mark.parametrize("g", [annulus(9, 8), Grid.disk(1.3, 7, 8)])
def test_integrate_exact_for_affine_in_r_squared(g):
    a, b = 0.7, -1.9
    exact = 2 * np.pi * (a * (g.r_outer**2 - g.r_inner**2) / 2 + b * (g.r_outer**4 - g.r_inner**4) / 4)
    assert abs(integrate(field(g, lambda r, t: a + b * r**2)) - exact) < 1e-12


# ---- dump format ------------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["annulus", "disk"]))
def test_dump_round_trip_is_bit_exact(seed, kind):
    g = Grid.annulus(0.5, 3.0, 6, 8) if kind == "annulus" else Grid.disk(2.0, 5, 10)
    vals = np.random.default_rng(seed).standard_normal(g.shape) * 10.0 ** np.random.default_rng(seed).integers(-8, 8)
    f = ScalarField(g, vals)
    text = dumps_field(f)
    back = loads_field(text)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    head = text.splitlines()[0].split()
    assert head[:2] == [str(g.n_r), str(g.n_theta)] and head[-1] == kind
    assert len(text.splitlines()) == g.n_r + 1
