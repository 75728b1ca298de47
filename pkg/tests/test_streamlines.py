import numpy as np
import pytest

from eulerlab.cli import synthetic_field
from eulerlab.errors import FitUnderresolved, NotClosed, StartAtStagnation
from eulerlab.fields import Grid, ScalarField, VectorField, velocity_from_stream
from eulerlab.streamlines import (circumscribed_curvature, classify_critical_point, curvature_stats,
                                  encircles, find_critical_points, trace, winding_number)

ANN = Grid.annulus(1.0, 2.0, 64, 128)
DISK = Grid.disk(1.0, 64, 128)


def r4_velocity():
    return velocity_from_stream(ScalarField(ANN, ANN.R**4))


# ---- tracing --------------------------------------------------------------------

def test_r4_streamline_is_a_circle():
    s = trace(r4_velocity(), (1.5, 0.0))
    assert s.closed and s.status == "closed"
    assert np.abs(np.hypot(*s.points.T) - 1.5).max() < 1e-3
    assert abs(s.arclength[-1] - 3 * np.pi) < 1e-2
    # v_theta = 4 r^3 gives the period 2 pi r / v_theta = pi / 4.5
    assert abs(s.period - np.pi / 4.5) < 1e-3 * np.pi / 4.5


def test_circle_curvature():
    s = trace(r4_velocity(), (1.5, 0.0))
    cs = curvature_stats(s)
    assert abs(cs.mean - 1 / 1.5) < 1e-2
    assert cs.max < 1.1 / 1.5
    assert abs(cs.total_turn - 2 * np.pi) < 1e-2


def test_rigid_rotation_period():
    v = VectorField(DISK, np.zeros(DISK.shape), DISK.R.copy())
    s = trace(v, (0.5, 0.0))
    assert s.closed
    assert abs(s.period - 2 * np.pi) < 1e-3


def test_constant_flow_leaves_domain():
    v = VectorField(DISK, np.cos(DISK.TH), -np.sin(DISK.TH))    # (v_x, v_y) = (1, 0)
    s = trace(v, (0.0, 0.5))
    assert not s.closed and s.status == "left_domain"
    # bilinear sampling of the polar components is exact up to O(dtheta^2)
    assert np.abs(s.points[:, 1] - 0.5).max() < DISK.dtheta**2
    with pytest.raises(NotClosed):
        encircles(s, (0.0, 0.0))


def test_start_at_stagnation():
    v = VectorField(ANN, np.zeros(ANN.shape), np.zeros(ANN.shape))
    with pytest.raises(StartAtStagnation):
        trace(v, (1.5, 0.0))


def test_stream_function_constant_along_streamline():
    u = ScalarField(ANN, ANN.R**4 + 0.05 * ANN.R**2 * np.cos(2 * ANN.TH))
    s = trace(velocity_from_stream(u), (1.4, 0.0))
    assert s.closed
    vals = u.at(*s.points.T)
    assert np.ptp(vals) < 1e-4 * np.ptp(u.values)


# ---- curvature and winding -------------------------------------------------------

def test_curvature_of_chord_and_circle():
    line = np.column_stack([np.linspace(0, 1, 11), np.zeros(11)])
    assert np.all(circumscribed_curvature(line) == 0)
    t = np.linspace(0, 2 * np.pi, 201)
    circle = 2.0 * np.column_stack([np.cos(t), np.sin(t)])
    assert np.abs(circumscribed_curvature(circle, closed=True) - 0.5).max() < 1e-12


def test_winding_and_encircling():
    s = trace(r4_velocity(), (1.5, 0.0))
    assert abs(winding_number(s.points, (0.0, 0.0))) == 1
    assert winding_number(s.points, (1.9, 0.0)) == 0
    assert encircles(s, (0.0, 0.0))
    assert encircles(s, [(0.0, 0.0), (1.0, 0.0), (0.0, -1.2)])
    assert not encircles(s, [(0.0, 0.0), (1.8, 0.0)])


# ---- stagnation points -------------------------------------------------------------

def test_critical_points_of_shifted_rotation():
    g = Grid.disk(1.0, 48, 96)
    c = np.array([0.3, -0.2])
    u = ScalarField(g, 0.5 * ((g.X - c[0]) ** 2 + (g.Y - c[1]) ** 2))
    (p,) = find_critical_points(velocity_from_stream(u))
    # the zero of the bilinear interpolant is second-order accurate
    assert np.hypot(*(p - c)) < g.dr**2


def test_critical_point_at_pole():
    (p,) = find_critical_points(velocity_from_stream(ScalarField(DISK, DISK.R**2)))
    assert np.hypot(*p) < 1e-9


def test_annular_shear_has_no_critical_points():
    assert find_critical_points(r4_velocity()) == []


@pytest.mark.parametrize("rotation", [0.0, 0.7])
def test_classify_saddle(rotation):
    rep = classify_critical_point(synthetic_field("saddle", DISK, rotation), (0.0, 0.0))
    assert rep.kind == "i"
    assert abs(abs(rep.params["a"]) - 1) < 1e-6 and abs(abs(rep.params["b"]) - 1) < 1e-6
    assert rep.params["a"] * rep.params["b"] > 0


def test_classify_monkey_saddle_rotates_equivariantly():
    base = classify_critical_point(synthetic_field("monkey", DISK, 0.0), (0.0, 0.0))
    assert base.kind == "ii" and base.params["n"] == 2
    assert abs(abs(base.params["a"]) - 1) < 1e-6
    rot = classify_critical_point(synthetic_field("monkey", DISK, 0.7), (0.0, 0.0))
    # rotating the frame by t multiplies a z^n in the velocity by e^{-i (n + 1) t}
    expected = base.params["a"] * np.exp(-3j * 0.7)
    assert abs(rot.params["a"] - expected) < 1e-6


def test_classify_higher_order():
    rep = classify_critical_point(synthetic_field("z4", DISK, 0.0), (0.0, 0.0))
    assert rep.kind == "ii" and rep.params["n"] == 3
    assert abs(abs(rep.params["a"]) - 1) < 1e-6


def test_classify_cusp():
    rep = classify_critical_point(synthetic_field("cusp", DISK, 0.0), (0.0, 0.0))
    assert rep.kind == "iii" and rep.params["n"] == 2
    assert abs(abs(rep.params["a"]) - 2) < 1e-6
    assert abs(rep.params["alpha"] - 3) < 1e-6


def test_classify_needs_enough_nodes():
    coarse = Grid.disk(1.0, 8, 8)
    with pytest.raises(FitUnderresolved):
        classify_critical_point(synthetic_field("saddle", coarse, 0.0), (0.0, 0.0), radius=0.05)
