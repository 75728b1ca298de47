import numpy as np
import pytest

from eulerlab.elliptic import BoundaryData
from eulerlab.errors import CflViolation, EulerLabError
from eulerlab.evolve import (EvolutionConfig, StreamSolver, enstrophy, evolve, perturb, step,
                             theta_filter)
from eulerlab.fields import Grid, ScalarField, d_r, kinetic_energy
from eulerlab.monotone import distribution_function

ANN = Grid.annulus(1.0, 2.0, 32, 64)
BC = BoundaryData(16.0, 1.0)


def bump(r):
    return (r - 1) * (2 - r)


def test_config_validation():
    for kwargs in ({"t_end": 0}, {"t_end": 1, "cfl": 1.0}, {"t_end": 1, "dt": -1}, {"t_end": 1, "stride": 0}):
        with pytest.raises(EulerLabError):
            EvolutionConfig(**kwargs)


def test_step_keeps_radial_state():
    w = ScalarField(ANN, 16 * ANN.R**2)
    assert np.abs(step(w, BC, 1e-3).values - w.values).max() < 1e-10


def test_step_keeps_zero():
    z = ScalarField.zeros(ANN)
    assert step(z, BoundaryData(0.0, 0.0), 1e-2).max_abs() == 0.0


def test_step_keeps_rigid_rotation():
    g = Grid.disk(1.0, 32, 64)
    w = ScalarField(g, np.full(g.shape, 2.0))
    assert np.abs(step(w, BoundaryData(0.0), 1e-2).values - 2.0).max() < 1e-10


def test_step_rejects_large_dt():
    w = ScalarField(ANN, 16 * ANN.R**2)
    with pytest.raises(CflViolation):
        step(w, BC, 1.0)


def test_filter_keeps_low_modes():
    vals = np.cos(3 * ANN.TH) + ANN.R
    assert np.abs(theta_filter(ANN, vals) - vals).max() < 1e-12
    high = np.cos(32 * ANN.TH)
    assert np.abs(theta_filter(ANN, high)).max() < 1e-6


def test_steady_run_stays_put():
    w = ScalarField(ANN, 16 * ANN.R**2)
    traj = evolve(w, BC, EvolutionConfig(0.2))
    assert np.abs(traj.final.values - w.values).max() / w.max_abs() < 1e-6
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == pytest.approx(0.2, abs=1e-12)


def test_perturbed_run_conserves_invariants():
    w0 = perturb(ScalarField(ANN, 16 * ANN.R**2), 1e-3, 1, bump)
    traj = evolve(w0, BC, EvolutionConfig(0.25))
    e, z = traj.column("energy"), traj.column("enstrophy")
    assert np.abs(e - e[0]).max() / e[0] < 1e-3
    assert np.abs(z - z[0]).max() / z[0] < 1e-3
    d0, d1 = distribution_function(w0), distribution_function(traj.final)
    scale = np.sum(ANN.areas) * np.ptp(w0.values)
    assert d0.l1_distance(d1) / scale < 0.02


def test_inner_circulation_is_preserved():
    w0 = perturb(ScalarField(ANN, 16 * ANN.R**2), 5e-2, 2, bump)
    solver = StreamSolver(ANN, w0, BC)
    traj = evolve(w0, BC, EvolutionConfig(0.05, stride=1))

    def circ(w):
        u = solver(w).values
        return ANN.r[0] * np.sum(d_r(ANN, u)[0]) * ANN.dtheta

    assert abs(circ(traj.final) - circ(w0)) < 1e-10 * abs(circ(w0))


def test_energy_and_enstrophy_records():
    w = ScalarField(ANN, 16 * ANN.R**2)
    traj = evolve(w, BC, EvolutionConfig(0.01, stride=2))
    u = StreamSolver(ANN, w, BC)(w)
    assert traj.energy[0] == kinetic_energy(u)
    assert traj.enstrophy[0] == enstrophy(w)
    assert traj.to_csv().splitlines()[0] == "t,energy,enstrophy,omega_plus,omega_minus"


def test_observers_and_early_stop():
    w = ScalarField(ANN, 16 * ANN.R**2)
    seen = []
    traj = evolve(w, BC, EvolutionConfig(1.0, stride=1),
                  observers=[lambda t, om, u: {"tick": len(seen.append(t) or seen)}],
                  until=lambda t, rec: rec["tick"] >= 3)
    assert traj.stopped_early and len(traj.times) == 3
    assert traj.series["tick"] == [1.0, 2.0, 3.0]


# ---- perturb -------------------------------------------------------------------------------

def test_perturb_zero_amplitude():
    w = ScalarField(ANN, 16 * ANN.R**2)
    assert np.array_equal(perturb(w, 0.0, 1, bump).values, w.values)


def test_perturb_amplitude():
    g = Grid.annulus(1.0, 2.0, 65, 64)        # r = 1.5 is a node
    w = ScalarField.zeros(g)
    p = perturb(w, 1e-3, 1, bump)
    assert abs(np.abs(p.values).max() - 2.5e-4) < 1e-12
    i, j = np.unravel_index(np.argmax(p.values), g.shape)
    assert g.r[i] == 1.5


def test_perturbations_add():
    w = ScalarField(ANN, 16 * ANN.R**2)
    a = perturb(perturb(w, 1e-3, 1, bump), 2e-3, 3, bump)
    b = w.values + 1e-3 * np.sin(ANN.TH) * bump(ANN.R) + 2e-3 * np.sin(3 * ANN.TH) * bump(ANN.R)
    assert np.abs(a.values - b).max() < 1e-15


def test_perturb_requires_vanishing_bump():
    with pytest.raises(EulerLabError):
        perturb(ScalarField.zeros(ANN), 1e-3, 1, lambda r: r)
