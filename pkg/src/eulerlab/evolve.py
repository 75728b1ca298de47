"""Explicit time integration of the vorticity transport equation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic import BoundaryData, solve_poisson
from .errors import Blowup, CflViolation, EulerLabError
from .fields import (FloatArray, Grid, ScalarField, d_r, d_theta, integrate, kinetic_energy)

Observer = Callable[[float, ScalarField, ScalarField], dict]


@dataclass(frozen=True)
class EvolutionConfig:
    t_end: float
    dt: float = 0.0           # 0 selects the step from the CFL number
    cfl: float = 0.4
    stride: int = 10
    filter: bool = True
    keep_snapshots: bool = True

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise EulerLabError("t_end must be positive")
        if not 0 < self.cfl < 1:
            raise EulerLabError("cfl must lie in (0, 1)")
        if self.dt < 0:
            raise EulerLabError("dt must be non-negative")
        if self.stride < 1:
            raise EulerLabError("stride must be at least 1")


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    enstrophy: list[float] = field(default_factory=list)
    snapshots: list[ScalarField] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)
    steps: int = 0
    stopped_early: bool = False

    def column(self, name: str) -> FloatArray:
        if name == "t":
            return np.asarray(self.times)
        if name in ("energy", "enstrophy"):
            return np.asarray(getattr(self, name))
        return np.asarray(self.series[name])

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def to_csv(self, columns=("t", "energy", "enstrophy", "omega_plus", "omega_minus")) -> str:
        lines = [",".join(columns)]
        cols = [self.column(c) if (c in ("t", "energy", "enstrophy") or c in self.series)
                else np.full(len(self.times), np.nan) for c in columns]
        for row in zip(*cols):
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"


class StreamSolver:
    """Stream function from vorticity under the boundary rule used for evolution.

    The outer value stays at its initial constant.  On an annulus the inner
    constant is re-chosen at every solve so the circulation around the inner
    circle keeps its initial value; the correction is a multiple of the
    discrete harmonic function equal to 1 inside and 0 outside.
    """

    def __init__(self, grid: Grid, omega0: ScalarField, bc: BoundaryData) -> None:
        bc.check(grid)
        self.grid = grid
        self.bc = bc
        if grid.is_disk:
            return
        self._base_bc = BoundaryData(bc.outer, 0.0)
        self._phi = solve_poisson(grid, ScalarField.zeros(grid), BoundaryData(0.0, 1.0)).values
        self._phi_circ = self._inner_circulation(self._phi)
        self.circulation = self._inner_circulation(solve_poisson(grid, omega0, bc).values)

    def _inner_circulation(self, u: FloatArray) -> float:
        g = self.grid
        return float(g.r[0] * np.sum(d_r(g, u)[0]) * g.dtheta)

    def __call__(self, omega: ScalarField) -> ScalarField:
        if self.grid.is_disk:
            return solve_poisson(self.grid, omega, self.bc)
        base = solve_poisson(self.grid, omega, self._base_bc).values
        c = (self.circulation - self._inner_circulation(base)) / self._phi_circ
        return ScalarField(self.grid, base + c * self._phi)


def advection_rate(grid: Grid, omega: FloatArray, u: FloatArray) -> FloatArray:
    """``-v . grad omega`` with centred differences, ``v = (-r^-1 u_theta, u_r)``."""
    R = grid.R
    v_r = -d_theta(grid, u) / R
    v_t = d_r(grid, u)
    return -(v_r * d_r(grid, omega) + v_t * d_theta(grid, omega) / R)


def cfl_rate(grid: Grid, u: FloatArray) -> float:
    """``max(|v_r|/dr + |v_theta|/(r dtheta))``; the step is stable while ``dt * rate <= 1``."""
    R = grid.R
    v_r = -d_theta(grid, u) / R
    v_t = d_r(grid, u)
    return float(np.max(np.abs(v_r) / grid.dr + np.abs(v_t) / (R * grid.dtheta)))


def theta_filter(grid: Grid, values: FloatArray) -> FloatArray:
    """Damp the top third of the angular spectrum with ``exp(-36 x^4)``."""
    m = np.arange(grid.n_theta // 2 + 1)
    eta = m / m[-1]
    x = np.clip((eta - 2.0 / 3.0) * 3.0, 0.0, None)
    sigma = np.exp(-36.0 * x**4)
    return np.fft.irfft(np.fft.rfft(values, axis=1) * sigma, n=grid.n_theta, axis=1)


def _rk4(grid: Grid, omega: FloatArray, dt: float, solver: StreamSolver) -> FloatArray:
    def rate(w):
        u = solver(ScalarField(grid, w)).values
        return advection_rate(grid, w, u)

    k1 = rate(omega)
    k2 = rate(omega + 0.5 * dt * k1)
    k3 = rate(omega + 0.5 * dt * k2)
    k4 = rate(omega + dt * k3)
    return omega + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(omega: ScalarField, bc: BoundaryData, dt: float, filter: bool = True,
         solver: StreamSolver | None = None) -> ScalarField:
    """One RK4 step of ``omega_t = -v . grad omega``, velocity re-solved per stage."""
    g = omega.grid
    solver = solver or StreamSolver(g, omega, bc)
    limit = cfl_rate(g, solver(omega).values)
    if dt * limit > 1.0:
        raise CflViolation(f"dt = {dt:.3e} exceeds the stability limit {1.0 / limit:.3e}")
    new = _rk4(g, omega.values, dt, solver)
    if filter:
        new = theta_filter(g, new)
    if not np.isfinite(new).all():
        raise Blowup("non-finite vorticity after a step")
    return ScalarField(g, new)


def enstrophy(omega: ScalarField) -> float:
    return integrate(omega * omega)


def perturb(omega: ScalarField, epsilon: float, m: int, psi) -> ScalarField:
    """``omega + epsilon sin(m theta) psi(r)``; ``psi`` must vanish on the boundary circles."""
    g = omega.grid
    prof = np.asarray(psi(g.r) if callable(psi) else psi, dtype=float)
    prof = np.broadcast_to(prof, (g.n_r,))
    scale = max(float(np.max(np.abs(prof))), 1e-300)
    ends = [prof[-1]] if g.is_disk else [prof[0], prof[-1]]
    if any(abs(e) > 1e-12 * scale for e in ends):
        raise EulerLabError("radial bump must vanish on the boundary")
    return omega + epsilon * np.sin(m * g.TH) * prof[:, None]


def evolve(omega0: ScalarField, bc: BoundaryData, config: EvolutionConfig,
           observers: list[Observer] | tuple = (),
           until: Callable[[float, dict], bool] | None = None) -> Trajectory:
    """Integrate to ``config.t_end``, recording every ``config.stride`` steps.

    Each observer maps ``(t, omega, u)`` to a dict of named values appended to
    ``Trajectory.series``.  ``until(t, record)`` may stop the run early.
    """
    g = omega0.grid
    solver = StreamSolver(g, omega0, bc)
    traj = Trajectory()
    w0_max = max(omega0.max_abs(), 1e-300)

    def record(t: float, w: FloatArray) -> bool:
        omega = ScalarField(g, w)
        u = solver(omega)
        traj.times.append(t)
        traj.energy.append(kinetic_energy(u))
        traj.enstrophy.append(enstrophy(omega))
        if config.keep_snapshots or not traj.snapshots:
            traj.snapshots.append(omega)
        else:
            traj.snapshots[-1] = omega
        rec: dict = {}
        for obs in observers:
            rec.update(obs(t, omega, u))
        for k, val in rec.items():
            traj.series.setdefault(k, []).append(float(val))
        return bool(until and until(t, rec))

    w = omega0.values.copy()
    t = 0.0
    if record(t, w):
        traj.stopped_early = True
        return traj
    dt = config.dt
    n = 0
    while t < config.t_end * (1 - 1e-12):
        if n % 10 == 0:
            rate = cfl_rate(g, solver(ScalarField(g, w)).values)
            if config.dt == 0:
                dt = config.cfl / rate if rate > 0 else config.t_end
            elif dt * rate > 1.0:
                raise CflViolation(f"dt = {dt:.3e} exceeds the stability limit {1.0 / rate:.3e}")
        h = min(dt, config.t_end - t)
        w = _rk4(g, w, h, solver)
        if config.filter:
            w = theta_filter(g, w)
        t = t + h
        n += 1
        peak = float(np.max(np.abs(w)))
        if not np.isfinite(peak) or peak > 1e6 * w0_max:
            raise Blowup(f"vorticity reached {peak:.3e} at t = {t:.4g}")
        last = t >= config.t_end * (1 - 1e-12)
        if n % config.stride == 0 or last:
            if record(t, w):
                traj.stopped_early = True
                break
    traj.steps = n
    return traj
