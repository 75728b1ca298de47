"""Steady flows: construction, steadiness residual and the Arnold ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import BoundaryData, solve_semilinear
from .errors import NotRadial, NotSteady, TooDegenerate
from .fields import (FloatArray, Grid, ScalarField, VectorField, d_r, d_theta, gradient,
                     laplacian, velocity_from_stream)
from .monotone import MonotoneProfile

RADIAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SteadyFlow:
    u: ScalarField
    v: VectorField
    omega: ScalarField
    residual: float
    f: MonotoneProfile | None = None

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class ArnoldReport:
    ratio_inf: float
    ratio_sup: float
    excluded_frac: float
    sign: str

    def to_record(self, residual: float | None = None) -> str:
        items = [("ratio_inf", self.ratio_inf), ("ratio_sup", self.ratio_sup),
                 ("excluded_frac", self.excluded_frac)]
        parts = [f"{k}={v:.6g}" for k, v in items] + [f"sign={self.sign}"]
        if residual is not None:
            parts.append(f"residual={residual:.6g}")
        return " ".join(parts)


@dataclass(frozen=True)
class RadialHypothesis:
    """Positivity of a radial vorticity profile and of its radial derivative."""

    passed: bool
    min_omega: float
    min_domega_dr: float
    normalized: bool          # min d(omega)/dr > 1


def steadiness_residual(u: ScalarField, omega: ScalarField) -> float:
    """``max |v . grad omega|`` scaled by ``max|v| max|grad omega|``."""
    v = velocity_from_stream(u)
    go = gradient(omega)
    adv = v.v_r * go.v_r + v.v_theta * go.v_theta
    scale = v.max_abs() * go.max_abs()
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(adv)) / (scale + 1e-300))


def _profile_values(grid: Grid, profile) -> FloatArray:
    if callable(profile):
        vals = np.asarray(profile(grid.r), dtype=float)
    else:
        vals = np.asarray(profile, dtype=float)
    return np.broadcast_to(vals, (grid.n_r,))


def radial_steady(grid: Grid, u_profile) -> SteadyFlow:
    """Flow with stream function ``u(r)``; ``u_profile`` is a callable of r or n_r samples."""
    u = ScalarField(grid, np.repeat(_profile_values(grid, u_profile)[:, None], grid.n_theta, axis=1))
    omega = laplacian(u)
    res = steadiness_residual(u, omega)
    if res > 1e-6:
        raise NotSteady(f"steadiness residual {res:.3e} for a radial profile")
    return SteadyFlow(u, velocity_from_stream(u), omega, res)


def semilinear_steady(grid: Grid, f: MonotoneProfile, bc: BoundaryData,
                      u0: ScalarField | None = None) -> SteadyFlow:
    """Steady flow ``laplacian(u) = f(u)``; vorticity is ``f(u)`` on every row."""
    sol = solve_semilinear(grid, f, bc, u0)
    u = sol.u
    omega = f.apply(u)
    return SteadyFlow(u, velocity_from_stream(u), omega, steadiness_residual(u, omega), f)


def vorticity_sign(omega: ScalarField) -> str:
    if np.all(omega.values > 0):
        return "+"
    if np.all(omega.values < 0):
        return "-"
    return "mixed"


def arnold_ratio(u: ScalarField, omega: ScalarField, tol: float | None = None,
                 mask=None) -> ArnoldReport:
    """Scalar projection ``(grad u . grad omega) / |grad omega|^2`` over the grid.

    Nodes with ``|grad omega| <= tol`` (default ``1e-6 max|grad omega|``) or
    outside ``mask`` are excluded and their area is reported.
    """
    g = u.grid
    gu = gradient(u)
    go = gradient(omega)
    mag2 = go.v_r**2 + go.v_theta**2
    mag = np.sqrt(mag2)
    if tol is None:
        tol = 1e-6 * float(mag.max())
    keep = mag > tol
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    excluded = float(np.sum(g.areas[~keep]) / np.sum(g.areas))
    if excluded > 0.5 or not keep.any():
        raise TooDegenerate(f"{100 * excluded:.1f}% of the area has a degenerate vorticity gradient")
    ratio = (gu.v_r * go.v_r + gu.v_theta * go.v_theta)[keep] / mag2[keep]
    return ArnoldReport(float(ratio.min()), float(ratio.max()), excluded, vorticity_sign(omega))


def radial_hypothesis(omega: ScalarField) -> RadialHypothesis:
    """Check ``omega > 0`` and ``d(omega)/dr > 0`` for a radial vorticity profile."""
    if omega.theta_variation() > RADIAL_TOL:
        raise NotRadial(f"vorticity varies by {omega.theta_variation():.3e} along a circle")
    g = omega.grid
    dr = d_r(g, omega.values)
    min_w = float(omega.values.min())
    min_dr = float(dr.min())
    return RadialHypothesis(min_w > 0 and min_dr > 0, min_w, min_dr, min_dr > 1)


def velocity_gradients(v: VectorField) -> dict[str, FloatArray]:
    """Polar component derivatives ``d v_r/dr``, ``r^-1 d v_r/dtheta``, etc."""
    g = v.grid
    return {
        "dvr_dr": d_r(g, v.v_r, parity=-1.0),
        "dvr_dth": d_theta(g, v.v_r) / g.R,
        "dvt_dr": d_r(g, v.v_theta, parity=-1.0),
        "dvt_dth": d_theta(g, v.v_theta) / g.R,
    }
