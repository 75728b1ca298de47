"""Angular-gradient functionals, velocity Jacobians and perturbation experiments.

For a field ``h`` with ``dh/dr > 0`` on an annulus the ratio
``q = (r^-1 dh/dtheta) / |grad h|`` is the sine of the angle between the
gradient and the radial direction.  ``h_plus = sup q``, ``h_minus = inf q``
and ``h_star = h_plus - h_minus`` vanishes exactly for radial fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import BoundaryData
from .errors import BranchUndetermined, GradientDegenerate, NotMonotoneRadial
from .evolve import EvolutionConfig, Trajectory, evolve, perturb
from .fields import FloatArray, ScalarField, SplineSampler, VectorField, d_r, d_theta
from .steady import radial_hypothesis


# ---- functionals -------------------------------------------------------------

@dataclass(frozen=True)
class AngleFunctionals:
    h_plus: float
    h_minus: float
    h_star: float
    argmax: tuple[float, float]
    argmin: tuple[float, float]


def _trig_peak(coef: FloatArray, theta0: FloatArray, n: int) -> tuple[FloatArray, FloatArray]:
    """Refine maxima of real trigonometric interpolants by Newton steps.

    ``coef`` holds rfft coefficients per row; ``theta0`` the starting angles.
    """
    m = np.arange(coef.shape[1])
    w = np.full(coef.shape[1], 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    c = coef * w / n
    th = theta0.copy()
    for _ in range(6):
        e = np.exp(1j * np.outer(th, m))
        d1 = np.real(np.sum(c * (1j * m) * e, axis=1))
        d2 = np.real(np.sum(c * (-(m**2)) * e, axis=1))
        ok = d2 < 0
        stepv = np.where(ok, -d1 / np.where(ok, d2, 1.0), 0.0)
        th = th + np.clip(stepv, -np.pi / n, np.pi / n)
    e = np.exp(1j * np.outer(th, m))
    return th, np.real(np.sum(c * e, axis=1))


def _vertex(y0: float, y1: float, y2: float) -> tuple[float, float]:
    """Offset (in steps) and value of the parabola through three equally spaced samples."""
    den = y0 - 2 * y1 + y2
    if den >= 0:
        return 0.0, y1
    off = 0.5 * (y0 - y2) / den
    off = float(np.clip(off, -0.5, 0.5))
    return off, y1 + 0.25 * (y2 - y0) * off


def _refined_sup(q: FloatArray, rows: FloatArray, theta: FloatArray) -> tuple[float, float, float]:
    """Sup of ``q`` over its grid with sub-cell refinement.

    Each row is maximised on its trigonometric interpolant; the row maxima are
    then refined by a parabola in r.  Nodal sampling alone would let the value
    jitter by ``O(dtheta^2)`` as features rotate past the nodes.
    """
    n = q.shape[1]
    coef = np.fft.rfft(q, axis=1)
    j0 = np.argmax(q, axis=1)
    th, peaks = _trig_peak(coef, theta[j0], n)
    peaks = np.maximum(peaks, q.max(axis=1))
    i = int(np.argmax(peaks))
    if 0 < i < len(peaks) - 1:
        off, val = _vertex(peaks[i - 1], peaks[i], peaks[i + 1])
        r_at = rows[i] + off * (rows[1] - rows[0])
        return max(val, float(peaks[i])), float(r_at), float(th[i])
    return float(peaks[i]), float(rows[i]), float(th[i])


def angle_ratio(h: ScalarField) -> tuple[FloatArray, FloatArray, FloatArray]:
    """``q``, ``|grad h|`` and ``dh/dr`` on the grid."""
    g = h.grid
    hr = d_r(g, h.values)
    ht = d_theta(g, h.values) / g.R
    mag = np.hypot(hr, ht)
    return ht / np.where(mag > 0, mag, 1.0), mag, hr


def angle_functionals(h: ScalarField, grad_tol: float = 0.0, refine: bool = True) -> AngleFunctionals:
    """``sup``/``inf`` of ``q`` over interior rows.

    With ``refine`` the extrema are located between nodes (see
    :func:`_refined_sup`); otherwise nodal extrema are returned.
    """
    g = h.grid
    q, mag, hr = angle_ratio(h)
    rows = g.interior
    q, mag, hr = q[rows], mag[rows], hr[rows]
    radii = g.r[rows]
    if mag.min() <= grad_tol:
        raise GradientDegenerate(f"min |grad h| = {mag.min():.3e} <= {grad_tol:.3e}")
    if hr.min() <= 0:
        raise NotMonotoneRadial(f"dh/dr reaches {hr.min():.3e}")
    if refine:
        hp, rp, tp = _refined_sup(q, radii, g.theta)
        hm, rm, tm = _refined_sup(-q, radii, g.theta)
        hm = -hm
    else:
        ip = np.unravel_index(np.argmax(q), q.shape)
        im = np.unravel_index(np.argmin(q), q.shape)
        hp, rp, tp = float(q[ip]), float(radii[ip[0]]), float(g.theta[ip[1]])
        hm, rm, tm = float(q[im]), float(radii[im[0]]), float(g.theta[im[1]])
    if q.max() - q.min() == 0.0:
        hp = hm = 0.0
    hm = min(hm, hp)
    return AngleFunctionals(hp, hm, hp - hm, (rp * np.cos(tp), rp * np.sin(tp)),
                            (rm * np.cos(tm), rm * np.sin(tm)))


# ---- Jacobians and transport --------------------------------------------------------

def jacobian_at(v: VectorField, x, step: float | None = None) -> FloatArray:
    """Centred-difference Jacobian ``d(v_x, v_y)/d(x, y)`` of the Cartesian velocity at ``x``."""
    g = v.grid
    vx, vy = v.cartesian()
    sx, sy = SplineSampler(g, vx), SplineSampler(g, vy)
    return _jacobian(sx, sy, np.asarray(x, dtype=float), step or 0.5 * g.h_min)


def _jacobian(sx: SplineSampler, sy: SplineSampler, x: FloatArray, d: float) -> FloatArray:
    pts = np.atleast_2d(x)
    out = np.empty((len(pts), 2, 2))
    for k, (px, py) in enumerate(pts):
        xs = np.array([px + d, px - d, px, px])
        ys = np.array([py, py, py + d, py - d])
        ax, ay = sx(xs, ys), sy(xs, ys)
        out[k] = [[(ax[0] - ax[1]) / (2 * d), (ax[2] - ax[3]) / (2 * d)],
                  [(ay[0] - ay[1]) / (2 * d), (ay[2] - ay[3]) / (2 * d)]]
    return out[0] if np.ndim(x) == 1 else out


def corotating_jacobian(v: VectorField, x) -> FloatArray:
    """Jacobian in the polar frame at ``x`` with the local rigid rotation removed.

    For a radial shear flow this is ``[[0, 0], [a, 0]]`` with
    ``a = d v_theta/dr - v_theta / r``.
    """
    x = np.asarray(x, dtype=float)
    J = jacobian_at(v, x)
    th = np.arctan2(x[1], x[0])
    c, s = np.cos(th), np.sin(th)
    Rm = np.array([[c, -s], [s, c]])
    vx, vy = v.cartesian()
    g = v.grid
    v_t = -s * SplineSampler(g, vx)(x[0], x[1]) + c * SplineSampler(g, vy)(x[0], x[1])
    spin = float(v_t) / float(np.hypot(*x))
    return Rm.T @ J @ Rm - spin * np.array([[0.0, -1.0], [1.0, 0.0]])


def probe_points(grid, count: int = 10) -> FloatArray:
    """``count x count`` polar probes between 20% and 80% of the radial span."""
    frac = 0.2 + 0.6 * np.arange(count) / max(count - 1, 1)
    rr = grid.r_inner + frac * (grid.r_outer - grid.r_inner)
    th = 2 * np.pi * (np.arange(count) + 0.5) / count
    R, T = np.meshgrid(rr, th, indexing="ij")
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def vorticity_gradient_transport_check(omega: ScalarField, v: VectorField, dt: float,
                                       probes: FloatArray | None = None) -> float:
    """Compare the rate of change of ``grad omega`` along particle paths with ``-J^T grad omega``.

    ``omega`` is advected one RK4 step by the frozen field ``v`` and the probes
    are carried along the same field.  The returned deviation is relative to
    the largest predicted rate (absolute when the prediction vanishes).
    """
    g = omega.grid
    pts = probe_points(g) if probes is None else np.atleast_2d(probes)
    vx, vy = v.cartesian()
    sx, sy = SplineSampler(g, vx), SplineSampler(g, vy)

    def rate(w):
        return -(v.v_r * d_r(g, w) + v.v_theta * d_theta(g, w) / g.R)

    w0 = omega.values
    k1 = rate(w0)
    k2 = rate(w0 + 0.5 * dt * k1)
    k3 = rate(w0 + 0.5 * dt * k2)
    k4 = rate(w0 + dt * k3)
    w1 = w0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def vel(p):
        return np.column_stack([sx(p[:, 0], p[:, 1]), sy(p[:, 0], p[:, 1])])

    a1 = vel(pts)
    a2 = vel(pts + 0.5 * dt * a1)
    a3 = vel(pts + 0.5 * dt * a2)
    a4 = vel(pts + dt * a3)
    moved = pts + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)

    def cart_grad(w, p):
        s = SplineSampler(g, w)
        rr = np.hypot(p[:, 0], p[:, 1])
        th = np.arctan2(p[:, 1], p[:, 0])
        fr, ft = s.polar(rr, th, dr=1), s.polar(rr, th, dth=1) / rr
        c, sn = np.cos(th), np.sin(th)
        return np.column_stack([c * fr - sn * ft, sn * fr + c * ft])

    g0 = cart_grad(w0, pts)
    g1 = cart_grad(w1, moved)
    J = _jacobian(sx, sy, pts, 0.5 * g.h_min)
    pred = -np.einsum("kji,kj->ki", J, g0)
    dev = np.max(np.hypot(*((g1 - g0) / dt - pred).T))
    scale = float(np.max(np.hypot(*pred.T)))
    return float(dev / scale) if scale > 0 else float(dev)


# ---- experiments -----------------------------------------------------------------------

def neighbourhood_gauge(omega: ScalarField, base: ScalarField) -> float:
    """Discrete C^2 size of ``omega - base``: the largest of the max norms of the
    deviation and of its first and second divided differences in r and arclength."""
    g = omega.grid
    d = omega.values - base.values
    arc = g.R * g.dtheta
    d1r = np.diff(d, axis=0) / g.dr
    d1t = (np.roll(d, -1, axis=1) - d) / arc
    d2r = np.diff(d, 2, axis=0) / g.dr**2
    d2t = (np.roll(d, -1, axis=1) - 2 * d + np.roll(d, 1, axis=1)) / arc**2
    d2x = np.diff(np.roll(d, -1, axis=1) - d, axis=0) / (g.dr * arc[:-1])
    norms = [np.abs(a).max() for a in (d, d1r, d1t, d2r, d2t, d2x)]
    return float(max(norms))


def angle_observer(refine: bool = True):
    def observe(t, omega, u):
        af = angle_functionals(omega, refine=refine)
        return {"omega_plus": af.h_plus, "omega_minus": af.h_minus}
    return observe


@dataclass
class GrowthReport:
    times: FloatArray
    omega_plus: FloatArray
    omega_minus: FloatArray
    gauge: FloatArray
    c0: float
    d_omega_plus_dt0: float
    branch: str
    window: int
    trajectory: Trajectory = field(repr=False)

    def series_csv(self) -> str:
        lines = ["t,omega_plus,omega_minus,gauge"]
        for row in zip(self.times, self.omega_plus, self.omega_minus, self.gauge):
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"

    @property
    def monotone_on_window(self) -> bool:
        s = self.omega_plus if self.branch == "plus" else -self.omega_minus
        return bool(np.all(np.diff(s[: self.window]) > 0))


def _branch(op: FloatArray, om: FloatArray) -> str:
    """``plus`` when ``omega_plus > -omega_minus`` from the first stride on."""
    scale = max(op[0] - om[0], 1e-300)
    s0 = op[0] + om[0]
    s1 = op[1] + om[1]
    tiny = 1e-9 * scale
    sign0 = 0 if abs(s0) <= tiny else np.sign(s0)
    sign1 = 0 if abs(s1) <= tiny else np.sign(s1)
    if sign0 and sign1 and sign0 != sign1:
        raise BranchUndetermined("omega_plus + omega_minus changes sign in the first stride")
    sign = sign1 or sign0
    if not sign:
        raise BranchUndetermined("omega_plus + omega_minus stays zero over the first stride")
    return "plus" if sign > 0 else "minus"


def growth_experiment(base: ScalarField, epsilon: float, m: int, psi, bc: BoundaryData,
                      config: EvolutionConfig, refine: bool = True) -> GrowthReport:
    """Evolve a perturbed radial state and fit the initial exponential growth of ``omega_plus``.

    The fit window starts at t = 0 and ends when the tracked functional has
    doubled or the branch condition first fails.
    """
    radial_hypothesis(base)
    w0 = perturb(base, epsilon, m, psi)

    def gauge(t, omega, u):
        return {"gauge": neighbourhood_gauge(omega, base)}

    traj = evolve(w0, bc, config, [angle_observer(refine), gauge])
    t = np.asarray(traj.times)
    op = np.asarray(traj.series["omega_plus"])
    om = np.asarray(traj.series["omega_minus"])
    ga = np.asarray(traj.series["gauge"])
    if len(t) < 3:
        raise BranchUndetermined("need at least two recorded strides")
    branch = _branch(op, om)
    track = op if branch == "plus" else -om
    cond = (op + om > 0) if branch == "plus" else (op + om < 0)
    end = 1
    while end < len(t) and (cond[end] or end == 1) and track[end] < 2 * track[0]:
        end += 1
    end = max(end, 2)
    d0 = float((track[1] - track[0]) / (t[1] - t[0]))
    positive = track[:end] > 0
    if positive.sum() >= 2:
        c0 = float(np.polyfit(t[:end][positive], np.log(track[:end][positive]), 1)[0])
    else:
        c0 = float("nan")
    return GrowthReport(t, op, om, ga, c0, d0, branch, end, traj)


@dataclass(frozen=True)
class EscapeResult:
    escaped: bool
    t_escape: float
    times: FloatArray
    gauge: FloatArray
    omega_plus: FloatArray
    omega_minus: FloatArray


def escape_experiment(base: ScalarField, epsilon: float, m: int, psi, bc: BoundaryData,
                      delta: float, t_max: float, config: EvolutionConfig | None = None,
                      refine: bool = True) -> EscapeResult:
    """Run until the neighbourhood gauge of ``omega - base`` first exceeds ``delta``.

    The gauge is tested at record strides after t = 0; ``escaped`` is false if
    it never trips before ``t_max``.
    """
    radial_hypothesis(base)
    cfg = config or EvolutionConfig(t_max)
    cfg = EvolutionConfig(t_max, cfg.dt, cfg.cfl, cfg.stride, cfg.filter, keep_snapshots=False)
    w0 = perturb(base, epsilon, m, psi)

    def observe(t, omega, u):
        rec = {"gauge": neighbourhood_gauge(omega, base)}
        if epsilon != 0:
            rec.update(angle_observer(refine)(t, omega, u))
        return rec

    def until(t, rec):
        return t > 0 and rec["gauge"] > delta

    traj = evolve(w0, bc, cfg, [observe], until)
    t = np.asarray(traj.times)
    ga = np.asarray(traj.series["gauge"])
    op = np.asarray(traj.series.get("omega_plus", np.zeros_like(t)))
    om = np.asarray(traj.series.get("omega_minus", np.zeros_like(t)))
    hit = np.nonzero((ga > delta) & (t > 0))[0]
    if hit.size:
        return EscapeResult(True, float(t[hit[0]]), t, ga, op, om)
    return EscapeResult(False, float("nan"), t, ga, op, om)


def shear_pattern(v: VectorField) -> dict[str, float]:
    """Max magnitudes of the polar velocity derivatives over interior rows."""
    g = v.grid
    rows = g.interior
    out = {
        "dvt_dr_min": float(np.min(np.abs(d_r(g, v.v_theta, -1.0)[rows]))),
        "dvt_dth": float(np.max(np.abs((d_theta(g, v.v_theta) / g.R)[rows]))),
        "dvr_dth": float(np.max(np.abs((d_theta(g, v.v_r) / g.R)[rows]))),
        "dvr_dr": float(np.max(np.abs(d_r(g, v.v_r, -1.0)[rows]))),
    }
    return out

