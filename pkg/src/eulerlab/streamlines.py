"""Streamline tracing, curvature statistics and stagnation-point analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitUnderresolved, NotClosed, StartAtStagnation, TooDegenerate
from .fields import BilinearSampler, FloatArray, ScalarField, VectorField

STAGNATION_SPEED = 1e-8


@dataclass(frozen=True, eq=False)
class Streamline:
    points: FloatArray
    arclength: FloatArray
    times: FloatArray
    curvature: FloatArray
    closed: bool
    closure_gap: float
    status: str               # closed | left_domain | max_steps | stagnation
    period: float             # travel time to closure (nan if not closed)

    def to_csv(self) -> str:
        lines = ["x,y,arclength,curvature"]
        for (x, y), s, k in zip(self.points, self.arclength, self.curvature):
            lines.append(f"{x:.17g},{y:.17g},{s:.17g},{k:.17g}")
        return "\n".join(lines) + "\n"


def _polar_sampler(v: VectorField) -> BilinearSampler:
    par = -1.0 if v.grid.is_disk else 1.0
    return BilinearSampler(v.grid, [v.v_r, v.v_theta], [par, par])


def _velocity(sampler: BilinearSampler, p: FloatArray) -> FloatArray:
    r = float(np.hypot(p[0], p[1]))
    th = float(np.arctan2(p[1], p[0]))
    vr, vt = sampler(r, th)
    c, s = np.cos(th), np.sin(th)
    return np.array([c * vr - s * vt, s * vr + c * vt])


def circumscribed_curvature(points: FloatArray, closed: bool = False) -> FloatArray:
    """``4 * area / (a b c)`` for each point and its two neighbours."""
    p = np.asarray(points, dtype=float)
    if closed:
        ring = p[:-1] if np.allclose(p[0], p[-1]) else p
        prev, nxt = np.roll(ring, 1, axis=0), np.roll(ring, -1, axis=0)
        k = _menger(prev, ring, nxt)
        return np.append(k, k[0]) if len(ring) < len(p) else k
    k = np.zeros(len(p))
    if len(p) >= 3:
        k[1:-1] = _menger(p[:-2], p[1:-1], p[2:])
        k[0], k[-1] = k[1], k[-2]
    return k


def _menger(a: FloatArray, b: FloatArray, c: FloatArray) -> FloatArray:
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    den = ab * bc * ca
    return np.where(den > 0, 2.0 * np.abs(cross) / np.where(den > 0, den, 1.0), 0.0)


def trace(v: VectorField, x0, step: float | None = None, max_steps: int = 20000) -> Streamline:
    """Integrate ``dx/ds = v / |v|`` by RK4 in arclength from ``x0``.

    The default step is half the local cell size at ``x0``.  Elapsed time is
    accumulated alongside via ``dt/ds = 1/|v|``.  The trace
    stops when it returns within ``step / 2`` of ``x0`` heading the same way,
    when it leaves the domain, or after ``max_steps``.
    """
    g = v.grid
    x0 = np.asarray(x0, dtype=float)
    r0 = np.hypot(*x0)
    step = step or 0.5 * min(g.dr, max(r0, g.dr) * g.dtheta)
    if not (g.r_inner < r0 < g.r_outer or (g.is_disk and r0 < g.r_outer)):
        raise ValueError("start point must lie inside the domain")
    sampler = _polar_sampler(v)
    v0 = _velocity(sampler, x0)
    if np.hypot(*v0) <= STAGNATION_SPEED:
        raise StartAtStagnation(f"|v| = {np.hypot(*v0):.3e} at the start point")
    tangent0 = v0 / np.hypot(*v0)

    def rhs(p):
        w = _velocity(sampler, p[:2])
        speed = np.hypot(*w)
        if speed <= 1e-14:
            return None
        return np.array([w[0] / speed, w[1] / speed, 1.0 / speed])

    pts = [x0.copy()]
    times = [0.0]
    state = np.array([x0[0], x0[1], 0.0])
    status, closed, gap, period = "max_steps", False, float("nan"), float("nan")
    travelled = 0.0
    for _ in range(max_steps):
        k1 = rhs(state)
        k2 = None if k1 is None else rhs(state + 0.5 * step * k1)
        k3 = None if k2 is None else rhs(state + 0.5 * step * k2)
        k4 = None if k3 is None else rhs(state + step * k3)
        if k4 is None:
            status = "stagnation"
            break
        new = state + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        rn = np.hypot(new[0], new[1])
        if rn > g.r_outer or rn < g.r_inner:
            status = "left_domain"
            break
        travelled += step
        a, b = state[:2], new[:2]
        if travelled > 4 * step:
            d = b - a
            s = float(np.clip(np.dot(x0 - a, d) / np.dot(d, d), 0.0, 1.0))
            foot = a + s * d
            dist = float(np.hypot(*(x0 - foot)))
            if dist < 0.5 * step and np.dot(d, tangent0) > 0 and s < 1.0:
                closed, status, gap = True, "closed", dist
                period = float(state[2] + s * (new[2] - state[2]))
                if s * np.sqrt(np.dot(d, d)) < 0.25 * step:
                    # the last vertex nearly coincides with x0; drop it
                    pts.pop()
                    times.pop()
                pts.append(x0.copy())
                times.append(period)
                break
        pts.append(b.copy())
        times.append(float(new[2]))
        state = new
    P = np.asarray(pts)
    seg = np.hypot(*np.diff(P, axis=0).T) if len(P) > 1 else np.zeros(0)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    curv = circumscribed_curvature(P, closed)
    return Streamline(P, arc, np.asarray(times), curv, closed, gap, status, period)


@dataclass(frozen=True)
class CurvatureStats:
    max: float
    mean: float
    total_turn: float


def curvature_stats(s: Streamline) -> CurvatureStats:
    if len(s.points) < 10:
        raise ValueError("curvature statistics need at least 10 points")
    k = s.curvature
    d = np.diff(s.points, axis=0)
    d = d[np.hypot(*d.T) > 0]
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.angle(np.exp(1j * np.diff(ang)))
    if s.closed and len(ang) > 1:
        turn = np.append(turn, np.angle(np.exp(1j * (ang[0] - ang[-1]))))
    return CurvatureStats(float(k.max()), float(k.mean()), float(np.sum(np.abs(turn))))


# ---- winding -----------------------------------------------------------------

def winding_number(polygon: FloatArray, point) -> int:
    p = np.asarray(polygon, dtype=float) - np.asarray(point, dtype=float)
    ang = np.arctan2(p[:, 1], p[:, 0])
    if not np.allclose(p[0], p[-1]):
        ang = np.append(ang, ang[0])
    return int(np.round(np.sum(np.angle(np.exp(1j * np.diff(ang)))) / (2 * np.pi)))


def encircles(s: Streamline, region) -> bool:
    """True when the closed streamline winds once around ``region`` and contains all of it."""
    if not s.closed:
        raise NotClosed("streamline is not closed")
    pts = np.atleast_2d(np.asarray(region, dtype=float))
    centroid = pts.mean(axis=0)
    if abs(winding_number(s.points, centroid)) != 1:
        return False
    return all(winding_number(s.points, p) != 0 for p in pts)


# ---- critical points ---------------------------------------------------------------

def _bilinear_zero(c00, c10, c01, c11) -> tuple[float, float] | None:
    """Newton solve of the bilinear interpolant (2-vectors at the corners) on the unit square."""
    a, b = 0.5, 0.5
    for _ in range(30):
        f = (1 - a) * (1 - b) * c00 + a * (1 - b) * c10 + (1 - a) * b * c01 + a * b * c11
        ja = (1 - b) * (c10 - c00) + b * (c11 - c01)
        jb = (1 - a) * (c01 - c00) + a * (c11 - c10)
        J = np.column_stack([ja, jb])
        det = np.linalg.det(J)
        if abs(det) < 1e-300:
            return None
        da, db = np.linalg.solve(J, -f)
        a, b = a + da, b + db
        if abs(da) + abs(db) < 1e-13:
            break
    if -1e-6 <= a <= 1 + 1e-6 and -1e-6 <= b <= 1 + 1e-6:
        return a, b
    return None


def find_critical_points(v: VectorField) -> list[FloatArray]:
    """Zeros of the velocity: sign-change cells refined by Newton, plus the pole cap on disks."""
    g = v.grid
    vx, vy = v.cartesian()
    n_t = g.n_theta
    found: list[FloatArray] = []

    def changes(f):
        c = [f[:-1], f[1:], np.roll(f, -1, axis=1)[1:], np.roll(f, -1, axis=1)[:-1]]
        lo = np.minimum.reduce(c)
        hi = np.maximum.reduce(c)
        return (lo <= 0) & (hi >= 0)

    cand = changes(vx) & changes(vy)
    for i, j in zip(*np.nonzero(cand)):
        jn = (j + 1) % n_t
        corner = lambda ii, jj: np.array([vx[ii, jj], vy[ii, jj]])  # noqa: E731
        sol = _bilinear_zero(corner(i, j), corner(i + 1, j), corner(i, jn), corner(i + 1, jn))
        if sol is None:
            continue
        a, b = sol
        rr = g.r[i] + a * (g.r[i + 1] - g.r[i])
        th = g.theta[j] + b * g.dtheta
        found.append(np.array([rr * np.cos(th), rr * np.sin(th)]))

    if g.is_disk:
        # linear fit of (vx, vy) on the first two rings covers the uncovered cap r < r_0
        rows = slice(0, 2)
        X = np.column_stack([np.ones(2 * n_t), g.X[rows].ravel(), g.Y[rows].ravel()])
        cx = np.linalg.lstsq(X, vx[rows].ravel(), rcond=None)[0]
        cy = np.linalg.lstsq(X, vy[rows].ravel(), rcond=None)[0]
        A = np.array([[cx[1], cx[2]], [cy[1], cy[2]]])
        if abs(np.linalg.det(A)) > 1e-300:
            z = np.linalg.solve(A, -np.array([cx[0], cy[0]]))
            if np.hypot(*z) <= g.r[0]:
                found.append(z)

    cell = max(g.dr, g.r_outer * g.dtheta)
    unique: list[FloatArray] = []
    for p in found:
        if all(np.hypot(*(p - q)) > cell for q in unique):
            unique.append(p)
    return unique


@dataclass(frozen=True)
class CriticalPointReport:
    location: tuple[float, float]
    kind: str                             # i | ii | iii
    params: dict
    hessian_eigenvalues: tuple[float, float]
    fit_residual: float


def _monomials(xi: FloatArray, eta: FloatArray, degree: int) -> tuple[FloatArray, list[tuple[int, int]]]:
    powers = [(a, k - a) for k in range(degree + 1) for a in range(k, -1, -1)]
    cols = [xi**a * eta**b for a, b in powers]
    return np.column_stack(cols), powers


def _fit(x: FloatArray, y: FloatArray, vals: FloatArray, degree: int):
    M, powers = _monomials(x, y, degree)
    coef, *_ = np.linalg.lstsq(M, vals, rcond=None)
    resid = vals - M @ coef
    return dict(zip(powers, coef)), float(np.sqrt(np.mean(resid**2)))


def _harmonic(coef: dict, k: int) -> complex:
    """``(1/pi) int u_k(cos t, sin t) e^{-ikt} dt`` for the degree-k homogeneous part."""
    t = np.linspace(0, 2 * np.pi, 4 * (k + 2), endpoint=False)
    c, s = np.cos(t), np.sin(t)
    uk = sum(coef[(a, k - a)] * c**a * s ** (k - a) for a in range(k + 1))
    return complex(np.mean(uk * np.exp(-1j * k * t)) * 2.0)


def classify_critical_point(u: ScalarField, x0, degree: int = 5, radius: float | None = None,
                            significance: float = 1e-3) -> CriticalPointReport:
    """Classify a stagnation point by the Hessian rank of a local polynomial fit of ``u``.

    Coefficients are fitted in coordinates scaled by the fit radius, so each
    coefficient is the size of its term's contribution on the fit disk.
    Velocity-form parameters follow ``v = (-u_y, u_x)`` in the principal frame
    of the Hessian: rank 2 gives ``v = (a x_2, b x_1)``; rank 1 gives
    ``v_1 = a x_2`` with ``v_2 ~ alpha x_1^n`` along the degenerate axis; rank
    0 gives ``v = (Im(a z^n), Re(a z^n))``.
    """
    g = u.grid
    x0 = np.asarray(x0, dtype=float)
    r_at = float(np.hypot(*x0))
    h = max(g.dr, max(r_at, g.r[0]) * g.dtheta)
    rho = radius or 5.0 * h
    X, Y = g.X.ravel() - x0[0], g.Y.ravel() - x0[1]
    near = np.hypot(X, Y) <= rho
    n_coef = (degree + 1) * (degree + 2) // 2
    if near.sum() < 2 * n_coef:
        raise FitUnderresolved(f"only {near.sum()} nodes inside the fit radius")
    xi, eta = X[near] / rho, Y[near] / rho
    vals = u.values.ravel()[near]
    coef, resid = _fit(xi, eta, vals, degree)
    scale = max(abs(c) for (a, b), c in coef.items() if a + b >= 2)
    H = np.array([[2 * coef[(2, 0)], coef[(1, 1)]], [coef[(1, 1)], 2 * coef[(0, 2)]]])
    lam, vec = np.linalg.eigh(H)
    order = np.argsort(-np.abs(lam))
    lam, vec = lam[order], vec[:, order]
    lam_phys = tuple(float(x) for x in lam / rho**2)
    significant = np.abs(lam) > significance * scale
    rank = int(significant.sum())
    loc = (float(x0[0]), float(x0[1]))

    lead = np.max(np.abs(lam)) if rank else scale
    if resid > 0.1 * lead:
        raise FitUnderresolved(f"fit residual {resid:.3e} exceeds 10% of the leading term {lead:.3e}")

    if rank == 2:
        # principal frame: x_1 along the first eigenvector
        l1, l2 = lam_phys
        return CriticalPointReport(loc, "i", {"a": -l2, "b": l1}, lam_phys, resid)

    if rank == 1:
        e = vec[:, 0]            # non-degenerate direction (x_2 axis)
        d = np.array([e[1], -e[0]])  # degenerate direction (x_1 axis)
        p1 = xi * d[0] + eta * d[1]
        p2 = xi * e[0] + eta * e[1]
        rc, _ = _fit(p1, p2, vals, degree)
        rscale = max(abs(c) for (a, b), c in rc.items() if a + b >= 2)
        for k in range(3, degree + 1):
            ck = rc[(k, 0)]
            if abs(ck) > significance * rscale:
                if k % 2 == 1:
                    # odd k: the sign flips with the orientation of the x_1 axis
                    ck = abs(ck)
                alpha = k * ck / rho**k
                return CriticalPointReport(loc, "iii", {"a": -lam_phys[0], "alpha": float(alpha),
                                                        "n": k - 1}, lam_phys, resid)
        raise TooDegenerate("no significant pure term along the degenerate direction")

    for k in range(3, degree + 1):
        A = _harmonic(coef, k)
        if abs(A) > significance * scale:
            a = k * A / rho**k
            return CriticalPointReport(loc, "ii", {"a": a, "n": k - 1}, lam_phys, resid)
    raise TooDegenerate("no significant harmonic component up to the fit degree")
