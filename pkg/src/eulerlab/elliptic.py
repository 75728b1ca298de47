"""Dirichlet solvers, logarithmic potentials and level-curve decompositions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateLevel, GridError, NoConvergence, PointOnCurve
from .fields import (FloatArray, Grid, ScalarField, SplineSampler, laplacian_values,
                     pole_closure, radial_stencil, theta_eigenvalues)
from .monotone import MonotoneProfile

TWO_PI = 2.0 * np.pi


# ---- boundary data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dirichlet values on the outer circle and, for annuli, the inner circle.

    Each value is a constant or an array of ``n_theta`` samples.
    """

    outer: float | FloatArray = 0.0
    inner: float | FloatArray | None = None

    def profile(self, grid: Grid, which: str = "outer") -> FloatArray:
        value = self.outer if which == "outer" else self.inner
        if value is None:
            if which == "inner" and not grid.is_disk:
                raise GridError("annulus boundary data needs an inner value")
            value = 0.0
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return np.full(grid.n_theta, float(arr))
        if arr.shape != (grid.n_theta,):
            raise GridError(f"{which} boundary profile has {arr.size} samples, "
                            f"grid has n_theta = {grid.n_theta}")
        if not np.isfinite(arr).all():
            raise GridError(f"{which} boundary profile is not finite")
        return arr

    def check(self, grid: Grid) -> None:
        self.profile(grid, "outer")
        if not grid.is_disk:
            self.profile(grid, "inner")
        elif self.inner is not None:
            raise GridError("disk boundary data takes a single (outer) value")

    def combine(self, a: float, other: BoundaryData, b: float) -> BoundaryData:
        """``a * self + b * other`` as boundary data of the same shape."""
        def mix(p, q):
            if p is None and q is None:
                return None
            p = 0.0 if p is None else np.asarray(p, dtype=float)
            q = 0.0 if q is None else np.asarray(q, dtype=float)
            return a * p + b * q
        return BoundaryData(mix(self.outer, other.outer), mix(self.inner, other.inner))

    @classmethod
    def from_field(cls, u: ScalarField) -> BoundaryData:
        g = u.grid
        if g.is_disk:
            return cls(np.array(u.values[-1]))
        return cls(np.array(u.values[-1]), np.array(u.values[0]))


# ---- Poisson -------------------------------------------------------------------

@dataclass(frozen=True)
class _PoissonOperator:
    rows: slice
    inverse: FloatArray          # (n_modes, n_unknown, n_unknown)
    couple_inner: float          # coefficient of the inner Dirichlet row (annulus)
    couple_outer: float          # coefficient of the outer Dirichlet row


@lru_cache(maxsize=16)
def _poisson_operator(grid: Grid) -> _PoissonOperator:
    """Per-mode radial matrices matching ``laplacian_values`` row for row, inverted."""
    lower, upper = radial_stencil(grid)
    lam = theta_eigenvalues(grid)
    r = grid.r
    n = grid.n_r
    first = 0 if grid.is_disk else 1
    idx = np.arange(first, n - 1)
    nu = idx.size
    mats = np.zeros((lam.size, nu, nu))
    k = np.arange(nu)
    mats[:, k, k] = -(lower[idx] + upper[idx])[None, :] - lam[:, None] / r[idx][None, :] ** 2
    mats[:, k[1:], k[:-1]] = lower[idx[1:]][None, :]
    mats[:, k[:-1], k[1:]] = upper[idx[:-1]][None, :]
    if grid.is_disk:
        a, b = pole_closure(grid)
        mats[:, 0, 0] = a
        mats[:, 0, 1] = b
    inv = np.linalg.inv(mats)
    inv.setflags(write=False)
    return _PoissonOperator(slice(first, n - 1), inv,
                            0.0 if grid.is_disk else float(lower[1]), float(upper[n - 2]))


def solve_poisson(grid: Grid, omega: ScalarField, bc: BoundaryData) -> ScalarField:
    """Solve ``laplacian(u) = omega`` on non-boundary rows with Dirichlet data ``bc``.

    Direct method: real FFT in theta, then one dense-factored radial system
    per Fourier mode built from the same stencil as :func:`laplacian`.
    """
    if omega.grid != grid:
        raise GridError("omega lives on a different grid")
    bc.check(grid)
    op = _poisson_operator(grid)
    outer = bc.profile(grid, "outer")
    rhs = np.fft.rfft(omega.values[op.rows], axis=1).T.copy()     # (modes, rows)
    rhs[:, -1] -= op.couple_outer * np.fft.rfft(outer)
    if not grid.is_disk:
        inner = bc.profile(grid, "inner")
        rhs[:, 0] -= op.couple_inner * np.fft.rfft(inner)
    stacked = np.stack([rhs.real, rhs.imag], axis=-1)              # (modes, rows, 2)
    sol = np.matmul(op.inverse, stacked)
    sol_h = sol[..., 0] + 1j * sol[..., 1]
    u = np.empty(grid.shape)
    u[op.rows] = np.fft.irfft(sol_h.T, n=grid.n_theta, axis=1)
    u[-1] = outer
    if not grid.is_disk:
        u[0] = inner
    return ScalarField(grid, u)


def poisson_residual(u: ScalarField, omega: ScalarField) -> float:
    """``max |laplacian(u) - omega|`` over the rows where the equation is imposed."""
    g = u.grid
    res = laplacian_values(g, u.values) - omega.values
    return float(np.max(np.abs(res[g.interior])))


# ---- semilinear ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SemilinearResult:
    u: ScalarField
    residual: float
    iterations: int
    damping: float


def solve_semilinear(grid: Grid, f: MonotoneProfile, bc: BoundaryData, u0: ScalarField | None = None,
                     tol: float = 1e-9, max_iter: int = 500) -> SemilinearResult:
    """Picard iteration for ``laplacian(u) = f(u)``.

    Each sweep is relaxed by a factor that shrinks by 0.8 whenever the update
    norm grows, which tames the oscillation of the antitone fixed-point map.
    """
    u = ScalarField.zeros(grid) if u0 is None else u0
    if u.grid != grid:
        raise GridError("initial guess lives on a different grid")
    beta = 1.0
    prev = np.inf
    for it in range(1, max_iter + 1):
        target = solve_poisson(grid, f.apply(u), bc)
        delta = target.values - u.values
        norm = float(np.max(np.abs(delta)))
        if norm > prev:
            beta *= 0.8
        prev = norm
        if norm < tol:
            # the undamped image satisfies the equation up to slope(f) * norm
            res = poisson_residual(target, f.apply(target))
            return SemilinearResult(target, res, it, beta)
        u = u.with_values(u.values + beta * delta)
    res = poisson_residual(u, f.apply(u))
    raise NoConvergence(f"Picard iteration did not settle in {max_iter} sweeps "
                        f"(residual {res:.3e})", res, max_iter)


# ---- potentials ----------------------------------------------------------------------

def _points(x) -> tuple[FloatArray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def newtonian_potential(omega: ScalarField, x) -> float | FloatArray:
    """``int omega(y) H(x - y) dy`` with ``H = log|x| / 2 pi``, by cell quadrature.

    Nodes whose equal-area disk contains ``x`` contribute the exact mean of
    ``H`` over that disk, ``A (log rho - 1/2) / 2 pi``.
    """
    g = omega.grid
    pts, single = _points(x)
    weights = (omega.values * g.areas).ravel()
    rho = np.sqrt(g.areas / np.pi).ravel()
    gx, gy = g.X.ravel(), g.Y.ravel()
    out = np.empty(len(pts))
    for k, (px, py) in enumerate(pts):
        d = np.hypot(px - gx, py - gy)
        near = d < rho
        kern = np.where(near, np.log(rho) - 0.5, np.log(np.where(near, 1.0, d)))
        out[k] = np.dot(weights, kern) / TWO_PI
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class LevelCurve:
    """Polyline on ``{u = level}``; closed curves repeat their first point at the end."""

    points: FloatArray
    level: float
    normal_derivative: FloatArray
    closed: bool

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))

    def segment_lengths(self) -> FloatArray:
        return np.hypot(*np.diff(self.points, axis=0).T)


def _segment_log_integral(p: FloatArray, q: FloatArray, x: FloatArray) -> FloatArray:
    """Exact ``int_[p,q] log|x - y| ds`` for every segment and query point.

    Shapes: ``p, q`` are (S, 2); ``x`` is (P, 2); the result is (P, S).
    """
    d = q - p
    L = np.hypot(d[:, 0], d[:, 1])
    e = d / np.where(L > 0, L, 1.0)[:, None]
    rel = x[:, None, :] - p[None, :, :]
    t0 = -(rel[..., 0] * e[None, :, 0] + rel[..., 1] * e[None, :, 1])
    t1 = t0 + L[None, :]
    h = np.abs(rel[..., 0] * e[None, :, 1] - rel[..., 1] * e[None, :, 0])

    def prim(t):
        sq = t * t + h * h
        tlog = np.where(sq > 0, t * np.log(np.where(sq > 0, sq, 1.0)), 0.0)
        ang = np.where(h > 0, h * np.arctan2(t, np.where(h > 0, h, 1.0)), 0.0)
        return 0.5 * tlog - t + ang

    return prim(t1) - prim(t0)


def single_layer(curve: LevelCurve, mu, x, rule: str = "trapezoid") -> float | FloatArray:
    """``int_curve mu(y) H(x - y) ds``.

    ``rule='trapezoid'`` is the plain polyline trapezoid rule and rejects points
    within one segment length of the curve.  ``rule='segment'`` integrates the
    logarithm exactly on each segment with ``mu`` averaged per segment, which
    stays accurate arbitrarily close to the curve.
    """
    pts, single = _points(x)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (len(curve.points),))
    p, q = curve.points[:-1], curve.points[1:]
    seg = np.hypot(*(q - p).T)
    if rule == "trapezoid":
        dist = _distance_to_segments(p, q, pts)
        nearest = np.argmin(dist, axis=1)
        if np.any(dist[np.arange(len(pts)), nearest] < seg[nearest]):
            raise PointOnCurve("evaluation point lies within one segment of the curve")
        r = np.hypot(pts[:, None, 0] - curve.points[None, :, 0],
                     pts[:, None, 1] - curve.points[None, :, 1])
        vals = mu[None, :] * np.log(r) / TWO_PI
        out = np.sum(0.5 * (vals[:, :-1] + vals[:, 1:]) * seg[None, :], axis=1)
    elif rule == "segment":
        mbar = 0.5 * (mu[:-1] + mu[1:])
        out = _segment_log_integral(p, q, pts) @ mbar / TWO_PI
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return float(out[0]) if single else out


def _distance_to_segments(p: FloatArray, q: FloatArray, x: FloatArray) -> FloatArray:
    d = q - p
    L2 = np.maximum(np.sum(d * d, axis=1), 1e-300)
    rel = x[:, None, :] - p[None, :, :]
    s = np.clip((rel[..., 0] * d[None, :, 0] + rel[..., 1] * d[None, :, 1]) / L2, 0.0, 1.0)
    cx = p[None, :, 0] + s * d[None, :, 0]
    cy = p[None, :, 1] + s * d[None, :, 1]
    return np.hypot(x[:, None, 0] - cx, x[:, None, 1] - cy)


# ---- level curves -----------------------------------------------------------------------

def _march(values: FloatArray, t: float) -> list[tuple[tuple, tuple]]:
    """Marching-squares segments in index space, periodic in the second axis.

    Edges are keyed ``('r', i, j)`` (from node (i, j) to (i+1, j)) and
    ``('t', i, j)`` (from (i, j) to (i, j+1)).
    """
    n_r, n_t = values.shape
    above = values >= t
    a = above[:-1]
    b = above[1:]
    c = np.roll(above, -1, axis=1)[1:]
    d = np.roll(above, -1, axis=1)[:-1]
    code = a * 1 + b * 2 + c * 4 + d * 8
    segs = []
    ii, jj = np.nonzero((code != 0) & (code != 15))
    for i, j in zip(ii.tolist(), jj.tolist()):
        jn = (j + 1) % n_t
        left = ("r", i, j)          # corners (i,j)-(i+1,j)
        right = ("r", i, jn)        # corners (i,j+1)-(i+1,j+1)
        low = ("t", i, j)           # corners (i,j)-(i,j+1)
        high = ("t", i + 1, j)      # corners (i+1,j)-(i+1,j+1)
        k = int(code[i, j])
        table = {
            1: [(left, low)], 14: [(left, low)],
            2: [(left, high)], 13: [(left, high)],
            4: [(high, right)], 11: [(high, right)],
            8: [(low, right)], 7: [(low, right)],
            3: [(low, high)], 12: [(low, high)],
            6: [(left, right)], 9: [(left, right)],
        }
        if k in (5, 10):
            centre = 0.25 * (values[i, j] + values[i + 1, j] + values[i + 1, jn] + values[i, jn])
            # 5: (i,j) and (i+1,j+1) above
            if (centre >= t) == (k == 5):
                segs.extend([(left, high), (low, right)])
            else:
                segs.extend([(left, low), (high, right)])
        else:
            segs.extend(table[k])
    return segs


def _chain(segs: list[tuple[tuple, tuple]]) -> list[tuple[list[tuple], bool]]:
    adj: dict[tuple, list[int]] = {}
    for k, (e0, e1) in enumerate(segs):
        adj.setdefault(e0, []).append(k)
        adj.setdefault(e1, []).append(k)
    used = np.zeros(len(segs), dtype=bool)

    def walk(start_edge, seg_id):
        path = [start_edge]
        edge = start_edge
        while True:
            used[seg_id] = True
            e0, e1 = segs[seg_id]
            edge = e1 if e0 == edge else e0
            path.append(edge)
            nxt = [s for s in adj[edge] if not used[s]]
            if not nxt:
                return path
            seg_id = nxt[0]

    chains = []
    # open chains start at edges touched by a single segment
    for edge, ids in adj.items():
        if len(ids) == 1 and not used[ids[0]]:
            chains.append((walk(edge, ids[0]), False))
    for k in range(len(segs)):
        if not used[k]:
            path = walk(segs[k][0], k)
            chains.append((path, path[0] == path[-1]))
    return chains


def extract_level_curves(u: ScalarField, levels, min_gradient: float = 1e-6) -> list[LevelCurve]:
    """Contours ``{u = t}`` for each ``t``, with ``|grad u|`` sampled on every point."""
    g = u.grid
    vals = u.values
    lo, hi = float(vals.min()), float(vals.max())
    spline = SplineSampler(g, vals)
    curves: list[LevelCurve] = []
    for t in np.atleast_1d(np.asarray(levels, dtype=float)):
        if not lo < t < hi:
            raise DegenerateLevel(f"level {t:.6g} is not strictly inside the range [{lo:.6g}, {hi:.6g}]")
        if not g.is_disk and (np.allclose(vals[0], t) or np.allclose(vals[-1], t)):
            raise DegenerateLevel(f"level {t:.6g} coincides with a boundary circle")
        if g.is_disk and np.allclose(vals[-1], t):
            raise DegenerateLevel(f"level {t:.6g} coincides with the boundary circle")
        for path, closed in _chain(_march(vals, t)):
            rr = np.empty(len(path))
            th = np.empty(len(path))
            for k, (kind, i, j) in enumerate(path):
                if kind == "r":
                    v0, v1 = vals[i, j], vals[i + 1, j]
                    s = (t - v0) / (v1 - v0)
                    rr[k] = g.r[i] + s * (g.r[i + 1] - g.r[i])
                    th[k] = g.theta[j]
                else:
                    jn = (j + 1) % g.n_theta
                    v0, v1 = vals[i, j], vals[i, jn]
                    s = (t - v0) / (v1 - v0)
                    rr[k] = g.r[i]
                    th[k] = g.theta[j] + s * g.dtheta
            ur = spline.polar(rr, th, dr=1)
            ut = spline.polar(rr, th, dth=1)
            grad = np.hypot(ur, ut / rr)
            if grad.min() < min_gradient:
                raise DegenerateLevel(f"|grad u| = {grad.min():.3e} on level {t:.6g}")
            pts = np.column_stack([rr * np.cos(th), rr * np.sin(th)])
            if closed:
                pts[-1] = pts[0]
                grad[-1] = grad[0]
            curves.append(LevelCurve(pts, float(t), grad, closed))
    return curves


# ---- coarea decomposition ---------------------------------------------------------------

def _tail_fraction(u: ScalarField, t: float, below: bool) -> FloatArray:
    """Fraction of each cell on one side of ``t``, assuming u is linear across the cell."""
    g = u.grid
    from .fields import d_r, d_theta
    ur = d_r(g, u.values)
    ut = d_theta(g, u.values) / g.R
    mag = np.hypot(ur, ut)
    width = (np.abs(ur) * g.dr + np.abs(ut) * g.R * g.dtheta) / np.where(mag > 0, mag, 1.0)
    span = np.maximum(mag * width, 1e-300)
    frac_below = np.clip(0.5 + (t - u.values) / span, 0.0, 1.0)
    return frac_below if below else 1.0 - frac_below


@dataclass(frozen=True, eq=False)
class CoareaResult:
    deviation: float
    samples: FloatArray
    reconstructed: FloatArray
    exact: FloatArray
    levels: FloatArray


def coarea_identity_check(u: ScalarField, f: MonotoneProfile, samples, n_levels: int = 200,
                          quantiles: tuple[float, float] = (0.01, 0.99)) -> CoareaResult:
    """Rebuild ``u`` from level-curve single layers weighted by ``f`` and compare.

    Levels are the left ends of ``n_levels`` uniform bins covering the chosen
    fraction of the range of ``u`` (a left Riemann sum, first order in the
    spacing).  The two excluded tails are added back
    as Newtonian potentials of ``f(u)`` restricted to them, and the harmonic
    correction ``w`` takes the boundary values of ``u`` minus the sum.
    """
    g = u.grid
    pts, _ = _points(samples)
    lo, hi = float(u.values.min()), float(u.values.max())
    t_lo = lo + quantiles[0] * (hi - lo)
    t_hi = lo + quantiles[1] * (hi - lo)
    dt = (t_hi - t_lo) / n_levels
    levels = t_lo + np.arange(n_levels) * dt

    bnd_rows = list(g.boundary_rows)
    bnd = np.concatenate([np.column_stack([g.X[i], g.Y[i]]) for i in bnd_rows])
    targets = np.vstack([pts, bnd])

    total = np.zeros(len(targets))
    fvals = f(levels)
    for t, ft in zip(levels, fvals):
        if ft == 0.0:
            continue
        for curve in extract_level_curves(u, [t]):
            total += ft * dt * single_layer(curve, 1.0 / curve.normal_derivative, targets, rule="segment")

    fu = f(u.values)
    tails = fu * (_tail_fraction(u, t_lo, below=True) + _tail_fraction(u, t_hi, below=False))
    total += newtonian_potential(u.with_values(tails), targets)

    n_s = len(pts)
    gap = np.split(total[n_s:], len(bnd_rows))
    rows = {i: u.values[i] - gp for i, gp in zip(bnd_rows, gap)}
    if g.is_disk:
        bc = BoundaryData(rows[g.n_r - 1])
    else:
        bc = BoundaryData(rows[g.n_r - 1], rows[0])
    w = solve_poisson(g, ScalarField.zeros(g), bc)
    rec = total[:n_s] + SplineSampler(g, w.values)(pts[:, 0], pts[:, 1])
    exact = SplineSampler(g, u.values)(pts[:, 0], pts[:, 1])
    return CoareaResult(float(np.max(np.abs(rec - exact))), pts, rec, exact, levels)


def default_sample_points(grid: Grid, count: int = 10) -> FloatArray:
    """Deterministic interior probes on a spiral between 20% and 80% of the radial span."""
    k = np.arange(count)
    frac = 0.2 + 0.6 * (k + 0.5) / count
    rr = grid.r_inner + frac * (grid.r_outer - grid.r_inner)
    th = 2.399963229728653 * k
    return np.column_stack([rr * np.cos(th), rr * np.sin(th)])
