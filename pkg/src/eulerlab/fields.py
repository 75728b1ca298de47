"""Structured polar grids, grid-sampled fields and discrete operators.

Conventions used throughout the package:

* ``values[i, j]`` is the sample at radius ``grid.r[i]`` and angle ``grid.theta[j]``.
* Annulus grids carry both radial boundaries as node rows.  Disk grids are
  cell-centred in r (first row at ``dr / 2``) so the pole is never stored; the
  last row sits on the boundary circle.
* The stream function ``u`` and the vorticity satisfy ``omega = laplacian(u)``
  with velocity ``v_r = -r^-1 du/dtheta``, ``v_theta = du/dr``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RectBivariateSpline

from .errors import GridError

FloatArray = NDArray[np.float64]
GridKind = Literal["annulus", "disk"]

_INTERP_PAD = 3


@dataclass(frozen=True)
class Grid:
    """Uniform polar mesh on an annulus ``r_inner < r < r_outer`` or a disk."""

    kind: GridKind
    r_inner: float
    r_outer: float
    n_r: int
    n_theta: int

    def __post_init__(self) -> None:
        if self.kind not in ("annulus", "disk"):
            raise GridError(f"unknown grid kind {self.kind!r}")
        if self.kind == "disk" and self.r_inner != 0.0:
            raise GridError("disk grids require r_inner = 0")
        if not (0.0 <= self.r_inner < self.r_outer) or not np.isfinite(self.r_outer):
            raise GridError("need 0 <= r_inner < r_outer")
        if self.n_r < 4:
            raise GridError("n_r must be >= 4")
        if self.n_theta < 8 or self.n_theta % 2:
            raise GridError("n_theta must be even and >= 8")
        if self.kind == "annulus" and self.r_inner <= 0.0:
            raise GridError("annulus grids require r_inner > 0")

    @classmethod
    def annulus(cls, r_inner: float = 1.0, r_outer: float = 2.0, n_r: int = 64,
                n_theta: int = 128) -> Grid:
        return cls("annulus", float(r_inner), float(r_outer), int(n_r), int(n_theta))

    @classmethod
    def disk(cls, radius: float = 1.0, n_r: int = 64, n_theta: int = 128) -> Grid:
        return cls("disk", 0.0, float(radius), int(n_r), int(n_theta))

    # ---- geometry -------------------------------------------------------
    @property
    def is_disk(self) -> bool:
        return self.kind == "disk"

    @cached_property
    def dr(self) -> float:
        if self.is_disk:
            return self.r_outer / (self.n_r - 0.5)
        return (self.r_outer - self.r_inner) / (self.n_r - 1)

    @cached_property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @cached_property
    def r(self) -> FloatArray:
        if self.is_disk:
            r = (np.arange(self.n_r) + 0.5) * self.dr
            r[-1] = self.r_outer
            return r
        r = self.r_inner + np.arange(self.n_r) * self.dr
        r[-1] = self.r_outer
        return r

    @cached_property
    def theta(self) -> FloatArray:
        return np.arange(self.n_theta) * self.dtheta

    @cached_property
    def R(self) -> FloatArray:
        return np.broadcast_to(self.r[:, None], self.shape).copy()

    @cached_property
    def TH(self) -> FloatArray:
        return np.broadcast_to(self.theta[None, :], self.shape).copy()

    @cached_property
    def X(self) -> FloatArray:
        return self.R * np.cos(self.TH)

    @cached_property
    def Y(self) -> FloatArray:
        return self.R * np.sin(self.TH)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def boundary_rows(self) -> tuple[int, ...]:
        return (self.n_r - 1,) if self.is_disk else (0, self.n_r - 1)

    @property
    def interior(self) -> slice:
        """Rows on which the field equations are imposed (non-Dirichlet rows)."""
        return slice(0, self.n_r - 1) if self.is_disk else slice(1, self.n_r - 1)

    @cached_property
    def interior_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.interior] = True
        return mask

    @cached_property
    def h_min(self) -> float:
        return float(min(self.dr, self.r[0] * self.dtheta))

    @property
    def area(self) -> float:
        return float(np.pi * (self.r_outer**2 - self.r_inner**2))

    @cached_property
    def radial_weights(self) -> FloatArray:
        """Weights ``w_i`` with ``sum w_i g(r_i) = int g(r) r dr`` for g linear in r^2.

        Trapezoid rule in ``s = r^2``; on disks the pole cap ``0 < s < s_0`` is
        closed by linear extrapolation from the first two rows.
        """
        s = self.r**2
        w = np.empty(self.n_r)
        w[1:-1] = 0.25 * (s[2:] - s[:-2])
        w[0] = 0.25 * (s[1] - s[0])
        w[-1] = 0.25 * (s[-1] - s[-2])
        if self.is_disk:
            s0, ds = s[0], s[1] - s[0]
            w[0] += 0.5 * s0 * (1.0 + s0 / (2.0 * ds))
            w[1] -= 0.25 * s0 * s0 / ds
        return w

    @cached_property
    def areas(self) -> FloatArray:
        return np.broadcast_to(self.radial_weights[:, None] * self.dtheta, self.shape).copy()

    def contains(self, x, y) -> NDArray[np.bool_]:
        rr = np.hypot(x, y)
        return (rr >= self.r_inner) & (rr <= self.r_outer)

    def nearest_node(self, x: float, y: float) -> tuple[int, int]:
        rr, th = float(np.hypot(x, y)), float(np.arctan2(y, x)) % (2 * np.pi)
        i = int(np.clip(np.argmin(np.abs(self.r - rr)), 0, self.n_r - 1))
        j = int(round(th / self.dtheta)) % self.n_theta
        return i, j

    def same_as(self, other: Grid) -> bool:
        return self == other


def _as_values(grid: Grid, values: object, name: str = "values") -> FloatArray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(grid.shape, float(arr))
    if arr.shape != grid.shape:
        raise GridError(f"{name} has shape {arr.shape}, grid expects {grid.shape}")
    if not np.isfinite(arr).all():
        raise GridError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_values(self.grid, self.values))

    @classmethod
    def from_function(cls, grid: Grid, fn, coords: str = "polar") -> ScalarField:
        """Sample ``fn(r, theta)`` (or ``fn(x, y)`` with ``coords='cartesian'``)."""
        if coords == "polar":
            return cls(grid, np.broadcast_to(fn(grid.R, grid.TH), grid.shape))
        return cls(grid, np.broadcast_to(fn(grid.X, grid.Y), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> ScalarField:
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)

    def _other(self, other) -> FloatArray | float:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other) -> ScalarField:
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> ScalarField:
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other) -> ScalarField:
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other) -> ScalarField:
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self) -> ScalarField:
        return self.with_values(-self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def theta_variation(self) -> float:
        """Largest spread along any grid circle; zero for radial fields."""
        return float(np.max(self.values.max(axis=1) - self.values.min(axis=1)))

    def at(self, x, y, method: str = "cubic") -> FloatArray:
        """Interpolate at Cartesian points."""
        return interpolate(self.grid, self.values, x, y, method=method)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Polar components ``(v_r, v_theta)`` sampled on the grid."""

    grid: Grid
    v_r: FloatArray
    v_theta: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "v_r", _as_values(self.grid, self.v_r, "v_r"))
        object.__setattr__(self, "v_theta", _as_values(self.grid, self.v_theta, "v_theta"))

    @classmethod
    def from_cartesian(cls, grid: Grid, vx, vy) -> VectorField:
        c, s = np.cos(grid.TH), np.sin(grid.TH)
        vx = np.broadcast_to(vx, grid.shape)
        vy = np.broadcast_to(vy, grid.shape)
        return cls(grid, c * vx + s * vy, -s * vx + c * vy)

    def cartesian(self) -> tuple[FloatArray, FloatArray]:
        c, s = np.cos(self.grid.TH), np.sin(self.grid.TH)
        return c * self.v_r - s * self.v_theta, s * self.v_r + c * self.v_theta

    def magnitude(self) -> FloatArray:
        return np.hypot(self.v_r, self.v_theta)

    def max_abs(self) -> float:
        return float(np.max(self.magnitude()))

    def at(self, x, y, method: str = "cubic") -> tuple[FloatArray, FloatArray]:
        """Cartesian velocity at Cartesian points."""
        vx, vy = self.cartesian()
        return (interpolate(self.grid, vx, x, y, method=method),
                interpolate(self.grid, vy, x, y, method=method))


# ---- finite-difference building blocks ----------------------------------

def _pole_ghost(values: FloatArray, parity: float) -> FloatArray:
    """Row at r = -r_0 on a disk: the antipodal sample, times the parity."""
    half = values.shape[1] // 2
    return parity * np.roll(values[0], -half)


def d_r(grid: Grid, values: FloatArray, parity: float = 1.0) -> FloatArray:
    """Second-order radial derivative; one-sided rows at Dirichlet boundaries."""
    f = np.asarray(values, dtype=float)
    h = grid.dr
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    if grid.is_disk:
        out[0] = (f[1] - _pole_ghost(f, parity)) / (2 * h)
    else:
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    return out


def d_theta(grid: Grid, values: FloatArray) -> FloatArray:
    f = np.asarray(values, dtype=float)
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2 * grid.dtheta)


def d_theta2(grid: Grid, values: FloatArray) -> FloatArray:
    f = np.asarray(values, dtype=float)
    return (np.roll(f, -1, axis=1) - 2 * f + np.roll(f, 1, axis=1)) / grid.dtheta**2


def radial_stencil(grid: Grid) -> tuple[FloatArray, FloatArray]:
    """Lower/upper coefficients of the conservative ``r^-1 (r f_r)_r`` stencil per row."""
    r, h = grid.r, grid.dr
    lower = (r - 0.5 * h) / (r * h * h)
    upper = (r + 0.5 * h) / (r * h * h)
    return lower, upper


def theta_eigenvalues(grid: Grid) -> FloatArray:
    """Symbol ``m^2`` of ``-d^2/dtheta^2`` for the rfft modes.

    The angular part of the Laplacian is applied spectrally; a centred second
    difference divided by ``r^2 ~ dr^2`` is only first order next to a pole.
    """
    return np.arange(grid.n_theta // 2 + 1, dtype=float) ** 2


def pole_closure(grid: Grid) -> tuple[FloatArray, FloatArray]:
    """Per-mode coefficients ``(a_m, b_m)`` with ``L_m u(r_0) ~ a_m u_0 + b_m u_1``.

    Mode ``m`` of a smooth field behaves like ``r^m (c_0 + c_1 r^2 + ...)`` at
    the pole; the two-point rule is exact for ``r^m`` and ``r^(m+2)`` when
    ``r_1 = 3 r_0`` (angular term included).  For ``m = 0`` it coincides with
    the conservative stencil whose inner flux vanishes.
    """
    m = np.arange(grid.n_theta // 2 + 1, dtype=float)
    r0 = grid.r[0]
    a = -(m + 1.0) / (2.0 * r0 * r0)
    with np.errstate(over="ignore"):
        b = (m + 1.0) / (2.0 * r0 * r0) * np.power(3.0, -m)
    return a, b


# one-sided stencils (coefficients of f_0, f_1, ...) for Dirichlet rows
_D2_4TH = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0
_D1_4TH = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_D2_2ND = np.array([2.0, -5.0, 4.0, -1.0])
_D1_2ND = np.array([-3.0, 4.0, -1.0]) / 2.0


def _one_sided_row(rows, h: float, r: float, lam: FloatArray):
    """Laplacian at a boundary row from the rows stepping inward.

    ``h`` is negative when stepping inward means decreasing r.  Fourth-order
    stencils are used when six rows are available, second order otherwise.
    """
    d2, d1 = (_D2_4TH, _D1_4TH) if len(rows) >= 6 else (_D2_2ND, _D1_2ND)
    f2 = sum(c * rows[k] for k, c in enumerate(d2)) / h**2
    f1 = sum(c * rows[k] for k, c in enumerate(d1)) / h
    return f2 + f1 / r - lam * rows[0] / r**2


def laplacian_values(grid: Grid, values: FloatArray) -> FloatArray:
    f = np.asarray(values, dtype=float)
    h = grid.dr
    lower, upper = radial_stencil(grid)
    fh = np.fft.rfft(f, axis=1)
    lam = theta_eigenvalues(grid)
    out_h = np.empty_like(fh)
    out_h[1:-1] = (lower[1:-1, None] * (fh[:-2] - fh[1:-1])
                   + upper[1:-1, None] * (fh[2:] - fh[1:-1])
                   - lam[None, :] * fh[1:-1] / grid.r[1:-1, None] ** 2)
    if grid.is_disk:
        a, b = pole_closure(grid)
        out_h[0] = a * fh[0] + b * fh[1]
    else:
        out_h[0] = _one_sided_row(fh[:6], h, grid.r[0], lam)
    out_h[-1] = _one_sided_row(fh[::-1][:6], -h, grid.r[-1], lam)
    return np.fft.irfft(out_h, n=grid.n_theta, axis=1)


# ---- public operators ------------------------------------------------------

def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, d_r(g, f.values), d_theta(g, f.values) / g.R)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, laplacian_values(f.grid, f.values))


def velocity_from_stream(u: ScalarField) -> VectorField:
    g = u.grid
    return VectorField(g, -d_theta(g, u.values) / g.R, d_r(g, u.values))


def curl(v: VectorField) -> ScalarField:
    g = v.grid
    rv = g.R * v.v_theta
    return ScalarField(g, (d_r(g, rv) - d_theta(g, v.v_r)) / g.R)


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    return ScalarField(g, (d_r(g, g.R * v.v_r) + d_theta(g, v.v_theta)) / g.R)


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.values * f.grid.areas))


def kinetic_energy(u: ScalarField) -> float:
    """``E = 1/2 int |grad u|^2`` with the package gradient and quadrature."""
    g = gradient(u)
    return 0.5 * integrate(ScalarField(u.grid, g.v_r**2 + g.v_theta**2))


def cartesian_gradient(f: ScalarField) -> tuple[FloatArray, FloatArray]:
    g = f.grid
    fr = d_r(g, f.values)
    ft = d_theta(g, f.values) / g.R
    c, s = np.cos(g.TH), np.sin(g.TH)
    return c * fr - s * ft, s * fr + c * ft


# ---- interpolation -----------------------------------------------------------

def extended_samples(grid: Grid, values: FloatArray, parity: float = 1.0,
                     pad: int = _INTERP_PAD) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Pad ``values`` periodically in theta and, on disks, across the pole.

    Ghost rows at ``r = -r_k`` hold the antipodal samples times ``parity``
    (+1 for scalars and Cartesian components, -1 for polar components).
    """
    f = np.asarray(values, dtype=float)
    th = grid.theta
    t_ext = np.concatenate([th[-pad:] - 2 * np.pi, th, th[:pad] + 2 * np.pi])
    f = np.concatenate([f[:, -pad:], f, f[:, :pad]], axis=1)
    r_ext = grid.r
    if grid.is_disk:
        half = grid.n_theta // 2
        base = np.asarray(values, dtype=float)[:pad]
        ghost = parity * np.roll(base, -half, axis=1)
        ghost = np.concatenate([ghost[:, -pad:], ghost, ghost[:, :pad]], axis=1)
        r_ext = np.concatenate([-grid.r[:pad][::-1], grid.r])
        f = np.concatenate([ghost[::-1], f], axis=0)
    return r_ext, t_ext, f


class SplineSampler:
    """Tensor-product spline of grid samples in ``(r, theta)``, reusable across queries."""

    def __init__(self, grid: Grid, values: FloatArray, parity: float = 1.0,
                 method: str = "cubic") -> None:
        self.grid = grid
        r_ext, t_ext, f = extended_samples(grid, values, parity)
        k = 3 if method == "cubic" else 1
        self._spline = RectBivariateSpline(r_ext, t_ext, f, kx=k, ky=k, s=0)

    def polar(self, rr, th, dr: int = 0, dth: int = 0) -> FloatArray:
        rr = np.asarray(rr, dtype=float)
        th = np.mod(np.asarray(th, dtype=float), 2 * np.pi)
        out = self._spline.ev(rr.ravel(), th.ravel(), dx=dr, dy=dth)
        return out.reshape(rr.shape)

    def __call__(self, x, y) -> FloatArray:
        """Values at Cartesian points; NaN outside the annulus or disk."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rr = np.hypot(x, y)
        out = self.polar(rr, np.arctan2(y, x))
        g = self.grid
        inside = (rr >= g.r_inner - 1e-12) & (rr <= g.r_outer + 1e-12)
        return np.where(inside, out, np.nan)


def interpolate(grid: Grid, values: FloatArray, x, y, method: str = "cubic",
                parity: float = 1.0) -> FloatArray:
    """Interpolate grid samples at Cartesian points (NaN outside the domain)."""
    return SplineSampler(grid, values, parity, method)(x, y)


@dataclass
class BilinearSampler:
    """Fast bilinear lookup of several grid arrays at one polar point.

    Used by the streamline tracer, where spline construction per call would
    dominate the cost.
    """

    grid: Grid
    arrays: list[FloatArray]
    parities: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.parities:
            self.parities = [1.0] * len(self.arrays)
        packed = []
        for arr, par in zip(self.arrays, self.parities):
            r_ext, t_ext, f = extended_samples(self.grid, arr, par, pad=1)
            packed.append(f)
        self._r0 = r_ext[0]
        self._t0 = t_ext[0]
        self._stack = np.stack(packed)
        self._nr = len(r_ext)

    def __call__(self, r: float, th: float) -> FloatArray:
        g = self.grid
        fi = (r - self._r0) / g.dr
        i = int(min(max(np.floor(fi), 0), self._nr - 2))
        a = fi - i
        th = th % (2 * np.pi)
        fj = (th - self._t0) / g.dtheta
        j = int(np.floor(fj))
        b = fj - j
        s = self._stack
        return ((1 - a) * ((1 - b) * s[:, i, j] + b * s[:, i, j + 1])
                + a * ((1 - b) * s[:, i + 1, j] + b * s[:, i + 1, j + 1]))


# ---- text dump format ----------------------------------------------------------

def dumps_field(f: ScalarField) -> str:
    g = f.grid
    lines = [f"{g.n_r} {g.n_theta} {g.r_inner:.17g} {g.r_outer:.17g} {g.kind}"]
    for row in f.values:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def loads_field(text: str) -> ScalarField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GridError("empty field dump")
    head = lines[0].split()
    if len(head) != 5:
        raise GridError("field dump header must be 'n_r n_theta r_inner r_outer kind'")
    n_r, n_theta = int(head[0]), int(head[1])
    grid = Grid(head[4], float(head[2]), float(head[3]), n_r, n_theta)  # type: ignore[arg-type]
    rows = [np.array(ln.split(), dtype=float) for ln in lines[1:]]
    if len(rows) != n_r or any(len(row) != n_theta for row in rows):
        raise GridError("field dump body does not match its header")
    return ScalarField(grid, np.vstack(rows))


def save_field(f: ScalarField, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_field(f))


def load_field(path) -> ScalarField:
    with open(path, encoding="ascii") as fh:
        return loads_field(fh.read())
