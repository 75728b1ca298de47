"""Rearrangements, monotone transplants and energy minimisation over a rearrangement class."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .elliptic import BoundaryData, solve_poisson
from .errors import NotMonotoneCoupling, TooLarge
from .fields import FloatArray, Grid, ScalarField, gradient, kinetic_energy
from .monotone import DistributionFunction, MonotoneProfile, distribution_function

__all__ = [
    "DistributionFunction", "distribution_function", "Partition", "monotone_transplant",
    "recover_profile", "is_rearrangement", "minimize_energy", "brute_force_min_energy",
    "MinimizeResult",
]

EQUAL_AREA_RTOL = 1e-12
TIE_RTOL = 1e-12


# ---- partitions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Grid nodes grouped into blocks carrying piecewise-constant vorticity."""

    grid: Grid
    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=int)
        if lab.shape != self.grid.shape or lab.min() < 0:
            raise ValueError("labels must cover the grid with non-negative block ids")
        if set(np.unique(lab)) != set(range(lab.max() + 1)):
            raise ValueError("block ids must be consecutive from 0")
        object.__setattr__(self, "labels", lab)

    @classmethod
    def nodes(cls, grid: Grid) -> Partition:
        return cls(grid, np.arange(grid.n_r * grid.n_theta).reshape(grid.shape))

    @classmethod
    def sectors(cls, grid: Grid, k: int) -> Partition:
        """``k`` angular sectors of whole radial columns; all blocks have the same area."""
        if k < 1 or grid.n_theta % k:
            raise ValueError("n_theta must be a multiple of the sector count")
        lab = np.broadcast_to(np.arange(grid.n_theta) // (grid.n_theta // k), grid.shape)
        return cls(grid, lab.copy())

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def areas(self) -> FloatArray:
        return np.bincount(self.labels.ravel(), weights=self.grid.areas.ravel(),
                           minlength=self.n_blocks)

    @property
    def equal_area(self) -> bool:
        a = self.areas
        return bool(np.ptp(a) <= EQUAL_AREA_RTOL * a.max())

    def integrals(self, field: ScalarField | FloatArray) -> FloatArray:
        vals = field.values if isinstance(field, ScalarField) else np.asarray(field)
        return np.bincount(self.labels.ravel(), weights=(vals * self.grid.areas).ravel(),
                           minlength=self.n_blocks)

    def means(self, field: ScalarField | FloatArray) -> FloatArray:
        return self.integrals(field) / self.areas

    def expand(self, block_values) -> ScalarField:
        return ScalarField(self.grid, np.asarray(block_values, dtype=float)[self.labels])


# ---- transplant ---------------------------------------------------------------------

def _tie_groups(sorted_keys: FloatArray, rtol: float) -> FloatArray:
    """Group ids along an ascending key sequence; keys within ``rtol * scale`` tie."""
    scale = max(float(np.max(np.abs(sorted_keys))), 1e-300)
    brk = np.diff(sorted_keys) > rtol * scale
    return np.concatenate([[0], np.cumsum(brk)])


def _step_quantile_means(values: FloatArray, areas: FloatArray, bounds: FloatArray) -> FloatArray:
    """Mean of the step quantile function of ``(values, areas)`` over each interval of ``bounds``."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.concatenate([[0.0], np.cumsum(areas[order])])
    cum[-1] = bounds[-1]
    # integral of the quantile function from 0 to s, evaluated at the bounds
    def primitive(s):
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
        base = np.concatenate([[0.0], np.cumsum(v * np.diff(cum))])
        return base[k] + v[k] * (s - cum[k])
    P = primitive(bounds)
    widths = np.diff(bounds)
    out = np.diff(P) / widths
    # intervals inside a single step (up to summation roundoff) take its value exactly
    eps = TIE_RTOL * bounds[-1]
    lo = np.clip(np.searchsorted(cum, bounds[:-1] + eps, side="right") - 1, 0, len(v) - 1)
    hi = np.clip(np.searchsorted(cum, bounds[1:] - eps, side="left") - 1, 0, len(v) - 1)
    inside = v[lo] == v[hi]
    out[inside] = v[lo][inside]
    return out


def transplant_values(h: FloatArray, key: FloatArray, areas: FloatArray,
                      direction: str = "min") -> FloatArray:
    """Rearrange ``h`` into a monotone function of ``key``.

    Equal areas: an exact permutation, smallest ``h`` to smallest ``key``
    (reversed for ``direction='max'``), ties in ``key`` broken by index.
    Unequal areas: each cell receives the mean of the quantile function of
    ``h`` over the measure interval it occupies in ``key`` order; cells whose
    keys tie share the interval of their group.
    """
    h = np.asarray(h, dtype=float).ravel()
    key = np.asarray(key, dtype=float).ravel()
    areas = np.asarray(areas, dtype=float).ravel()
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    k = key if direction == "min" else -key
    order = np.argsort(k, kind="stable")
    out = np.empty_like(h)
    if np.ptp(areas) <= EQUAL_AREA_RTOL * areas.max():
        out[order] = np.sort(h, kind="stable")
        return out
    groups = _tie_groups(k[order], TIE_RTOL)
    g_area = np.bincount(groups, weights=areas[order])
    bounds = np.concatenate([[0.0], np.cumsum(g_area)])
    bounds[-1] = float(np.sum(areas))
    means = _step_quantile_means(h, areas, bounds)
    out[order] = means[groups]
    return out


def monotone_transplant(h: ScalarField, u: ScalarField, direction: str = "min",
                        partition: Partition | None = None) -> ScalarField:
    """Rearrangement of ``h`` that is a non-decreasing function of ``u``.

    With a ``partition`` the blocks are ordered by their integral of ``u`` and
    receive the sorted block values of ``h``.
    """
    if h.grid != u.grid:
        raise ValueError("fields live on different grids")
    if partition is None:
        vals = transplant_values(h.values, u.values, h.grid.areas, direction)
        return h.with_values(vals.reshape(h.grid.shape))
    c = partition.means(h)
    key = partition.means(u)
    return partition.expand(transplant_values(c, key, partition.areas, direction))


# ---- profile recovery ------------------------------------------------------------------

def _count_inversions(seq: FloatArray, tol: float = 0.0) -> int:
    """Pairs ``i < j`` with ``seq[i] > seq[j] + tol`` by merge sort."""
    a = list(seq)

    def sort(lo, hi):
        if hi - lo <= 1:
            return 0
        mid = (lo + hi) // 2
        n = sort(lo, mid) + sort(mid, hi)
        left, right = a[lo:mid], a[mid:hi]
        i = j = 0
        k = lo
        while i < len(left) and j < len(right):
            if right[j] < left[i] - tol:
                a[k] = right[j]
                j += 1
                n += len(left) - i
            else:
                a[k] = left[i]
                i += 1
            k += 1
        a[k:hi] = left[i:] + right[j:]
        return n

    return sort(0, len(a))


def recover_profile(omega: ScalarField, u: ScalarField, max_inversions: float = 0.01) -> MonotoneProfile:
    """Monotone ``f`` with ``omega ~ f(u)`` from the two distribution functions.

    With ``y`` and ``z`` the quantile functions of ``u`` and ``omega``, every
    group of tied ``u`` values occupies a measure interval ``I``; the profile
    maps the group's ``u`` to the mean of ``z`` over ``I``.  For a transplant
    fixed point this reproduces ``omega`` exactly at the nodes.
    """
    g = u.grid
    uv, wv, av = u.values.ravel(), omega.values.ravel(), g.areas.ravel()
    order = np.argsort(uv, kind="stable")
    groups = _tie_groups(uv[order], TIE_RTOL)
    # inversions are counted between distinct u groups only
    w_sorted = wv[order]
    ng = int(groups[-1]) + 1
    g_area = np.bincount(groups, weights=av[order], minlength=ng)
    g_u = np.bincount(groups, weights=(uv * av)[order], minlength=ng) / g_area
    g_w_mean = np.bincount(groups, weights=(wv * av)[order], minlength=ng) / g_area
    n = len(w_sorted)
    if n > 1:
        key = w_sorted if ng == n else g_w_mean[groups]
        # decreases at roundoff level (group means of equal values) are not inversions
        inv = _count_inversions(key, TIE_RTOL * max(float(np.abs(key).max()), 1e-300))
        if inv > max_inversions * n * (n - 1) / 2:
            raise NotMonotoneCoupling(f"{inv} inverted pairs out of {n * (n - 1) // 2}")
    bounds = np.concatenate([[0.0], np.cumsum(g_area)])
    bounds[-1] = float(np.sum(av))
    z = np.maximum.accumulate(_step_quantile_means(wv, av, bounds))
    return MonotoneProfile(g_u, z)


# ---- rearrangement test ------------------------------------------------------------------

def is_rearrangement(a: ScalarField, b: ScalarField, tol: float = 1e-8) -> bool:
    """Equimeasurability of two fields on the same grid."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    areas = a.grid.areas
    if np.ptp(areas) <= EQUAL_AREA_RTOL * areas.max():
        return bool(np.array_equal(np.sort(a.values, axis=None), np.sort(b.values, axis=None)))
    return distribution_function(a).l1_distance(distribution_function(b)) < tol


# ---- minimisation -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MinimizeResult:
    omega: ScalarField
    u: ScalarField
    f: MonotoneProfile | None
    energies: FloatArray
    iterations: int
    converged: bool
    status: str            # fixed_point | energy_tol | swap_local_min | no_descent | max_iters

    def log_csv(self) -> str:
        rows = ["k,energy"] + [f"{k},{e:.17g}" for k, e in enumerate(self.energies)]
        return "\n".join(rows) + "\n"


def _swap_descent(c: FloatArray, form, sign: float, max_moves: int) -> tuple[FloatArray, list[float]]:
    """Local search over block values: best pairwise swap, else first improving 3-cycle."""
    e0, b, G = form
    c = c.copy()
    energy = lambda x: float(e0 + 2 * b @ x + x @ G @ x)
    energies = []
    e = energy(c)
    dG = np.diag(G)
    n = len(c)
    cycles = [p for p in itertools.permutations(range(n), 3) if p[0] == min(p)]
    for _ in range(max_moves):
        gate = -1e-13 * max(abs(e), 1e-300)
        d = c[None, :] - c[:, None]                     # d[i, j] = c_j - c_i
        q = b + G @ c
        delta = sign * (2 * d * (q[:, None] - q[None, :])
                        + d**2 * (dG[:, None] + dG[None, :] - 2 * G))
        i, j = np.unravel_index(int(np.argmin(delta)), delta.shape)
        if delta[i, j] < gate:
            c[i], c[j] = c[j], c[i]
        else:
            for i, j, k in cycles:
                trial = c.copy()
                trial[[i, j, k]] = c[[j, k, i]]
                if sign * (energy(trial) - e) < gate:
                    c = trial
                    break
            else:
                break
        e = energy(c)
        energies.append(e)
    return c, energies


def minimize_energy(h: ScalarField, bc: BoundaryData, max_iters: int = 100, tol: float = 1e-12,
                    partition: Partition | None = None, direction: str = "min",
                    profile: bool = True, polish: bool = True) -> MinimizeResult:
    """Transplant iteration for the extremal energy over rearrangements of ``h``.

    ``omega_{k+1} = transplant(h, u_k)``, ``u_{k+1} = solve_poisson(omega_{k+1})``.
    A step that would raise the energy (lower it, for ``direction='max'``) is
    rejected and the transplant phase stops with the previous iterate.  With a
    ``partition`` and ``polish`` the result is then improved by pairwise swaps
    and 3-cycles of block values until no such move lowers the energy.
    """
    g = h.grid
    sign = 1.0 if direction == "min" else -1.0
    if partition is not None:
        h = partition.expand(partition.means(h))
    omega = h
    u = solve_poisson(g, omega, bc)
    energies = [kinetic_energy(u)]
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        new = monotone_transplant(h, u, direction, partition)
        if np.array_equal(new.values, omega.values):
            status = "fixed_point"
            it -= 1
            break
        u_new = solve_poisson(g, new, bc)
        e_new = kinetic_energy(u_new)
        if sign * (e_new - energies[-1]) > 1e-12 * max(abs(energies[-1]), 1e-300):
            status = "no_descent"
            it -= 1
            break
        omega, u = new, u_new
        energies.append(e_new)
        if abs(energies[-1] - energies[-2]) < tol * abs(energies[-1]):
            status = "energy_tol"
            break
    if partition is not None and polish and partition.n_blocks > 1:
        c, swaps = _swap_descent(partition.means(omega), energy_form(partition, bc), sign,
                                 max_moves=10 * partition.n_blocks**2)
        if swaps:
            omega = partition.expand(c)
            u = solve_poisson(g, omega, bc)
            energies.extend(swaps[:-1] + [kinetic_energy(u)])
            it += len(swaps)
        if status in ("no_descent", "energy_tol", "fixed_point") or swaps:
            status = "swap_local_min"
    f = None
    if profile:
        try:
            f = recover_profile(omega, u)
        except NotMonotoneCoupling:
            f = None
    converged = status in ("fixed_point", "energy_tol", "swap_local_min")
    return MinimizeResult(omega, u, f, np.asarray(energies), it, converged, status)


def energy_form(partition: Partition, bc: BoundaryData) -> tuple[float, FloatArray, FloatArray]:
    """``(e0, b, G)`` with ``E(c) = e0 + 2 b.c + c^T G c`` for block vorticity ``c``."""
    g = partition.grid
    base = solve_poisson(g, ScalarField.zeros(g), bc)
    phis = []
    for k in range(partition.n_blocks):
        ind = ScalarField(g, (partition.labels == k).astype(float))
        phis.append(solve_poisson(g, ind, BoundaryData(0.0) if g.is_disk else BoundaryData(0.0, 0.0)))

    def grads(f):
        v = gradient(f)
        return np.stack([v.v_r.ravel(), v.v_theta.ravel()])

    w = g.areas.ravel()
    gb = grads(base)
    G_list = [grads(p) for p in phis]
    e0 = 0.5 * float(np.sum(w * np.sum(gb * gb, axis=0)))
    b = np.array([0.5 * float(np.sum(w * np.sum(gb * gp, axis=0))) for gp in G_list])
    K = len(G_list)
    G = np.empty((K, K))
    for i in range(K):
        for j in range(i, K):
            G[i, j] = G[j, i] = 0.5 * float(np.sum(w * np.sum(G_list[i] * G_list[j], axis=0)))
    return e0, b, G


def brute_force_min_energy(values, partition: Partition, bc: BoundaryData,
                           direction: str = "min", max_cells: int = 10) -> tuple[float, FloatArray]:
    """Exact extremal energy over all distinct assignments of ``values`` to the blocks."""
    c = np.asarray(values, dtype=float).ravel()
    if c.size != partition.n_blocks:
        raise ValueError("one value per block is required")
    if c.size > max_cells:
        raise TooLarge(f"{c.size} cells exceed the enumeration limit of {max_cells}")
    e0, b, G = energy_form(partition, bc)
    perms = np.array(sorted(set(itertools.permutations(c.tolist()))))
    best_e, best = None, None
    for chunk in np.array_split(perms, max(1, len(perms) // 50000)):
        E = e0 + 2 * chunk @ b + np.einsum("pi,ij,pj->p", chunk, G, chunk)
        k = int(np.argmin(E) if direction == "min" else np.argmax(E))
        if best_e is None or (E[k] < best_e if direction == "min" else E[k] > best_e):
            best_e, best = float(E[k]), chunk[k].copy()
    return best_e, best
