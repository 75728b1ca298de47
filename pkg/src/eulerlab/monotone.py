"""Monotone profiles and distribution functions of grid fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EulerLabError
from .fields import FloatArray, ScalarField


@dataclass(frozen=True, eq=False)
class MonotoneProfile:
    """Piecewise-linear non-decreasing map, constant outside its breakpoints."""

    breakpoints: FloatArray
    values: FloatArray

    def __post_init__(self) -> None:
        s = np.atleast_1d(np.asarray(self.breakpoints, dtype=float)).copy()
        f = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if s.shape != f.shape or s.ndim != 1 or s.size == 0:
            raise EulerLabError("profile needs matching 1-d breakpoints and values")
        if not (np.isfinite(s).all() and np.isfinite(f).all()):
            raise EulerLabError("profile must be finite")
        if np.any(np.diff(s) <= 0):
            raise EulerLabError("profile breakpoints must be strictly increasing")
        if np.any(np.diff(f) < 0):
            raise EulerLabError("profile values must be non-decreasing")
        s.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "breakpoints", s)
        object.__setattr__(self, "values", f)

    @classmethod
    def constant(cls, c: float) -> MonotoneProfile:
        return cls(np.array([0.0]), np.array([float(c)]))

    @classmethod
    def linear(cls, slope: float, intercept: float, lo: float, hi: float) -> MonotoneProfile:
        """``slope * t + intercept`` on ``[lo, hi]``, clamped outside."""
        if slope < 0:
            raise EulerLabError("slope must be non-negative")
        return cls(np.array([lo, hi]), np.array([slope * lo + intercept, slope * hi + intercept]))

    @classmethod
    def clamp(cls, lo: float, hi: float) -> MonotoneProfile:
        return cls(np.array([lo, hi]), np.array([lo, hi]))

    def __call__(self, t):
        out = np.interp(t, self.breakpoints, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def apply(self, u: ScalarField) -> ScalarField:
        return u.with_values(self(u.values))

    def slope_bound(self) -> float:
        if self.breakpoints.size < 2:
            return 0.0
        return float(np.max(np.diff(self.values) / np.diff(self.breakpoints)))

    def to_text(self) -> str:
        rows = ["u,f"] + [f"{s:.17g},{v:.17g}" for s, v in zip(self.breakpoints, self.values)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    """Sublevel measure ``m(t) = |{field < t}|`` of a weighted sample.

    Stored as the sorted unique values ``t_k`` together with
    ``m(t_k)``; ``m`` is a left-continuous step function that jumps by the
    area carried by each value.
    """

    levels: FloatArray
    measures: FloatArray
    total: float

    @classmethod
    def of(cls, values, areas) -> DistributionFunction:
        v = np.asarray(values, dtype=float).ravel()
        a = np.broadcast_to(np.asarray(areas, dtype=float), np.shape(values)).ravel()
        order = np.argsort(v, kind="stable")
        v, a = v[order], a[order]
        levels, start = np.unique(v, return_index=True)
        cum = np.concatenate([[0.0], np.cumsum(a)])
        return cls(levels, cum[start], float(cum[-1]))

    @property
    def jumps(self) -> FloatArray:
        return np.diff(np.append(self.measures, self.total))

    def __call__(self, t):
        idx = np.searchsorted(self.levels, t, side="left")
        cum = np.append(self.measures, self.total)
        out = cum[idx]
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, s):
        """Step quantile ``z(s) = inf{t : |{field <= t}| >= s}`` for ``0 < s <= total``."""
        upper = np.append(self.measures[1:], self.total)
        idx = np.searchsorted(upper, s, side="left")
        idx = np.clip(idx, 0, self.levels.size - 1)
        out = self.levels[idx]
        return float(out) if np.ndim(out) == 0 else out

    def l1_distance(self, other: DistributionFunction) -> float:
        """``int |m_self(t) - m_other(t)| dt`` computed exactly for the step functions."""
        t = np.union1d(self.levels, other.levels)
        if t.size < 2:
            return 0.0
        # on (t_k, t_{k+1}] both functions are constant and equal to m(t_{k+1})
        diff = np.abs(self(t[1:]) - other(t[1:]))
        return float(np.sum(diff * np.diff(t)))


def distribution_function(field: ScalarField) -> DistributionFunction:
    return DistributionFunction.of(field.values, field.grid.areas)
