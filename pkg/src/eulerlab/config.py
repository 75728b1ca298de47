"""Line-oriented ``key = value`` run configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigTypeError, RangeError, UnknownKey

COMMANDS = ("steady", "evolve", "streamline", "classify", "stability", "minimize",
            "coarea-check", "poisson")
OUTPUT_ENV = "EULERLAB_OUTPUT"


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(text)


def _choice(*options):
    def check(v):
        return v in options
    check.doc = "one of " + ", ".join(options)
    return check


def _at_least(lo):
    def check(v):
        return v >= lo
    check.doc = f">= {lo}"
    return check


def _positive(v):
    return v > 0


_positive.doc = "> 0"


def _non_negative(v):
    return v >= 0


_non_negative.doc = ">= 0"


def _even_at_least_8(v):
    return v >= 8 and v % 2 == 0


_even_at_least_8.doc = "even and >= 8"


def _open_unit(v):
    return 0 < v < 1


_open_unit.doc = "in (0, 1)"

# key: (parser, default, range check or None)
SCHEMA: dict[str, tuple] = {
    "command": (str, "", _choice("", *COMMANDS)),
    "output": (str, "", None),
    "seed": (int, 0, _non_negative),
    # grid
    "domain": (str, "annulus", _choice("annulus", "disk")),
    "r_inner": (float, 1.0, _non_negative),
    "r_outer": (float, 2.0, _positive),
    "n_r": (int, 64, _at_least(4)),
    "n_theta": (int, 128, _even_at_least_8),
    # radial stream function u = u_scale r^u_power + u_shift
    "u_power": (float, 4.0, None),
    "u_scale": (float, 1.0, None),
    "u_shift": (float, 0.0, None),
    # evolution and perturbation
    "epsilon": (float, 1e-3, _non_negative),
    "m": (int, 1, _at_least(1)),
    "t_end": (float, 0.5, _positive),
    "cfl": (float, 0.4, _open_unit),
    "dt": (float, 0.0, _non_negative),
    "stride": (int, 10, _at_least(1)),
    "filter": (_bool, True, None),
    "dump_stride": (int, 10, _non_negative),
    "delta": (float, 0.0, _non_negative),
    "t_max": (float, 20.0, _positive),
    # coarea identity
    "levels": (int, 200, _at_least(2)),
    "samples": (int, 10, _at_least(1)),
    "f_const": (float, 4.0, None),
    # poisson convergence study
    "refinements": (int, 3, _at_least(1)),
    # streamlines and stagnation points
    "x0": (float, 1.5, None),
    "y0": (float, 0.0, None),
    "step": (float, 0.0, _non_negative),
    "max_steps": (int, 20000, _at_least(10)),
    "field": (str, "all", _choice("saddle", "monkey", "z4", "cusp", "all")),
    "rotation": (float, 0.0, None),
    "degree": (int, 5, _at_least(2)),
    # rearrangement minimisation, h = h_scale r^h_power + h_shift unless h_input is given
    "h_input": (str, "", None),
    "h_scale": (float, 1.0, None),
    "h_power": (float, 2.0, None),
    "h_shift": (float, -2.0, None),
    "bc_outer": (float, 0.0, None),
    "bc_inner": (float, 0.0, None),
    "max_iters": (int, 100, _at_least(1)),
    "tol": (float, 1e-12, _positive),
    "direction": (str, "min", _choice("min", "max")),
    "sectors": (int, 0, _non_negative),
    "instances": (int, 0, _non_negative),
    "streamlines": (int, 5, _non_negative),
    "refine_levels": (int, 1, _at_least(1)),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: spec[1] for k, spec in SCHEMA.items()})

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def output_dir(self, command: str) -> Path:
        if self.values["output"]:
            return Path(self.values["output"])
        return Path(os.environ.get(OUTPUT_ENV, "runs")) / command

    def echo(self) -> str:
        lines = []
        for k in SCHEMA:
            v = self.values[k]
            if isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, float):
                text = f"{v:.17g}"
            else:
                text = str(v)
            lines.append(f"{k} = {text}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, text: str, line: int):
    parser, default, check = SCHEMA[key]
    try:
        value = parser(text)
    except ValueError:
        raise ConfigTypeError(f"{key}: cannot read {text!r} as {parser.__name__.lstrip('_')}",
                              line) from None
    if check is not None and not check(value):
        raise RangeError(f"{key} = {text} is out of range ({check.doc})", line)
    return value


def parse_config(text: str, overrides: list[str] = ()) -> RunConfig:
    """Typed configuration from ``key = value`` lines; ``#`` starts a comment.

    ``overrides`` are further ``key=value`` items applied after the text and
    reported with line 0.
    """
    cfg = RunConfig()
    where: dict[str, int] = {}
    items = [(i, raw) for i, raw in enumerate(text.splitlines(), start=1)]
    items += [(0, o) for o in overrides]
    for lineno, raw in items:
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigTypeError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        cfg.values[key] = _parse_value(key, value, lineno)
        where[key] = lineno
    v = cfg.values
    if v["domain"] == "annulus":
        if v["r_inner"] <= 0:
            raise RangeError("annulus needs r_inner > 0", where.get("r_inner", 0))
        if v["r_inner"] >= v["r_outer"]:
            raise RangeError("need r_inner < r_outer", where.get("r_outer", where.get("r_inner", 0)))
    return cfg
