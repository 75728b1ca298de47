"""Command-line harness: one experiment per run, plain-text outputs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, RunConfig, parse_config
from .elliptic import (BoundaryData, coarea_identity_check, default_sample_points, solve_poisson)
from .errors import ConfigError, EulerLabError
from .evolve import EvolutionConfig, evolve, perturb
from .fields import (Grid, ScalarField, dumps_field, laplacian_values, load_field,
                     velocity_from_stream)
from .monotone import MonotoneProfile, distribution_function
from .rearrange import (Partition, brute_force_min_energy, is_rearrangement, minimize_energy)
from .stability import angle_observer, escape_experiment, growth_experiment
from .steady import arnold_ratio, radial_steady
from .streamlines import (classify_critical_point, curvature_stats, encircles, find_critical_points,
                          trace)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def _record(items: dict) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in items.items())


class Run:
    """Output directory bookkeeping for one subcommand."""

    def __init__(self, command: str, cfg: RunConfig) -> None:
        self.command = command
        self.cfg = cfg
        self.out = cfg.output_dir(command)
        self.out.mkdir(parents=True, exist_ok=True)
        self.write("config.txt", cfg.echo())
        self.lines: list[str] = []

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)

    def summary(self, items: dict, prefix: str = "") -> None:
        self.lines.append((prefix + " " if prefix else "") + _record(items))

    def finish(self) -> None:
        text = "\n".join(self.lines) + "\n"
        self.write("summary.txt", text)
        sys.stdout.write(text)


# ---- shared builders ---------------------------------------------------------------

def build_grid(cfg: RunConfig, n_r: int | None = None, n_theta: int | None = None) -> Grid:
    n_r = n_r or cfg.n_r
    n_theta = n_theta or cfg.n_theta
    if cfg.domain == "disk":
        return Grid.disk(cfg.r_outer, n_r, n_theta)
    return Grid.annulus(cfg.r_inner, cfg.r_outer, n_r, n_theta)


def bc_for(cfg: RunConfig, grid: Grid) -> BoundaryData:
    return BoundaryData(cfg.bc_outer) if grid.is_disk else BoundaryData(cfg.bc_outer, cfg.bc_inner)


def u_profile(cfg: RunConfig):
    return lambda r: cfg.u_scale * r**cfg.u_power + cfg.u_shift


def bump(cfg: RunConfig, grid: Grid):
    a, b = grid.r_inner, grid.r_outer
    return lambda r: (r - a) * (b - r)


def radial_bc(grid: Grid, profile) -> BoundaryData:
    if grid.is_disk:
        return BoundaryData(float(profile(grid.r_outer)))
    return BoundaryData(float(profile(grid.r_outer)), float(profile(grid.r_inner)))


def synthetic_field(name: str, grid: Grid, rotation: float) -> ScalarField:
    """Stream functions with a stagnation point of each type at the origin, rotated by ``rotation``."""
    X = grid.R * np.cos(grid.TH)
    Y = grid.R * np.sin(grid.TH)
    c, s = np.cos(rotation), np.sin(rotation)
    x, y = c * X + s * Y, -s * X + c * Y
    z = x + 1j * y
    values = {
        "saddle": x * y,
        "monkey": (z**3).real / 3,
        "z4": (z**4).real / 4,
        "cusp": y**2 + x**3,
    }[name]
    return ScalarField(grid, values)


def _h_field(cfg: RunConfig, grid: Grid) -> ScalarField:
    if cfg.h_input:
        h = load_field(cfg.h_input)
        if h.grid != grid:
            raise EulerLabError("h_input grid differs from the configured grid")
        return h
    return ScalarField(grid, cfg.h_scale * grid.R**cfg.h_power + cfg.h_shift)


def _start_radii(grid: Grid, count: int) -> np.ndarray:
    frac = 0.2 + 0.6 * (np.arange(count) + 0.5) / count
    return grid.r_inner + frac * (grid.r_outer - grid.r_inner)


# ---- subcommands -----------------------------------------------------------------------

def cmd_poisson(run: Run) -> None:
    cfg = run.cfg
    exact = lambda r: np.log(r / cfg.r_inner) / np.log(cfg.r_outer / cfg.r_inner)
    rows = ["n_r,n_theta,max_error"]
    errors = []
    for k in range(cfg.refinements):
        g = build_grid(cfg, cfg.n_r * 2**k, cfg.n_theta)
        if g.is_disk:
            raise EulerLabError("the harmonic convergence study needs an annulus")
        u = solve_poisson(g, ScalarField.zeros(g), BoundaryData(1.0, 0.0))
        err = float(np.max(np.abs(u.values - exact(g.R))))
        errors.append(err)
        rows.append(f"{g.n_r},{g.n_theta},{err:.17g}")
    run.write("convergence.csv", "\n".join(rows) + "\n")
    orders = [np.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    run.summary({"max_error_finest": errors[-1],
                 "min_order": min(orders) if orders else float("nan")})


def cmd_steady(run: Run) -> None:
    cfg = run.cfg
    g = build_grid(cfg)
    flow = radial_steady(g, u_profile(cfg))
    report = arnold_ratio(flow.u, flow.omega)
    run.write("u.dump", dumps_field(flow.u))
    run.write("omega.dump", dumps_field(flow.omega))
    run.lines.append(report.to_record(flow.residual))


def cmd_evolve(run: Run) -> None:
    cfg = run.cfg
    g = build_grid(cfg)
    prof = u_profile(cfg)
    flow = radial_steady(g, prof)
    w0 = perturb(flow.omega, cfg.epsilon, cfg.m, bump(cfg, g)) if cfg.epsilon > 0 else flow.omega
    ec = EvolutionConfig(cfg.t_end, cfg.dt, cfg.cfl, cfg.stride, cfg.filter)
    observers = [angle_observer()] if cfg.epsilon > 0 else []
    traj = evolve(w0, radial_bc(g, prof), ec, observers)
    run.write("series.csv", traj.to_csv())
    if cfg.dump_stride:
        for i in range(0, len(traj.snapshots), cfg.dump_stride):
            run.write(f"omega_{i:05d}.dump", dumps_field(traj.snapshots[i]))
    run.write("omega_final.dump", dumps_field(traj.final))
    e, z = traj.column("energy"), traj.column("enstrophy")
    d0, d1 = distribution_function(w0), distribution_function(traj.final)
    span = float(np.ptp(w0.values)) or 1.0
    run.summary({
        "t_end": traj.times[-1], "steps": traj.steps,
        "energy_drift": float(np.max(np.abs(e - e[0])) / abs(e[0])),
        "enstrophy_drift": float(np.max(np.abs(z - z[0])) / abs(z[0])),
        "distribution_l1": d0.l1_distance(d1) / (float(np.sum(g.areas)) * span),
        "max_deviation": max(float(np.max(np.abs(w.values - w0.values))) for w in traj.snapshots),
    })


def cmd_streamline(run: Run) -> None:
    cfg = run.cfg
    g = build_grid(cfg)
    flow = radial_steady(g, u_profile(cfg))
    s = trace(flow.v, (cfg.x0, cfg.y0), cfg.step or None, cfg.max_steps)
    run.write("streamline.csv", s.to_csv())
    items = {"status": s.status, "closed": s.closed, "closure_gap": s.closure_gap,
             "period": s.period, "length": float(s.arclength[-1])}
    if len(s.points) >= 10:
        st = curvature_stats(s)
        items.update(curvature_max=st.max, curvature_mean=st.mean, total_turn=st.total_turn)
    run.summary(items)


def cmd_classify(run: Run) -> None:
    cfg = run.cfg
    g = Grid.disk(cfg.r_outer, cfg.n_r, cfg.n_theta)
    names = ["saddle", "monkey", "z4", "cusp"] if cfg.field == "all" else [cfg.field]
    for name in names:
        rep = classify_critical_point(synthetic_field(name, g, cfg.rotation), (0.0, 0.0), cfg.degree)
        items = {"field": name, "kind": rep.kind}
        for k, v in rep.params.items():
            if isinstance(v, complex):
                items[f"{k}_abs"] = abs(v)
                items[f"{k}_arg"] = float(np.angle(v))
            else:
                items[k] = v
        items["fit_residual"] = rep.fit_residual
        run.summary(items)


def cmd_stability(run: Run) -> None:
    cfg = run.cfg
    g = build_grid(cfg)
    prof = u_profile(cfg)
    flow = radial_steady(g, prof)
    bc = radial_bc(g, prof)
    psi = bump(cfg, g)
    ec = EvolutionConfig(cfg.t_end, cfg.dt, cfg.cfl, cfg.stride, cfg.filter, keep_snapshots=False)
    rep = growth_experiment(flow.omega, cfg.epsilon, cfg.m, psi, bc, ec)
    run.write("growth.csv", rep.series_csv())
    delta = cfg.delta or 10 * cfg.epsilon * float(np.max(np.abs(psi(g.r))))
    esc = escape_experiment(flow.omega, cfg.epsilon, cfg.m, psi, bc, delta, cfg.t_max,
                            EvolutionConfig(cfg.t_max, cfg.dt, cfg.cfl, cfg.stride, cfg.filter))
    lines = ["t,gauge"] + [f"{t:.17g},{x:.17g}" for t, x in zip(esc.times, esc.gauge)]
    run.write("escape.csv", "\n".join(lines) + "\n")
    run.summary({"c0": rep.c0, "d_omega_plus_dt0": rep.d_omega_plus_dt0, "branch": rep.branch,
                 "monotone": rep.monotone_on_window, "escaped": esc.escaped,
                 "t_escape": esc.t_escape, "delta": delta})


def oracle_instances(cfg: RunConfig) -> list[dict]:
    """Seeded sector instances compared against exhaustive enumeration."""
    g = build_grid(cfg)
    bc = bc_for(cfg, g)
    rng = np.random.default_rng(cfg.seed)
    counts = [k for k in (2, 3, 4, 6, 8) if k <= max(cfg.sectors, 2) and g.n_theta % k == 0]
    out = []
    for i in range(cfg.instances):
        k = counts[i % len(counts)]
        P = Partition.sectors(g, k)
        c = rng.normal(size=k) if i % 2 == 0 else -rng.uniform(0.5, 3.0, size=k)
        h = P.expand(c)
        res = minimize_energy(h, bc, cfg.max_iters, cfg.tol, partition=P, direction=cfg.direction,
                              profile=False)
        e_best, _ = brute_force_min_energy(c, P, bc, cfg.direction)
        out.append({"instance": i, "cells": k, "energy": float(res.energies[-1]),
                    "oracle": e_best, "abs_diff": abs(float(res.energies[-1]) - e_best),
                    "monotone": bool(np.all(np.diff(res.energies) * (1 if cfg.direction == "min" else -1)
                                            <= 1e-12)),
                    "rearrangement": is_rearrangement(res.omega, h)})
    return out


def minimizer_geometry(cfg: RunConfig, grid: Grid, count: int) -> dict:
    """Minimise at the given grid and trace streamlines of the minimiser flow."""
    res = minimize_energy(_h_field(cfg, grid), bc_for(cfg, grid), cfg.max_iters, cfg.tol,
                          direction=cfg.direction)
    v = velocity_from_stream(res.u)
    crit = find_critical_points(v)
    lines = []
    for r0 in _start_radii(grid, count):
        lines.append(trace(v, (float(r0), 0.0), max_steps=cfg.max_steps))
    return {"result": res, "critical": crit, "streamlines": lines}


def cmd_minimize(run: Run) -> None:
    cfg = run.cfg
    if cfg.instances:
        rows = oracle_instances(cfg)
        keys = list(rows[0])
        text = [",".join(keys)] + [",".join(f"{r[k]:.17g}" if isinstance(r[k], float) else _fmt(r[k])
                                            for k in keys) for r in rows]
        run.write("oracle.csv", "\n".join(text) + "\n")
        run.summary({"instances": len(rows), "max_abs_diff": max(r["abs_diff"] for r in rows),
                     "failures": sum(r["abs_diff"] > 1e-10 for r in rows),
                     "all_monotone": all(r["monotone"] for r in rows),
                     "all_rearrangement": all(r["rearrangement"] for r in rows)}, "oracle")
        return
    g = build_grid(cfg)
    geo = minimizer_geometry(cfg, g, cfg.streamlines)
    res = geo["result"]
    run.write("omega.dump", dumps_field(res.omega))
    run.write("u.dump", dumps_field(res.u))
    run.write("energy.csv", res.log_csv())
    if res.f is not None:
        run.write("profile.csv", res.f.to_text())
    fu = res.f.apply(res.u).values if res.f is not None else np.full(g.shape, np.nan)
    steady_res = float(np.max(np.abs(laplacian_values(g, res.u.values) - fu)[g.interior]))
    crit = geo["critical"]
    closed = all(s.closed for s in geo["streamlines"])
    around = all(len(crit) == 1 and encircles(s, crit[0]) for s in geo["streamlines"])
    run.summary({"status": res.status, "iterations": res.iterations, "converged": res.converged,
                 "energy": float(res.energies[-1]), "omega_max": float(res.omega.values.max()),
                 "steady_residual": steady_res, "critical_points": len(crit),
                 "streamlines_closed": closed, "encircle": around,
                 "closure_gap_max": max(s.closure_gap for s in geo["streamlines"]),
                 "cell": max(g.dr, g.r_outer * g.dtheta)})
    if cfg.refine_levels > 1:
        for k in range(cfg.refine_levels):
            gk = build_grid(cfg, cfg.n_r * 2**k, cfg.n_theta * 2**k)
            lines = geo["streamlines"] if k == 0 else minimizer_geometry(cfg, gk, cfg.streamlines)["streamlines"]
            stats = [curvature_stats(s) for s in lines]
            run.summary({"n_r": gk.n_r, "curvature_max": max(s.max for s in stats),
                         "curvature_mean": float(np.mean([s.mean for s in stats]))}, "refine")


def cmd_coarea(run: Run) -> None:
    cfg = run.cfg
    g = build_grid(cfg)
    u = ScalarField(g, cfg.u_scale * g.R**cfg.u_power + cfg.u_shift)
    f = MonotoneProfile.constant(cfg.f_const)
    pts = default_sample_points(g, cfg.samples)
    a = coarea_identity_check(u, f, pts, cfg.levels)
    b = coarea_identity_check(u, f, pts, 2 * cfg.levels)
    rows = ["x,y,exact,reconstructed"] + [
        f"{x:.17g},{y:.17g},{e:.17g},{r:.17g}"
        for (x, y), e, r in zip(a.samples, a.exact, a.reconstructed)]
    run.write("samples.csv", "\n".join(rows) + "\n")
    run.summary({"levels": cfg.levels, "deviation": a.deviation,
                 "deviation_doubled": b.deviation, "decreases": b.deviation < a.deviation})


HANDLERS = {
    "steady": cmd_steady, "evolve": cmd_evolve, "streamline": cmd_streamline,
    "classify": cmd_classify, "stability": cmd_stability, "minimize": cmd_minimize,
    "coarea-check": cmd_coarea, "poisson": cmd_poisson,
}


def run(command: str, cfg: RunConfig) -> int:
    """Execute one subcommand; 0 on success, 1 on an experiment error."""
    try:
        r = Run(command, cfg)
        HANDLERS[command](r)
        r.finish()
    except EulerLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="eulerlab", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", nargs="?", help="key = value configuration file")
    parser.add_argument("-o", "--output", help="output directory")
    parser.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        overrides = list(args.set) + ([f"output={args.output}"] if args.output else [])
        cfg = parse_config(text, overrides)
        if cfg.command and cfg.command != args.command:
            raise ConfigError(f"config is for '{cfg.command}', not '{args.command}'")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
