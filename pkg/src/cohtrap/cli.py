"""Command-line front end: ``cohtrap <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_config, load_config_file
from .dynamics import BlochXY, Flavor, build_coefficient_table, classify_regime, evolve, residue_estimate
from .kernels import QuadratureError, decay_rate_infinity, lamb_shift_infinity
from .sweeps import (
    coefficient_series,
    converged_coherence,
    curve_series,
    default_t_end,
    env_workers,
    indexed_path,
    scan_initial_states,
    trajectory_series,
    write_results,
)
from .trapping import feasibility_boundary, lambda_curve, nonmonotonic_turning_point, solve_lambda

log = logging.getLogger("cohtrap")

# flag dest -> config key
OVERRIDES = {
    "gamma": "bath.gamma",
    "omega0": "bath.omega0",
    "temperature": "bath.temperature",
    "spectrum": "bath.kind",
    "lam": "model.lambda",
    "t_end": "run.t_end",
    "t0": "run.t0",
    "grid_n": "run.grid_n",
    "scan_mode": "run.scan_mode",
    "ode_tol": "run.ode_tol",
    "initials": "run.initials",
    "t_min": "curve.t_min",
    "t_max": "curve.t_max",
    "n_temps": "curve.n_points",
    "out": "output.path",
    "format": "output.format",
}


class CommandError(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (e.g. configs/fig1.conf)")
    p.add_argument("--out", help="output file (default: <command>.<format> in the working directory)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--workers", type=int, help="worker processes (env COHTRAP_WORKERS; default: CPU count)")
    p.add_argument("--strict", action="store_true", help="fail if any grid point fails")
    p.add_argument("--gamma", type=float, help="Lorentzian width, units of Omega")
    p.add_argument("--omega0", type=float, help="Lorentzian peak, units of Omega")
    p.add_argument("--temperature", type=float, help="bath temperature, units of Omega")
    p.add_argument("--spectrum", choices=["exact_coth", "high_temperature"])
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, help="coupling constant")
    lam.add_argument("--lambda-auto", action="store_true", help="solve the trapping condition for lambda")
    p.add_argument("--t-end", type=float, help="final time, units of 1/Omega")
    p.add_argument("--t0", type=float, help="start of the stationary stage (default 10/gamma)")
    p.add_argument("--grid-n", type=int, help="odd grid size per axis for scan-initial")
    p.add_argument(
        "--scan-mode",
        choices=["propagator", "direct"],
        help="scan-initial: superpose two basis runs (default) or integrate every point",
    )
    p.add_argument("--ode-tol", type=float)
    p.add_argument("--rwa", action="store_true", default=None, help="use the rotating-wave generator")
    p.add_argument(
        "--initial",
        action="append",
        metavar="X,Y",
        help="initial (x, y); repeatable (default: 0.8,0.4 0.6,0.4 0.8,0.2)",
    )
    p.add_argument("--t-min", type=float, help="lambda-curve lowest temperature")
    p.add_argument("--t-max", type=float, help="lambda-curve highest temperature")
    p.add_argument("--n-temps", type=int, help="lambda-curve number of log-spaced temperatures")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cohtrap",
        description="Coherence trapping of a two-level system in a thermal Ohmic-Lorentzian bath.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "coefficients": "tabulate Delta(t) and Gamma(t)",
        "evolve": "Bloch-vector trajectories for given initial states",
        "scan-initial": "residue coherence over a grid of initial states",
        "lambda-curve": "trapping coupling lambda*(T) over a temperature range",
        "solve": "solve the trapping condition for lambda",
    }
    for name, text in helps.items():
        _common(sub.add_parser(name, help=text, description=text))
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    over = {}
    for dest, key in OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is None:
            continue
        if dest == "initials":
            continue
        over[key] = v
    if args.initial:
        over["run.initials"] = "; ".join(args.initial)
    if args.lambda_auto:
        over["model.lambda"] = "auto"
    if args.rwa:
        over["run.rwa"] = True
    return build_config(file_values, over)


def _out_path(cfg: RunConfig, command: str) -> Path:
    return Path(cfg.out) if cfg.out else Path(f"{command}.{cfg.fmt}")


def _resolve_lambda(cfg: RunConfig) -> float:
    if cfg.lam is not None:
        return cfg.lam
    res = solve_lambda(cfg.bath, cfg.omega, cfg.quadrature)
    if not res.feasible:
        raise CommandError(
            f"trapping condition has no solution (I = {res.pv_integral:.6g} <= 0); pass --lambda explicitly"
        )
    log.info("lambda auto-solved: %.9g", res.lambda_star)
    return res.lambda_star


def _t_end(cfg: RunConfig, model) -> float:
    return cfg.t_end if cfg.t_end is not None else default_t_end(model, cfg.bath)


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    meta = {"command": command, "config": cfg.to_dict()}
    meta.update(extra)
    return meta


def cmd_coefficients(cfg: RunConfig, workers: int) -> int:
    model = cfg.model(_resolve_lambda(cfg))
    t_end = _t_end(cfg, model)
    flavor = Flavor.RWA if cfg.rwa else Flavor.FULL
    table = build_coefficient_table(model, cfg.bath, t_end, cfg.quadrature, flavor, workers)
    series = coefficient_series(model, cfg.bath, t_end, cfg.quadrature, flavor, table=table)
    series.metadata.update(_meta(cfg, "coefficients", lambda_used=model.lam))
    path = write_results(series, _out_path(cfg, "coefficients"), cfg.fmt)
    d_inf = lamb_shift_infinity(model, cfg.bath, cfg.quadrature).value
    g_inf = decay_rate_infinity(model, cfg.bath)
    regime = classify_regime(table, table.t_end)
    print(
        f"wrote {path} ({len(series.rows)} rows); lambda={model.lam:.9g} "
        f"Delta(inf)={d_inf:.9g} Gamma(inf)={g_inf:.9g} regime(t_end)={regime.regime.value}"
    )
    return 0


def cmd_evolve(cfg: RunConfig, workers: int) -> int:
    model = cfg.model(_resolve_lambda(cfg))
    t_end = _t_end(cfg, model)
    flavor = Flavor.RWA if cfg.rwa else Flavor.FULL
    table = build_coefficient_table(model, cfg.bath, t_end, cfg.quadrature, flavor, workers)
    initials = [BlochXY(x, y) for x, y in cfg.initials]
    series = trajectory_series(
        model, cfg.bath, initials, t_end, cfg.quadrature, cfg.ode_tol, flavor, table=table
    )
    target = _out_path(cfg, "evolve")
    t0 = cfg.t0 if cfg.t0 is not None else 10.0 / cfg.bath.gamma
    for k, (ini, s) in enumerate(zip(initials, series)):
        s.metadata.update(_meta(cfg, "evolve", lambda_used=model.lam, t0=t0))
        path = write_results(s, indexed_path(target, k, len(series)), cfg.fmt)
        traj = evolve(ini, table, t_end, cfg.ode_tol)
        c_inf, x_inf = converged_coherence(traj)
        line = f"wrote {path}: initial=({ini.x:g}, {ini.y:g}) |x(inf)|={abs(x_inf):.6g} C(inf)={c_inf:.6g}"
        if flavor is Flavor.FULL and t0 <= t_end:
            est = residue_estimate(traj, table, t0, model, cfg.bath)
            line += f" two-stage estimate={est:.6g}"
        print(line)
    return 0


def cmd_scan_initial(cfg: RunConfig, workers: int, strict: bool) -> int:
    model = cfg.model(_resolve_lambda(cfg))
    t_end = _t_end(cfg, model)
    res = scan_initial_states(
        model, cfg.bath, cfg.grid_n, t_end, cfg.ode_tol, cfg.quadrature, workers, mode=cfg.scan_mode
    )
    series = res.to_series()
    series.metadata.update(_meta(cfg, "scan-initial", lambda_used=model.lam))
    path = write_results(series, _out_path(cfg, "scan-initial"), cfg.fmt)
    x0, y0, cmax = res.argmax()
    n_fail = len(res.metadata["failures"])
    slope = res.metadata["symmetry_axis_slope"]
    print(
        f"wrote {path}: max C(inf)={cmax:.6g} at (x0, y0)=({x0:g}, {y0:g}); "
        f"symmetry-axis slope={slope:.6g}; max asymmetry={res.metadata['max_asymmetry']:.3g}"
    )
    if n_fail:
        print(f"warning: {n_fail} grid point(s) failed", file=sys.stderr)
        if strict:
            return 1
    return 0


def cmd_lambda_curve(cfg: RunConfig, workers: int) -> int:
    temps = np.logspace(math.log10(cfg.curve_t_min), math.log10(cfg.curve_t_max), cfg.curve_n_points)
    curve = lambda_curve(cfg.bath, temps, cfg.quadrature, cfg.omega, workers)
    series = curve_series(curve, _meta(cfg, "lambda-curve", bath_template=cfg.bath.to_dict()))
    path = write_results(series, _out_path(cfg, "lambda-curve"), cfg.fmt)
    n_feas = sum(r.feasible for _, r in curve)
    print(f"wrote {path}: {n_feas}/{len(curve)} temperatures feasible")
    bnd = feasibility_boundary(curve)
    if bnd:
        print(f"feasibility lost between T={bnd[0]:.6g} and T={bnd[1]:.6g}")
    try:
        tp = nonmonotonic_turning_point(curve)
    except ValueError:
        tp = None
    if tp is not None:
        print(f"lambda*(T) turning point at T={tp:.6g}")
    failed = [T for T, r in curve if r.error]
    if failed:
        print(f"warning: {len(failed)} temperature(s) failed", file=sys.stderr)
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    res = solve_lambda(cfg.bath, cfg.omega, cfg.quadrature)
    print(f"I = {res.pv_integral:.9g} (+- {res.pv_error:.3g})")
    if res.indeterminate:
        print("feasibility: indeterminate (|I| within 10 error estimates of zero)")
    if res.feasible:
        d = lamb_shift_infinity(cfg.model(res.lambda_star), cfg.bath, cfg.quadrature).value
        print("feasible: yes")
        print(f"lambda* = {res.lambda_star:.9g} (+- {res.error_estimate:.3g})")
        print(f"Delta(inf; lambda*) = {d:.9g}")
    else:
        print("feasible: no (I <= 0, the trapping condition has no solution)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        workers = args.workers if args.workers is not None else env_workers()
        if workers < 1:
            raise ConfigError(["--workers must be >= 1"])
        if args.command == "coefficients":
            return cmd_coefficients(cfg, workers)
        if args.command == "evolve":
            return cmd_evolve(cfg, workers)
        if args.command == "scan-initial":
            return cmd_scan_initial(cfg, workers, args.strict)
        if args.command == "lambda-curve":
            return cmd_lambda_curve(cfg, workers)
        return cmd_solve(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CommandError, QuadratureError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
