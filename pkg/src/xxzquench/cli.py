"""Command-line entry point: ``xxzquench {ground,quench,sweep,validate,xi}``.

A configuration file (``--config``) supplies defaults; explicit flags win.
Exit codes: 0 success, 2 configuration, 3 capacity, 4 convergence,
5 tolerance breach, 1 anything else raised by the package.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import ed, protocol
from . import mps as mpsmod
from .config import RunConfig, load_config, parse_grid, with_overrides
from .errors import ConfigError, XXZError
from .model import build_h0
from .observables import concurrence
from .records import (
    ResultRecord,
    emit_csv,
    sweep_record,
    trajectory_record,
    write_record,
)

DEFAULT_GRIDS = {
    "delta": "-0.5,0,0.5,1,1.5,2",
    "j1": "-0.3,-0.2,-0.1,-0.05,0.05,0.1,0.2",
    "size": "8:24:4",
    "temperature": "0.1:1.5:0.1",
}

# flag dest -> config path
FLAG_PATHS = {
    "n": "model.n",
    "delta": "model.delta",
    "j1": "model.j1",
    "j": "model.j",
    "engine": "engine.engine",
    "dt": "engine.dt",
    "m": "engine.m",
    "weight_floor": "engine.weight_floor",
    "krylov_tol": "engine.krylov_tol",
    "ground_method": "engine.ground_method",
    "window": "protocol.window",
    "sample_dt": "protocol.sample_dt",
    "grid": "protocol.grid",
    "workers": "protocol.workers",
    "tol": "protocol.tolerance",
    "allow_zero": "protocol.allow_zero",
    "output": "output.csv",
    "record": "output.record",
}


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, help="chain length N")
    g.add_argument("--delta", type=float, help="anisotropy Delta")
    g.add_argument("--j1", type=float, help="quenched first-bond coupling")
    g.add_argument("--j", type=float, help="uniform coupling J")
    g = p.add_argument_group("engine")
    g.add_argument("--engine", choices=("exact", "mps", "auto"))
    g.add_argument("--dt", type=float, help="Trotter step")
    g.add_argument("--m", type=int, help="MPS bond-dimension cap")
    g.add_argument("--weight-floor", type=float)
    g.add_argument("--krylov-tol", type=float)
    g.add_argument("--ground-method", choices=("dmrg", "imaginary"))
    g = p.add_argument_group("protocol")
    g.add_argument("--window", type=float, help="time window in units of 1/J")
    g.add_argument("--sample-dt", type=float, help="sampling interval")
    g.add_argument("--workers", type=int, help="parallel sweep points")
    g = p.add_argument_group("output")
    g.add_argument("--config", help="configuration file")
    g.add_argument("--output", "-o", help="CSV output path (default: standard output)")
    g.add_argument("--record", help="also write the full JSON result record here")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xxzquench", description="End-to-end entanglement after a boundary quench.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="ground-state energy and end-to-end concurrence")
    _common(p)
    p = sub.add_parser("quench", help="single trajectory C(t)")
    _common(p)
    p = sub.add_parser("sweep", help="peak concurrence along one parameter axis")
    p.add_argument("axis", choices=("delta", "j1", "size", "temperature"))
    p.add_argument("--grid", help="values as start:stop:step or a comma list")
    p.add_argument("--allow-zero", action="store_true", default=None, help="permit J1 = 0")
    _common(p)
    p = sub.add_parser("validate", help="exact vs MPS cross-check")
    p.add_argument("--tol", type=float, help="allowed max |C_exact - C_mps| (default 1e-3)")
    _common(p)
    p = sub.add_parser("xi", help="table of the 1.35 N^(-1/3) baseline")
    p.add_argument("--grid", help="chain lengths (default 8:60:4)")
    p.add_argument("-o", "--output")
    return parser


def _config(args, default_window=None) -> RunConfig:
    base = load_config(args.config) if getattr(args, "config", None) else None
    overrides = {}
    for dest, path in FLAG_PATHS.items():
        if hasattr(args, dest):
            value = getattr(args, dest)
            if dest == "grid" and value is not None:
                try:
                    value = parse_grid(value)
                except ValueError as exc:
                    raise ConfigError(f"--grid: {exc}") from exc
            overrides[path] = value
    if base is None and args.n is None and getattr(args, "axis", None) != "size":
        raise ConfigError("model.n: required (pass --n or --config)")
    if base is None and args.n is None:
        overrides["model.n"] = 8
    if default_window is not None and args.window is None and (base is None or base.protocol.window is None):
        overrides["protocol.window"] = default_window
    if base is None and args.j1 is None:
        overrides["model.j1"] = -0.1
    return with_overrides(base, overrides)


def _write(text: str, path, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_ground(args, out):
    cfg = _config(args)
    p, ec = cfg.model, cfg.engine
    engine = ec.resolve(p.N)
    if engine == "exact":
        gs, e0 = ed.ground_state(build_h0(p), p.N, cap=ec.ed_cap)
        c = concurrence(ed.partial_trace_pair(gs, 1, p.N))
    else:
        state, e0 = protocol.prepare_mps_ground_state(p, ec)
        c = mpsmod.EndToEndMeasurer(ec.bloch_tol)(state, 0.0)
    rec = ResultRecord("ground", cfg.to_dict(), {"energy": e0, "concurrence": c, "engine": engine})
    if cfg.output.record:
        write_record(rec, cfg.output.record)
    out.write(f"engine={engine} N={p.N} Delta={p.Delta:.17g} energy={e0:.17g} concurrence={c:.17g}\n")
    return 0


def cmd_quench(args, out):
    cfg = _config(args)
    window = cfg.protocol.window or protocol.DEFAULT_WINDOW
    traj = protocol.run_quench(cfg.model, cfg.engine, window, cfg.protocol.sample_dt)
    rec = trajectory_record(traj, cfg.to_dict())
    _write(emit_csv(rec, "trajectory"), cfg.output.csv, out)
    if cfg.output.record:
        write_record(rec, cfg.output.record)
    peak = rec.data["peak"]
    out.write(
        f"# peak c_max={peak['c_max']:.17g} t_max={peak['t_max']:.17g} "
        f"boundary={str(peak['attained_at_boundary']).lower()} engine={traj.engine}"
        + (f" warnings={','.join(traj.warnings)}" if traj.warnings else "")
        + "\n"
    )
    return 0


def cmd_sweep(args, out):
    axis = args.axis
    cfg = _config(args, default_window=None)
    grid = cfg.protocol.grid or parse_grid(DEFAULT_GRIDS[axis])
    kw = dict(sample_dt=cfg.protocol.sample_dt)
    window = cfg.protocol.window or protocol.DEFAULT_WINDOW
    if axis == "delta":
        res = protocol.sweep_delta(grid, cfg.model, cfg.engine, window=window, workers=cfg.protocol.workers, **kw)
    elif axis == "j1":
        res = protocol.sweep_j1(grid, cfg.model, cfg.engine, window=window, allow_zero=cfg.protocol.allow_zero,
                                workers=cfg.protocol.workers, **kw)
    elif axis == "size":
        # without an explicit --window each size gets ceil(1.2 N / J)
        explicit = args.window is not None
        res = protocol.sweep_size([int(v) for v in grid], cfg.model, cfg.engine,
                                  window=window if explicit else None, workers=cfg.protocol.workers, **kw)
    else:
        res = protocol.sweep_temperature(grid, cfg.model, window=window, density_cap=cfg.engine.density_cap, **kw)
    rec = sweep_record(res, cfg.to_dict())
    _write(emit_csv(rec, "sweep"), cfg.output.csv, out)
    if cfg.output.record:
        write_record(rec, cfg.output.record)
    ex = res.extras
    if axis in ("delta", "j1"):
        out.write(f"# argmax {res.axis}={ex['argmax']}\n")
    if axis == "j1":
        out.write(f"# t_max_spread={ex['t_max_spread']:.6g} t_max_spread_negative={ex['t_max_spread_negative']:.6g}\n")
    if axis == "size":
        f = ex["fit"]
        out.write(f"# fit t_max = {f['slope']:.17g} * N + {f['intercept']:.17g} r2={f['r2']:.17g} points={f['points']}\n")
        for n, s in zip(res.values, res.summaries):
            c = "nan" if s is None else f"{s.c_max:.6f}"
            out.write(f"# xi N={n} xi={ex['xi'][n]:.4f} c_max={c}\n")
    if axis == "temperature":
        out.write(f"# threshold kT={ex['threshold']}\n")
    for v, err in res.failures.items():
        out.write(f"# failed {res.axis}={v}: {err}\n")
    return 0


def cmd_validate(args, out):
    cfg = _config(args, default_window=30.0)
    window = args.window if args.window is not None else 30.0
    report = protocol.validate_engines(cfg.model, cfg.engine, window, cfg.protocol.sample_dt,
                                       tol=cfg.protocol.tolerance, raise_on_breach=False)
    rec = ResultRecord("validate", cfg.to_dict(), report)
    if cfg.output.record:
        write_record(rec, cfg.output.record)
    status = "PASS" if report["passed"] else "FAIL"
    out.write(
        f"{status} N={report['N']} max|C_exact-C_mps|={report['max_deviation']:.3e} "
        f"(tol {report['tolerance']:.1e}) at t={report['t_of_max_deviation']:g}; "
        f"c_max exact={report['c_max_exact']:.6f} mps={report['c_max_mps']:.6f}\n"
    )
    if not report["passed"]:
        return 5
    return 0


def cmd_xi(args, out):
    grid = parse_grid(args.grid) if args.grid else parse_grid("8:60:4")
    lines = ["N,xi"] + [f"{int(n)},{protocol.xi_baseline(int(n)):.17g}" for n in grid]
    _write("\n".join(lines) + "\n", args.output, out)
    return 0


COMMANDS = {"ground": cmd_ground, "quench": cmd_quench, "sweep": cmd_sweep, "validate": cmd_validate, "xi": cmd_xi}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return exc.exit_code
    except XXZError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
