"""Command-line interface.

Subcommands: simulate, sweep, linear-check, qg-compare, decompose, inspect.
Configuration comes from a JSON document (--config); individual flags
override config keys.  GQG_OUT_DIR provides the default output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical instability,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ConfigError,
    InstabilityError,
    RunConfig,
    run_cross_validation,
    run_eps_sweep,
    run_linear_validation,
    run_simulation,
    run_wellprepared_comparison,
)
from .initial import InitialDataError
from .norms import profile_sobolev_norm, sobolev_norm
from .reporting import (
    write_linear_report,
    write_qg_report,
    write_simulation_report,
    write_sweep_report,
)
from .snapshot import SnapshotError, inspect_snapshot, read_snapshot, write_snapshot
from .states import PrimitiveState
from .transform import extract_gpv, fast_filter

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_IO = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON configuration document")
    p.add_argument("--eps", type=str, help="eps value or comma-separated list")
    p.add_argument("--grid", type=str, metavar="NX,NY,NZ", help="grid sizes")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--dt", type=str, help="time step (number or 'auto')")
    p.add_argument("--formulation", choices=["gpv", "primitive", "limit"])
    p.add_argument("--disable-nonlinear", action="store_true", default=None)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--print-config", action="store_true",
                   help="echo the resolved configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gqg",
        description="Pseudo-spectral channel solver for fast-rotating Boussinesq "
        "flow and its generalized quasi-geostrophic limit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in [
        ("simulate", "advance one formulation and emit diagnostics and snapshots"),
        ("sweep", "eps-sweep against the limit system (convergence metrics)"),
        ("linear-check", "linear-regime validation against the closed-form solution"),
        ("qg-compare", "balanced-data comparison against classical pv transport"),
        ("cross-validate", "compare the gpv and primitive solvers on one flow"),
    ]:
        p = sub.add_parser(name, help=desc)
        _add_common(p)

    p = sub.add_parser("decompose", help="split a snapshot into GPV and fast-filtered fields")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--out", type=Path, help="output directory")

    p = sub.add_parser("inspect", help="print a snapshot header without loading arrays")
    p.add_argument("snapshot", type=Path)

    return parser


def _parse_eps(text: str):
    vals = [float(tok) for tok in text.split(",") if tok.strip()]
    return vals if len(vals) > 1 else vals[0]


def load_config(args) -> RunConfig:
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if args.eps is not None:
        doc["eps"] = _parse_eps(args.eps)
    if args.grid is not None:
        parts = [int(tok) for tok in args.grid.split(",")]
        if len(parts) != 3:
            raise ConfigError("--grid expects NX,NY,NZ")
        doc.setdefault("grid", {})
        doc["grid"].update({"nx": parts[0], "ny": parts[1], "nz": parts[2]})
    if args.t_end is not None:
        doc["t_end"] = args.t_end
    if args.dt is not None:
        doc.setdefault("integrator", {})
        doc["integrator"]["dt"] = args.dt if args.dt == "auto" else float(args.dt)
    if args.formulation is not None:
        doc["formulation"] = args.formulation
    if args.disable_nonlinear:
        doc["disable_nonlinear"] = True
    if args.jobs is not None:
        doc["jobs"] = args.jobs
    if args.seed is not None:
        doc.setdefault("initial_data", {})
        doc["initial_data"]["seed"] = args.seed
    out_dir = args.out or os.environ.get("GQG_OUT_DIR")
    if out_dir is not None:
        doc.setdefault("outputs", {})
        doc["outputs"]["out_dir"] = str(out_dir)
    return RunConfig.from_dict(doc)


def _maybe_print_config(args, config: RunConfig) -> bool:
    if getattr(args, "print_config", False):
        print(json.dumps(config.resolved(), sort_keys=True, indent=2))
        return True
    return False


def _cmd_simulate(args) -> int:
    config = load_config(args)
    if _maybe_print_config(args, config):
        return EXIT_OK
    out = Path(config.outputs["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)

    def on_snapshot(step, state):
        write_snapshot(state, snap_dir / f"step_{step:08d}.gqg")

    result = run_simulation(config, on_snapshot=on_snapshot)
    write_simulation_report(result, config, out)
    print(f"completed {result.n_steps} steps to t = {result.records[-1].t:g} "
          f"(dt = {result.dt:g}); reports in {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_config(args)
    if _maybe_print_config(args, config):
        return EXIT_OK
    report = run_eps_sweep(config)
    out = Path(config.outputs["out_dir"])
    write_sweep_report(report, out)
    print(f"sweep over eps = {[r['eps'] for r in report['rows']]}: "
          f"uniform bound ratio {report['uniform_bound_ratio']:.3f}; reports in {out}")
    return EXIT_OK


def _cmd_linear_check(args) -> int:
    config = load_config(args)
    if _maybe_print_config(args, config):
        return EXIT_OK
    report = run_linear_validation(config)
    out = Path(config.outputs["out_dir"])
    write_linear_report(report, out)
    d = report["drift"]
    r = report["reconstruction_error"]
    print(
        "linear regime: pv drift {phi:.3e}, filtered imbalance drift {psi:.3e}, "
        "reconstruction error {rec:.3e}; reports in {out}".format(
            phi=d["phi"], psi=d["psi_plus"],
            rec=max(r["v"], r["w"], r["theta"]), out=out,
        )
    )
    return EXIT_OK


def _cmd_qg_compare(args) -> int:
    config = load_config(args)
    if _maybe_print_config(args, config):
        return EXIT_OK
    report = run_wellprepared_comparison(config)
    out = Path(config.outputs["out_dir"])
    write_qg_report(report, out)
    order = report.get("phi_error_order")
    msg = f"balanced comparison over eps = {[r['eps'] for r in report['rows']]}"
    if order is not None:
        msg += f": fitted pv-error order {order:.2f}"
    print(msg + f"; reports in {out}")
    return EXIT_OK


def _cmd_cross_validate(args) -> int:
    config = load_config(args)
    if _maybe_print_config(args, config):
        return EXIT_OK
    report = run_cross_validation(config)
    out = Path(config.outputs["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "cross_validation.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"gpv vs primitive H1 difference at t = {config.t_end:g}: "
          f"{report['h1_difference']:.6e}; report in {out}")
    return EXIT_OK


def _cmd_decompose(args) -> int:
    state = read_snapshot(args.snapshot)
    if not isinstance(state, PrimitiveState):
        raise ConfigError("decompose expects a primitive-state snapshot")
    out = Path(args.out or os.environ.get("GQG_OUT_DIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    gpv = extract_gpv(state, check=False)
    pair = fast_filter(gpv)
    write_snapshot(gpv, out / (args.snapshot.stem + "_gpv.gqg"))
    grid = state.grid
    summary = {
        "source": str(args.snapshot),
        "time": state.t,
        "eps": state.eps,
        "norms": {
            "pv_H1": sobolev_norm(grid, gpv.pv, 1),
            "imbalance_H1": sobolev_norm(grid, gpv.imbalance, 1),
            "imbalance_plus_H1": sobolev_norm(grid, pair.imbalance_plus, 1),
            "vmean_H2": profile_sobolev_norm(grid, gpv.vmean, 2),
            "vmean_plus_H2": profile_sobolev_norm(grid, pair.vmean_plus, 2),
            "theta_bot_max": float(np.max(np.abs(gpv.theta_bot))),
            "theta_top_max": float(np.max(np.abs(gpv.theta_top))),
        },
    }
    (out / (args.snapshot.stem + "_decompose.json")).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    for key, val in summary["norms"].items():
        print(f"{key:22s} {val:.9e}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    header = inspect_snapshot(args.snapshot)
    grid = header["grid"]
    print(f"kind: {header['kind']}")
    print(f"grid: {grid['nx']} x {grid['ny']} x {grid['nz']}+1 nodes, h = {grid['h']}")
    print(f"time: {header['time']}")
    print(f"eps:  {header['eps']}")
    print(f"fields: {', '.join(e['name'] for e in header['fields'])}")
    print(f"payload: {header['payload_bytes']} bytes, crc32 {header['crc32']:#010x}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "linear-check": _cmd_linear_check,
    "qg-compare": _cmd_qg_compare,
    "cross-validate": _cmd_cross_validate,
    "decompose": _cmd_decompose,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InitialDataError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (OSError, SnapshotError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
