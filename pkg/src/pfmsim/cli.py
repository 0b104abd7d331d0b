"""Command-line harness.

    python -m pfmsim run --scenario taylor_green_2d --res 64 --t-end 1 --out out/tg
    python -m pfmsim converge --scenario taylor_green_2d --res 32,64,128 --t-end 5 --expect-order 2.5
    python -m pfmsim cavity --re 100 --res 128 --ladder 64
    python -m pfmsim karman --re 40 --res 256 --long

Every flag may also come from a JSON file given with ``--config``; flags
override the file.  Exit codes: 0 success, 2 tolerance failure, 1 solver or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import bench
from .grid import ConfigurationError
from .particles import IntegrationError
from .poisson import SolverError
from .solver import SimulationError

log = logging.getLogger("pfmsim")

EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 2

# command-specific defaults; RunConfig supplies the rest
DEFAULTS = {
    "run": {},
    "converge": {"res": (32, 64, 128), "t_end": 5.0},
    "cavity": {"re": 100.0, "res": (128,), "ladder": (64,), "t_max": 40.0, "t_coarse": 40.0,
               "steady_tol": 1e-5},
    "karman": {"re": 40.0, "res": (256,)},
}
CAVITY_TOL = {100: 0.05, 1000: 0.06}
KARMAN_CD_RANGE_RE40 = (1.42, 1.62)
KARMAN_T_LONG, KARMAN_T_SHORT = 100.0, 2.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for tolerance failures
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_list(s: str):
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _float_list(s: str):
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pfmsim", description="Particle flow map Navier-Stokes benchmarks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with default values for any flag")
        sp.add_argument("--scenario")
        sp.add_argument("--res", type=_int_list)
        sp.add_argument("--method", choices=("pfm", "pic", "flip", "apic"))
        sp.add_argument("--nu", type=float)
        sp.add_argument("--cfl", type=float)
        sp.add_argument("--t-end", dest="t_end", type=float)
        sp.add_argument("--reinit", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--lap-order", dest="lap_order", type=int, choices=(2, 4))
        sp.add_argument("--max-steps", dest="max_steps", type=int)
        sp.add_argument("--out")

    sp = sub.add_parser("run", help="run one scenario")
    common(sp)
    sp.add_argument("--re", type=float)

    sp = sub.add_parser("converge", help="convergence study against an analytic solution")
    common(sp)
    sp.add_argument("--expect-order", dest="expect_order", type=_float_list,
                    help="LO or LO,HI bounds on the fitted Linf and L2 orders")

    sp = sub.add_parser("cavity", help="lid-driven cavity against the reference profiles")
    common(sp)
    sp.add_argument("--re", type=float)
    sp.add_argument("--ladder", type=_int_list, help="coarser resolutions to pass through first")
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.add_argument("--t-coarse", dest="t_coarse", type=float)
    sp.add_argument("--steady-tol", dest="steady_tol", type=float)
    sp.add_argument("--tol", type=float, help="max deviation from the reference profiles")

    sp = sub.add_parser("karman", help="flow past a cylinder, drag and lift history")
    common(sp)
    sp.add_argument("--re", type=float)
    sp.add_argument("--long", action="store_true", default=None,
                    help="full-length run with the drag acceptance check")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge command defaults, the config file and explicit flags (in that order)."""
    opts = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        for k, v in data.items():
            k = k.replace("-", "_")
            if k in ("res", "ladder") and isinstance(v, int):
                v = (v,)
            opts[k] = tuple(v) if isinstance(v, list) else v
    for k, v in vars(args).items():
        if k in ("command", "config", "verbose") or v is None:
            continue
        opts[k] = v
    return opts


def _run_config(opts: dict, **extra) -> bench.RunConfig:
    keys = {f for f in bench.RunConfig.__dataclass_fields__}
    kw = {k: v for k, v in opts.items() if k in keys}
    kw.update(extra)
    return bench.RunConfig(**kw)


def _write_manifest(out, payload: dict):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, default=float)


# ---------------------------------------------------------------------------

def cmd_run(opts: dict) -> int:
    rc = _run_config(opts)
    sc, st, cfg = bench.run_single(rc)
    summary = {"scenario": sc.name, "res": rc.res[0], "steps": st.k, "time": st.t}
    if sc.exact is not None:
        l2, linf = bench.error_norms(st.u, sc.exact_field(st.t, cfg.nu), sc.bc)
        summary.update(L2=l2, Linf=linf)
    print(json.dumps(summary))
    if rc.out:
        extra = {"summary": summary, "run_config": rc.to_dict()}
        tables = None
        if cfg.ibm is not None:
            ser = cfg.ibm.series
            tables = {"forces": ("t,Cd,Cl", list(zip(ser.t, ser.cd, ser.cl)))}
        bench.emit_outputs(rc.out, st, cfg, extra, tables)
    return EXIT_OK


def cmd_converge(opts: dict) -> int:
    rc = _run_config(opts)
    table = bench.run_convergence(rc, log=log.info)
    print(table)
    status = EXIT_OK
    bounds = opts.get("expect_order")
    if bounds:
        lo = bounds[0]
        hi = bounds[1] if len(bounds) > 1 else math.inf
        ok = all(lo <= o <= hi for o in (table.fitted_linf, table.fitted_l2))
        print(f"fitted orders Linf {table.fitted_linf:.3f}, L2 {table.fitted_l2:.3f}; "
              f"expected [{lo}, {hi}]: {'PASS' if ok else 'FAIL'}")
        status = EXIT_OK if ok else EXIT_TOLERANCE
    if rc.out:
        os.makedirs(rc.out, exist_ok=True)
        table.to_csv(os.path.join(rc.out, "convergence.csv"))
        _write_manifest(rc.out, {"command": "converge", "run_config": rc.to_dict(),
                                 "fitted_linf": table.fitted_linf, "fitted_l2": table.fitted_l2,
                                 "files": {"table": "convergence.csv"}})
    return status


def cmd_cavity(opts: dict) -> int:
    Re = float(opts["re"])
    res = int(opts["res"][0])
    ladder = tuple(r for r in opts.get("ladder", ()) if r < res)
    result = bench.run_cavity(Re, res, ladder, t_max=opts["t_max"], t_coarse=opts.get("t_coarse"),
                              steady_tol=opts["steady_tol"], log=log.info)
    tol = opts.get("tol", CAVITY_TOL.get(int(Re)))
    print(f"Re {Re:g} N {res}: max deviation {result.deviation:.4f}, steady {result.steady} "
          f"(cycle-mean rate {result.rate:.2e}), t {result.t:.2f}")
    status = EXIT_OK
    if tol is not None and np.isfinite(result.deviation):
        ok = result.deviation <= tol
        print(f"tolerance {tol}: {'PASS' if ok else 'FAIL'}")
        status = EXIT_OK if ok else EXIT_TOLERANCE
    out = opts.get("out")
    if out:
        rows = ([("u", y, v) for y, v in zip(bench.GHIA_Y, result.uprof)]
                + [("v", x, v) for x, v in zip(bench.GHIA_X, result.vprof)])
        bench.emit_outputs(out, result.state, result.config,
                           {"deviation": result.deviation, "steady": result.steady, "Re": Re},
                           {"profiles": ("line,coord,value", rows)})
    return status


def cmd_karman(opts: dict) -> int:
    Re = float(opts["re"])
    res = int(opts["res"][0])
    long = bool(opts.get("long"))
    t_end = opts.get("t_end") or (KARMAN_T_LONG if long else KARMAN_T_SHORT)
    st, cfg = bench.run_karman(Re, res, t_end, log=log.info)
    ser = cfg.ibm.series
    cd = ser.mean_cd()
    print(f"Re {Re:g} N {res}: t {st.t:.3f}, mean Cd over the last third {cd:.4f}, "
          f"Cl amplitude {ser.cl_amplitude():.4f}")
    status = EXIT_OK
    if long and int(Re) == 40:
        lo, hi = KARMAN_CD_RANGE_RE40
        ok = lo <= cd <= hi
        print(f"Cd in [{lo}, {hi}]: {'PASS' if ok else 'FAIL'}")
        status = EXIT_OK if ok else EXIT_TOLERANCE
    out = opts.get("out")
    if out:
        bench.emit_outputs(out, st, cfg, {"mean_cd": cd, "Re": Re},
                           {"forces": ("t,Cd,Cl", list(zip(ser.t, ser.cd, ser.cl)))})
    return status


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "cavity": cmd_cavity, "karman": cmd_karman}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (SimulationError, SolverError, IntegrationError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigurationError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
