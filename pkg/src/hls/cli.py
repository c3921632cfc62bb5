"""
Command-line front end.

Subcommands ``direct``, ``invert``, ``check`` and ``roundtrip`` read JSON
documents, call the library and write JSON (plus CSV tables) into
``--out-dir``. ``example`` exports a catalog entry as input files and
``list-examples`` prints the catalog.

Exit codes: 0 success, 1 a requested condition failed, 2 invalid input,
3 solver failure, 4 partial result.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charcheck, direct, io, marchenko as mk, oracle, propagate
from .errors import HLSError, SolverError, ValidationError
from .model import Grid, ScatteringData
from .roundtrip import roundtrip

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4

# tolerance names accepted by --tol, mapped to (module, attribute)
TOLERANCES = {
    "unitary": (charcheck, "UNITARY_TOL"),
    "nullity": (charcheck, "NULL_TOL"),
    "levinson": (charcheck, "LEVINSON_TOL"),
    "delta": (charcheck, "DELTA_TOL"),
    "vb": (charcheck, "VB_TOL"),
    "parseval": (charcheck, "PARSEVAL_TOL"),
    "bound_state": (direct, "ACCEPT_TOL"),
    "multiplicity": (direct, "MULT_TOL"),
    "propagator": (propagate, "TOL"),
    "marchenko_singular": (mk, "SINGULAR_TOL"),
}


@dataclass
class RunConfig:
    x_cut: float = 12.0
    x_step: float = 0.02
    k_max: float = 30.0
    k_points: int = 600
    kappa_max: float = 10.0
    tol: dict = field(default_factory=dict)
    # names of the fields given on the command line
    explicit: tuple = ()

    def __post_init__(self):
        for name in ("x_cut", "x_step", "k_max", "kappa_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v}", {"path": name})
        if self.k_points < 16:
            raise ValidationError(f"k_points must be at least 16, got {self.k_points}", {"path": "k_points"})
        for name, v in self.tol.items():
            if name not in TOLERANCES:
                raise ValidationError(f"unknown tolerance {name!r}; known: {', '.join(TOLERANCES)}",
                                      {"path": f"tol.{name}"})
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"tolerance {name} must be positive, got {v}", {"path": f"tol.{name}"})

    def x_grid(self, data: ScatteringData) -> Grid:
        """``[0, x_max]`` with ``x_max`` at least ``x_cut`` and the decay length of ``F``."""
        x_max = max(self.x_cut, mk.default_x_grid(data, self.x_step).stop)
        return Grid.spanning(0.0, x_max, self.x_step)


@contextlib.contextmanager
def tolerances(overrides):
    """Temporarily replace module tolerances."""
    saved = []
    try:
        for name, value in overrides.items():
            mod, attr = TOLERANCES[name]
            saved.append((mod, attr, getattr(mod, attr)))
            setattr(mod, attr, float(value))
        yield
    finally:
        for mod, attr, value in reversed(saved):
            setattr(mod, attr, value)


def thread_count():
    """Worker count from ``HLS_THREADS``; 1 means serial."""
    raw = os.environ.get("HLS_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"HLS_THREADS must be an integer, got {raw!r}", {"path": "HLS_THREADS"}) from None
    return max(1, n)


@contextlib.contextmanager
def parallel_map():
    n = thread_count()
    if n == 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map


def _finite(obj):
    """Replace non-finite floats by None so the document stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def _out(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# pipelines


def run_direct(V, pair, cfg: RunConfig):
    """Library call behind ``direct``: returns the DirectResult and its ScatteringData."""
    with parallel_map() as pmap:
        res = direct.solve_direct(V, pair, cfg.k_max, cfg.k_points, cfg.kappa_max, pmap=pmap)
    data = ScatteringData.sampled(res.k_grid, res.S_values, res.S_inf, res.bound_states)
    return res, data


def cmd_direct(args, cfg):
    V = io.read_potential(args.potential)
    pair = io.read_boundary(args.boundary)
    res, data = run_direct(V, pair, cfg)
    out = _out(args)
    io.write_json(out / "scattering_data.json", io.scattering_to_json(data))
    (out / "S.csv").write_text(io.matrix_csv("k", res.k_grid.points, res.S_values))
    diag = {"G1": io.matrix_to_json(res.G1), "warnings": list(res.warnings),
            "bound_states": [{"kappa": float(b.kappa), "rank": b.rank} for b in res.bound_states]}
    io.write_json(out / "direct_diagnostics.json", diag)
    print(f"S on {res.k_grid.count} points in (0, {res.k_grid.stop:g}], "
          f"{len(res.bound_states)} bound state(s)")
    for b in res.bound_states:
        print(f"  kappa = {b.kappa:.12g}, multiplicity {b.rank}")
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def run_invert(data, cfg: RunConfig):
    x_grid = cfg.x_grid(data) if data.variant == "analytic" else None
    return mk.invert(data, x_grid)


def cmd_invert(args, cfg):
    data = io.read_scattering(args.data)
    inv = run_invert(data, cfg)
    out = _out(args)
    if inv.potential is not None:
        io.write_json(out / "potential.json", io.potential_to_json(inv.potential))
        (out / "V.csv").write_text(io.matrix_csv("x", inv.potential.grid.points, inv.potential.values))
    if inv.boundary is not None:
        io.write_json(out / "boundary.json", io.boundary_to_json(inv.boundary))
    diag = {"errors": [{"stage": s, "message": m} for s, m in inv.errors],
            "diagnostics": charcheck._jsonable(inv.diagnostics)}
    if inv.G1 is not None:
        diag["G1"] = io.matrix_to_json(inv.G1)
    if inv.K00 is not None:
        diag["K00"] = io.matrix_to_json(inv.K00)
    io.write_json(out / "inverse_diagnostics.json", _finite(diag))
    if inv.potential is not None:
        g = inv.potential.grid
        print(f"potential on [{g.start:g}, {g.stop:g}] with {g.count} points")
    if inv.boundary is not None:
        print("boundary pair recovered")
    for stage, msg in inv.errors:
        print(f"error ({stage}): {msg}", file=sys.stderr)
    if inv.errors:
        return EXIT_PARTIAL if inv.potential is not None else EXIT_SOLVER
    return EXIT_OK


def cmd_check(args, cfg):
    data = io.read_scattering(args.data)
    wanted = [c.strip() for c in args.conditions.split(",")] if args.conditions else None
    report = charcheck.full_report(data, conditions=wanted)
    out = _out(args)
    if args.format == "csv":
        with open(out / "check_report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["condition", "verdict", "message"])
            w.writerows([c.id, c.verdict, c.message] for c in report.conditions)
    else:
        io.write_json(out / "check_report.json", _finite(report.to_dict()))
    print(report.to_text())
    selected = [c for c in report.conditions if wanted is None or c.id in wanted]
    return EXIT_CHECK_FAILED if any(c.verdict == charcheck.FAIL for c in selected) else EXIT_OK


def run_roundtrip(data, cfg: RunConfig, reference_boundary=None):
    x_grid = None
    if data.variant == "analytic" and ("x_step" in cfg.explicit or "x_cut" in cfg.explicit):
        x_grid = cfg.x_grid(data)
    with parallel_map() as pmap:
        return roundtrip(data, reference_boundary, x_grid=x_grid, k_max=cfg.k_max,
                         k_points=cfg.k_points, kappa_max=cfg.kappa_max, pmap=pmap)


def cmd_roundtrip(args, cfg):
    data = io.read_scattering(args.data)
    ref = io.read_boundary(args.boundary) if args.boundary else None
    rep = run_roundtrip(data, cfg, ref)
    out = _out(args)
    d = rep.to_dict()
    d["within_tolerance"] = rep.within()
    if args.format == "csv":
        keys = ["S_deviation", "kappa_deviation", "M_deviation", "boundary_distance"]
        text = ",".join(keys) + "\n" + ",".join("" if d[k] is None else repr(float(d[k])) for k in keys) + "\n"
        (out / "roundtrip.csv").write_text(text)
    else:
        io.write_json(out / "roundtrip.json", _finite(d))
    for k in ("S_deviation", "kappa_deviation", "M_deviation", "boundary_distance"):
        v = d[k]
        print(f"{k:18s} {'n/a' if v is None else f'{v:.3e}'}")
    print("within tolerance" if d["within_tolerance"] else "outside tolerance")
    return EXIT_OK


def cmd_example(args, cfg):
    ex = oracle.get_example(args.name)
    out = _out(args)
    io.write_json(out / f"{ex.name}.scattering.json", io.scattering_to_json(ex.data))
    written = [f"{ex.name}.scattering.json"]
    if ex.potential is not None:
        doc = io.potential_to_json(ex.potential)
        io.write_json(out / f"{ex.name}.potential.json", doc)
        written.append(f"{ex.name}.potential.json")
    if ex.boundary is not None:
        io.write_json(out / f"{ex.name}.boundary.json", io.boundary_to_json(ex.boundary))
        written.append(f"{ex.name}.boundary.json")
    print(f"{ex.name}: {ex.description}")
    if ex.notes:
        print(f"  {ex.notes}")
    for name in written:
        print(f"  wrote {out / name}")
    return EXIT_OK


def cmd_list(args, cfg):
    rows = oracle.list_examples()
    width = max(len(r[0]) for r in rows)
    for name, desc, overall in rows:
        print(f"{name:<{width}}  {overall:<4}  {desc}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _tol_arg(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance value {value!r} is not a number") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--x-cut", type=float, default=None, help="smallest x range for inversion (default 12)")
    common.add_argument("--x-step", type=float, default=None, help="x step of the recovered potential (default 0.02)")
    common.add_argument("--k-max", type=float, default=30.0, help="largest k of the S grid")
    common.add_argument("--k-points", type=int, default=600, help="number of k grid points")
    common.add_argument("--kappa-max", type=float, default=10.0, help="bound-state search range")
    common.add_argument("--tol", type=_tol_arg, action="append", default=[], metavar="NAME=VALUE",
                        help="override a tolerance: " + ", ".join(TOLERANCES))
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="report format")

    p = argparse.ArgumentParser(prog="hls", description="Half-line matrix Schroedinger scattering.")
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("direct", parents=[common], help="potential and boundary to scattering data")
    d.add_argument("potential")
    d.add_argument("boundary")
    d.set_defaults(func=cmd_direct)
    i = sub.add_parser("invert", parents=[common], help="scattering data to potential and boundary")
    i.add_argument("data")
    i.set_defaults(func=cmd_invert)
    c = sub.add_parser("check", parents=[common], help="characterization conditions")
    c.add_argument("data")
    c.add_argument("--conditions", default=None, help="comma separated ids, e.g. 1,2,4c,L")
    c.set_defaults(func=cmd_check)
    r = sub.add_parser("roundtrip", parents=[common], help="invert, solve the direct problem, compare")
    r.add_argument("data")
    r.add_argument("--boundary", default=None, help="reference boundary file")
    r.set_defaults(func=cmd_roundtrip)
    e = sub.add_parser("example", parents=[common], help="write a catalog example as input files")
    e.add_argument("name")
    e.set_defaults(func=cmd_example)
    ls = sub.add_parser("list-examples", help="list the catalog")
    ls.set_defaults(func=cmd_list)
    return p


def config_from_args(args) -> RunConfig:
    if not hasattr(args, "k_max"):
        return RunConfig()
    explicit = tuple(name for name in ("x_cut", "x_step") if getattr(args, name) is not None)
    return RunConfig(
        x_cut=12.0 if args.x_cut is None else args.x_cut,
        x_step=0.02 if args.x_step is None else args.x_step,
        k_max=args.k_max, k_points=args.k_points, kappa_max=args.kappa_max,
        tol=dict(args.tol), explicit=explicit,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        with tolerances(cfg.tol):
            return args.func(args, cfg)
    except ValidationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HLSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
