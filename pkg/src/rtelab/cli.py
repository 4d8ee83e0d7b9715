"""Command line entry point: ``rtelab <subcommand> [options]``.

Exit status is 0 on success, 2 when a sweep contains non-converged solves,
1 on usage errors. ``RTELAB_WORKERS`` sets the number of sweep threads; it
never changes numerical output.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .albedo import (assemble_ballistic, assemble_full, assemble_single_scattering, operator_norm_l1,
                     residual)
from .experiments import EXPERIMENTS, ExperimentConfig, Lab, has_nonconverged, run
from .grid import MEASURES, build_grid, measure_weights
from .media import MediumField, ScaledMedium, constant, load_medium, make_paper_pair
from .tables import Table
from .transport import (DEFAULT_MAX_ITERS, DEFAULT_TOL, SCHEME_TAG, BoundaryFlux, NonConvergence,
                        solve_transport)

log = logging.getLogger("rtelab")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _grid_args(p):
    p.add_argument("--nx", type=int, default=24)
    p.add_argument("--ny", type=int, default=None, help="defaults to nx")
    p.add_argument("--ntheta", type=int, default=24)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--out", type=Path, default=None, help="output directory (default: print to stdout)")


def _medium_args(p):
    p.add_argument("--medium", default="ball-pair", help="ball-pair, uniform, or a key=value medium file")
    p.add_argument("--z", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rtelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rtelab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="one transport solve; writes <f> and the outflow trace")
    _grid_args(p)
    _medium_args(p)
    p.add_argument("--kn", type=float, default=1.0)
    p.add_argument("--inflow", default="constant:1", help="constant:c or facet:i,j")

    p = sub.add_parser("albedo-norm", help="induced L1 norm of an albedo operator")
    _grid_args(p)
    _medium_args(p)
    p.add_argument("--kn", type=float, default=1.0)
    p.add_argument("--which", choices=["full", "ballistic", "single", "residual", "diff"], default="full")
    p.add_argument("--method", choices=["ray", "sweep"], default=None,
                   help="ballistic/single-scattering variant (residual always uses sweep)")
    p.add_argument("--measure", choices=MEASURES, default="dxi")
    p.add_argument("--dump", type=Path, default=None, help="write matrix entries as CSV")

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _grid_args(p)
        p.add_argument("--kn-list", type=_floats, default=None)
        p.add_argument("--z-list", type=_floats, default=None)
        p.add_argument("--measure", choices=MEASURES, default="dxi")
        p.add_argument("--plot", action="store_true")
        if name == "stability-check":
            p.add_argument("--kn", type=float, default=None)
            p.add_argument("--z", type=float, default=None)
            p.add_argument("--slack", type=float, default=0.1)
        if name == "kn-blowup":
            p.add_argument("--z", type=float, default=0.025)
        if name == "lipschitz":
            p.add_argument("--kn", type=float, default=1.0)
        if name == "diffusion-limit":
            p.add_argument("--inflow", default="linear-x", help="constant:c or linear-x")
            p.add_argument("--sigma", default="constant:1", help="constant:c or bump")
    return parser


def _medium(args, kn: float) -> ScaledMedium:
    if args.medium == "ball-pair":
        pair = make_paper_pair(args.z, kn)
        return pair.perturbed if args.z > 0 else pair.reference
    if args.medium == "uniform":
        return ScaledMedium(MediumField(constant(1.0), name="uniform"), kn)
    path = Path(args.medium)
    if not path.exists():
        raise UsageError(f"unknown medium {args.medium!r}")
    return ScaledMedium(load_medium(path), kn)


def _emit(table: Table, out: Path | None, filename: str) -> None:
    if out is None:
        sys.stdout.write(table.to_csv())
    else:
        path = table.write(out / filename)
        log.info("wrote %s", path)


def _header(args, grid) -> dict[str, str]:
    return {"grid": grid.describe(), "tol": f"{args.tol:g}", "max_iters": str(args.max_iters),
            "scheme": SCHEME_TAG, "version": f"rtelab {__version__}"}


def cmd_solve(args) -> int:
    grid = build_grid(args.nx, args.ny or args.nx, args.ntheta)
    medium = _medium(args, args.kn)
    kind, _, arg = args.inflow.partition(":")
    if kind == "constant":
        inflow = BoundaryFlux.constant(grid, float(arg))
    elif kind == "facet":
        facet, ordinate = (int(v) for v in arg.split(","))
        pos = grid.in_lookup[facet, ordinate]
        if pos < 0:
            raise UsageError(f"facet {facet}, ordinate {ordinate} is not an inflow direction")
        inflow = BoundaryFlux.indicator(grid, int(pos))
    else:
        raise UsageError(f"unknown inflow {args.inflow!r}")
    sol = solve_transport(grid, medium, inflow, args.tol, args.max_iters)
    header = _header(args, grid) | {"medium": medium.describe(), "inflow": args.inflow,
                                    "iterations": str(sol.report.iterations),
                                    "residual": format(sol.report.residual, ".3e")}
    dens = Table("density", ["x", "y", "value"], header=header)
    xc, yc = grid.space.centers()
    for x, y, v in zip(xc.ravel(), yc.ravel(), sol.density.ravel()):
        dens.add(float(x), float(y), float(v))
    trace = Table("outflow", ["side", "cell", "ordinate", "weight", "value"], header=header)
    for k in range(len(grid.outflow)):
        idx = grid.outflow_index(k)
        trace.add(idx.facet.side_name, idx.facet.cell, idx.ordinate, idx.weight, float(sol.outflow.values[k]))
    _emit(dens, args.out, "density.csv")
    _emit(trace, args.out, "outflow.csv")
    return EXIT_OK


def cmd_albedo_norm(args) -> int:
    grid = build_grid(args.nx, args.ny or args.nx, args.ntheta)
    weights = measure_weights(grid, args.measure)
    method = args.method or "ray"
    full_needed = args.which in ("full", "residual", "diff")
    status = EXIT_OK

    def full(m):
        nonlocal status
        M = assemble_full(grid, m, args.tol, args.max_iters, strict=False)
        if np.any(M.residuals > args.tol):
            status = EXIT_NONCONVERGED
        return M

    medium = _medium(args, args.kn)
    if args.which == "full":
        M = full(medium)
    elif args.which == "ballistic":
        M = assemble_ballistic(grid, medium, method)
    elif args.which == "single":
        M = assemble_single_scattering(grid, medium, method)
    elif args.which == "residual":
        M = residual(full(medium), assemble_ballistic(grid, medium, "sweep"),
                     assemble_single_scattering(grid, medium, "sweep"))
    else:
        if args.medium != "ball-pair":
            raise UsageError("--which diff needs --medium ball-pair")
        pair = make_paper_pair(args.z, args.kn)
        ma, mb = full(pair.reference), full(pair.perturbed)
        M = replace(ma - mb, iterations=np.maximum(ma.iterations, mb.iterations),
                    residuals=np.maximum(ma.residuals, mb.residuals))
    value = operator_norm_l1(M.with_weights(*weights))
    t = Table("albedo-norm", ["kn", "z", "which", "norm", "iterations_max", "residual_max"],
              header=_header(args, grid) | {"medium": args.medium, "measure": args.measure,
                                            "method": method if not full_needed else "sweep"})
    it = int(M.iterations.max()) if M.iterations is not None else 0
    res = float(M.residuals.max()) if M.residuals is not None else 0.0
    t.add(args.kn, args.z, args.which, value, it, res)
    _emit(t, args.out, f"albedo-norm-{args.which}.csv")
    if args.dump is not None:
        rows, cols = np.nonzero(M.matrix)
        dump = Table("albedo-matrix", ["out_index", "in_index", "entry"], header=t.header)
        for i, j in zip(rows, cols):
            dump.add(int(i), int(j), float(M.matrix[i, j]))
        dump.write(args.dump)
    return status


def cmd_experiment(args) -> int:
    kw = dict(experiment=args.command, nx=args.nx, ny=args.ny or args.nx, ntheta=args.ntheta,
              tol=args.tol, max_iters=args.max_iters, measure=args.measure)
    if args.kn_list:
        kw["kn_list"] = args.kn_list
    if args.z_list:
        kw["z_list"] = args.z_list
    if args.command == "stability-check":
        kw["slack"] = args.slack
        if args.kn is not None:
            kw["kn_list"] = (args.kn,)
        if args.z is not None:
            kw["z_list"] = (args.z,)
        kw.setdefault("z_list", (0.1, 0.025))
        kw.setdefault("kn_list", (2.0, 1.0, 0.5, 0.25))
    elif args.command == "kn-blowup":
        kw["z_fixed"] = args.z
    elif args.command == "lipschitz":
        kw["kn_fixed"] = args.kn
    elif args.command == "diffusion-limit":
        kw["inflow"], kw["sigma"] = args.inflow, args.sigma
        kw.setdefault("kn_list", (0.5, 0.25, 0.125))
    cfg = ExperimentConfig(**kw)
    table, _ = run(cfg, Lab(cfg))
    _emit(table, args.out, f"{args.command}.csv")
    if args.plot:
        from .plotting import emit_plot

        out = args.out or Path(".")
        kinds = {"ballistic-decay": ["ballistic-decay", "ballistic-rest"]}.get(args.command, [args.command])
        for kind in kinds:
            if kind in ("stability-check",):
                continue
            emit_plot(table, kind, out / f"{kind}.svg")
    if has_nonconverged(table):
        log.error("sweep contains non-converged solves")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _set_workers() -> None:
    n = os.environ.get("RTELAB_WORKERS")
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _set_workers()
    handlers = {"solve": cmd_solve, "albedo-norm": cmd_albedo_norm}
    try:
        return handlers.get(args.command, cmd_experiment)(args)
    except UsageError as e:
        print(f"rtelab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, argparse.ArgumentTypeError) as e:
        print(f"rtelab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as e:
        print(f"rtelab: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
