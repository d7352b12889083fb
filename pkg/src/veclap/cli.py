"""Command-line front end.

Subcommands:

* ``converge``: eigenvalue/eigenvector convergence study over refinement
  levels, CSV output, optional OFF mesh and MatrixMarket matrix export;
* ``solve``: one level, prints the smallest eigenvalues;
* ``area``: surface-area error study;
* ``abstract``: seeded sweep of the synthetic bound-verification suite,
  JSONL output.

Exit codes: 0 success, 2 argument/validation error, 3 numerical failure.
The ``VECLAP_THREADS`` environment variable sets worker-thread count;
outputs are byte-identical for any setting.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analysis
from .abstract_framework import sweep, write_jsonl
from .errors import InputError, NumericalError, VeclapError
from .fem import write_matrix_market
from .geometry import Sphere
from .mesh import write_off
from .runtime import THREADS_ENV

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _parse_levels(text: str) -> tuple[int, ...]:
    """Parse 'A..B' (inclusive) or a comma list like '1,2,4'."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            levels = tuple(range(int(lo), int(hi) + 1))
        else:
            levels = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise InputError(f"cannot parse levels {text!r}; expected A..B or a,b,c")
    if not levels:
        raise InputError("empty level range")
    return levels


def _parse_fields(text: str) -> tuple[str, ...]:
    if text == "all":
        return ("z", "x", "y")
    fields = tuple(text.split(","))
    for f in fields:
        if f not in ("x", "y", "z"):
            raise InputError(f"fields must be z|x|y|all, got {text!r}")
    return fields


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veclap",
        description="Penalized surface FEM for the vector-Laplace eigenproblem")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_mesh_args(p):
        p.add_argument("--kg", type=int, required=True, help="geometry degree")
        p.add_argument("--radius", type=float, default=1.0, help="sphere radius")
        p.add_argument("--jitter", type=float, default=0.3,
                       help="tangential mesh jitter (0 = symmetric icosphere)")
        p.add_argument("--mesh-seed", type=int, default=0)

    def add_fem_args(p):
        p.add_argument("--k", type=int, required=True, help="FE degree")
        p.add_argument("--num-eigs", type=int, default=6)
        p.add_argument("--eta", type=float, default=1.0,
                       help="penalty coefficient (eta = coeff / h^2)")
        p.add_argument("--method", choices=("auto", "dense", "iterative"),
                       default="auto")
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("converge", help="convergence study over levels")
    add_fem_args(p)
    add_mesh_args(p)
    p.add_argument("--levels", type=str, required=True, help="range A..B")
    p.add_argument("--fields", type=str, default="z",
                   help="Killing fields for eigenvector errors: z|x|y|all")
    p.add_argument("--out", type=str, default=None, help="CSV output path")
    p.add_argument("--export-mesh", type=str, default=None,
                   help="directory for per-level OFF meshes")
    p.add_argument("--export-matrices", type=str, default=None,
                   help="directory for per-level MatrixMarket matrices")

    p = sub.add_parser("solve", help="solve one level, print eigenvalues")
    add_fem_args(p)
    add_mesh_args(p)
    p.add_argument("--level", type=int, required=True)

    p = sub.add_parser("area", help="surface-area error study")
    add_mesh_args(p)
    p.add_argument("--levels", type=str, required=True, help="range A..B")
    p.add_argument("--quad-degree", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="CSV output path")

    p = sub.add_parser("abstract", help="synthetic bound-verification sweep")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("exact", "perturbed"), default="exact")
    p.add_argument("--out", type=str, default=None, help="JSONL output path")

    return parser


def _study_config(args) -> analysis.StudyConfig:
    return analysis.StudyConfig(
        k=args.k, k_g=args.kg, levels=_parse_levels(args.levels),
        num_eigs=args.num_eigs, eta_coeff=args.eta,
        fields=_parse_fields(args.fields), method=args.method, tol=args.tol,
        surface=Sphere(args.radius), jitter=args.jitter,
        mesh_seed=args.mesh_seed)


def _write_records(records, path) -> None:
    if path is None:
        analysis.write_csv(records, sys.stdout)
    else:
        with open(path, "w", encoding="ascii", newline="") as f:
            analysis.write_csv(records, f)


def _cmd_converge(args) -> int:
    cfg = _study_config(args)

    hook = None
    if args.export_mesh or args.export_matrices:
        if args.export_mesh:
            os.makedirs(args.export_mesh, exist_ok=True)
        if args.export_matrices:
            os.makedirs(args.export_matrices, exist_ok=True)

        def hook(level, mesh, forms):
            if args.export_mesh:
                write_off(mesh, os.path.join(args.export_mesh,
                                             f"mesh_level{level}.off"))
            if args.export_matrices:
                for name, mat in (("A", forms.A), ("B", forms.B)):
                    write_matrix_market(
                        mat,
                        os.path.join(args.export_matrices,
                                     f"{name}_level{level}.mtx"),
                        comment=f"{name}_h, level {level}, k={cfg.k}, kg={cfg.k_g}")

    records = analysis.convergence_study(cfg, on_assembled=hook)
    _write_records(records, args.out)
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg = analysis.StudyConfig(
        k=args.k, k_g=args.kg, levels=(args.level,), num_eigs=args.num_eigs,
        eta_coeff=args.eta, fields=(), method=args.method, tol=args.tol,
        surface=Sphere(args.radius), jitter=args.jitter,
        mesh_seed=args.mesh_seed)
    rec = analysis.convergence_study(cfg)[0]
    print(f"level {rec.level}: h = {rec.h:.6e}, ndof = {rec.ndof}, "
          f"solver = {rec.solver_method}")
    print(f"{'j':>3s} {'lambda_h':>24s} {'lambda_exact':>14s} {'error':>13s}")
    for j, (lam_h, lam, err) in enumerate(
            zip(rec.eigenvalues, rec.exact, rec.errors), start=1):
        print(f"{j:3d} {lam_h:24.16e} {lam:14.6g} {err:13.4e}")
    return EXIT_OK


def _cmd_area(args) -> int:
    records = analysis.area_study(
        args.kg, _parse_levels(args.levels), surface=Sphere(args.radius),
        quad_degree=args.quad_degree, jitter=args.jitter,
        mesh_seed=args.mesh_seed)
    _write_records(records, args.out)
    return EXIT_OK


def _cmd_abstract(args) -> int:
    reports = sweep(args.trials, args.seed, args.mode)
    if args.out is None:
        write_jsonl(reports, sys.stdout)
    else:
        with open(args.out, "w", encoding="ascii", newline="") as f:
            write_jsonl(reports, f)
    n_viol = sum(len(r.violations()) for r in reports)
    if n_viol:
        print(f"error: {n_viol} bound violations with hypotheses met",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


_COMMANDS = {
    "converge": _cmd_converge,
    "solve": _cmd_solve,
    "area": _cmd_area,
    "abstract": _cmd_abstract,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if os.environ.get(THREADS_ENV):
        try:
            int(os.environ[THREADS_ENV])
        except ValueError:
            print(f"error: {THREADS_ENV} must be an integer", file=sys.stderr)
            return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, VeclapError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
