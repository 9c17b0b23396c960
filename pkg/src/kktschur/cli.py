"""Command-line driver: generate, solve, analyze, bench.

Exit codes: 0 success, 2 structural error, 3 numeric breakdown (including
refinement that did not reach the tolerance), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bench import baseline_solve, format_table, run_bench
from .errors import (BaselineBreakdown, InvalidPivotError, ParameterError, SingularBlockError,
                     StructuralError)
from .generator import PRESETS, SCALES, generate_preset, read_instance, write_instance
from .mmio import read_matrix_market
from .schur import DEFAULT_MAX_ITERS, DEFAULT_TOL, factorize_system, solve_refined
from .sparse import SymmetricSparse
from .structure import (BlockStructure, find_btf, is_irreducible, maximum_matching,
                        symbolic_fill_1x1, symbolic_fill_2x2)

EXIT_OK, EXIT_STRUCTURAL, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(text)


def cmd_generate(args):
    system, _ = generate_preset(args.preset, args.scale, seed=args.seed, convex=args.convex)
    out = args.out or f"{args.preset}-{args.scale}-seed{args.seed}"
    try:
        paths = write_instance(system, out)
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot write instance to {out}: {exc}") from exc
    payload = {"out": out, "files": [os.path.basename(p) for p in paths],
               "dims": {"matrix": system.dim, "pivot": system.n_C, "schur": system.n_A,
                        "n": system.n, "m": system.m}}
    _emit(args, payload, f"wrote {len(paths)} files to {out} "
                         f"(dim {system.dim}, pivot {system.n_C}, schur {system.n_A})")
    return EXIT_OK


def _load_instance(path):
    try:
        system = read_instance(path)
        M = read_matrix_market(os.path.join(path, "M.mtx"))
    except (OSError, ValueError, KeyError) as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read instance {path}: {exc}") from exc
    return system, M


def cmd_solve(args):
    system, M = _load_instance(args.instance)
    M_full = M.full() if isinstance(M, SymmetricSparse) else M
    if args.method == "schur":
        f = factorize_system(system)
        rep = solve_refined(f, M_full, system.rhs, args.tol, args.max_refine)
        x, res, its, conv = rep.x, rep.residual, rep.iterations, rep.converged
        inertia = list(rep.inertia)
        extra = {"factor_nnz": f.nnz, "flops": f.flops}
    else:
        b, x, res, its = baseline_solve(system, args.tol, args.max_refine, M_full)
        conv = res < args.tol
        inertia = list(b.factors.inertia)
        extra = {"factor_nnz": b.factor_nnz, "flops": {"baseline": b.flops}}
    out = args.out or os.path.join(args.instance, f"solution-{args.method}.txt")
    try:
        np.savetxt(out, x, fmt="%.17g")
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot write solution to {out}: {exc}") from exc
    err = float(np.max(np.abs(x - system.x_true))) if system.x_true.size else None
    payload = {"instance": args.instance, "method": args.method, "residual": res,
               "refinement_iterations": its, "converged": conv, "inertia": inertia,
               "error_vs_x_true": err, "solution": out, **extra}
    if not conv:
        payload["error"] = {"type": "numeric", "message": "refinement did not reach tolerance"}
    _emit(args, payload,
          f"{args.method}: residual {res:.3e} after {its} refinement steps, "
          f"inertia ({inertia[0]}, {inertia[1]}, {inertia[2]}), solution in {out}")
    return EXIT_OK if conv else EXIT_NUMERIC


def _parse_pivot(text):
    parts = [int(p) - 1 for p in text.split(",")]
    if len(parts) not in (1, 2) or min(parts) < 0:
        raise argparse.ArgumentTypeError(f"bad pivot {text!r}; use i or i,j (1-based)")
    return tuple(parts)


def _parse_sizes(text):
    return [int(s) for s in text.split(",")]


def cmd_analyze(args):
    try:
        m = read_matrix_market(args.matrix)
    except (OSError, ValueError) as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {args.matrix}: {exc}") from exc
    full = m.full() if isinstance(m, SymmetricSparse) else m
    if full.nrows != full.ncols:
        raise CLIError(EXIT_STRUCTURAL, "structural", "analysis needs a square matrix")
    match = maximum_matching(full)
    report = {"file": args.matrix, "dim": full.nrows, "nnz": full.nnz,
              "structural_rank": int(match.size), "btf_blocks": None, "irreducible": None,
              "fill": []}
    lines = [f"{args.matrix}: dim {full.nrows}, nnz {full.nnz}, structural rank {match.size}"]
    structure = None
    if match.perfect:
        _, _, structure = find_btf(full)
        sizes = [int(s) for s in structure.sizes]
        report["btf_blocks"] = sizes
        report["irreducible"] = bool(is_irreducible(full))
        verdict = "irreducible" if report["irreducible"] else "reducible"
        lines.append(f"block triangular form: {len(sizes)} blocks, sizes {sizes}; {verdict}")
    else:
        lines.append(f"structurally singular (deficiency {match.deficiency}); no block triangular form")
    if args.pivot:
        if not isinstance(m, SymmetricSparse):
            m = SymmetricSparse.from_full(full)
        part = BlockStructure.from_sizes(args.blocks) if args.blocks else None
        if part is not None and part.dim != full.nrows:
            raise CLIError(EXIT_STRUCTURAL, "structural", "--blocks sizes do not sum to the dimension")
        diag = None
        if part is not None:
            diag = [(np.arange(*part.block_range(i)),) * 2 for i in range(part.nblocks)]
        for piv in args.pivot:
            try:
                fr = (symbolic_fill_1x1(m, piv[0], diag) if len(piv) == 1
                      else symbolic_fill_2x2(m, piv, diag))
            except InvalidPivotError as exc:
                raise CLIError(EXIT_STRUCTURAL, "structural", str(exc)) from exc
            entry = {"pivot": [p + 1 for p in piv], **fr.to_json()}
            entry["fill"] = [[i + 1, j + 1] for i, j in entry["fill"]]
            if part is not None:
                blocks = sorted({(int(part.block_of(i)), int(part.block_of(j))) for i, j in fr.fill})
                entry["blocks"] = [[a + 1, b + 1] for a, b in blocks]
            report["fill"].append(entry)
            where = f", blocks {entry.get('blocks')}" if part is not None else ""
            lines.append(f"pivot {entry['pivot']}: {fr.count} fill entries{where}")
    _emit(args, report, "\n".join(lines))
    return EXIT_OK


def cmd_bench(args):
    presets = args.preset or ["mnist-like", "scopf-like", "lsv-like"]
    scales = args.scale or ["tiny"]
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = run_bench(presets, scales, seeds, args.repetitions, args.tol, args.max_refine,
                       args.oracle_limit)
    if args.out:
        try:
            with open(args.out, "w", encoding="ascii") as fh:
                json.dump(report, fh, indent=1, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise CLIError(EXIT_IO, "io", f"cannot write report to {args.out}: {exc}") from exc
    if args.json:
        print(json.dumps(report, indent=1, sort_keys=True))
    else:
        print(format_table(report))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="kktschur",
                                description="Schur-complement KKT solver for neural-network constrained problems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic instance directory")
    g.add_argument("--preset", choices=sorted(PRESETS), default="mnist-like")
    g.add_argument("--scale", choices=SCALES, default="tiny")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--convex", action="store_true", help="diagonally dominant Hessian blocks")
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="factorize and solve an instance")
    s.add_argument("instance", help="instance directory")
    s.add_argument("--method", choices=("schur", "baseline"), default="schur")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-refine", type=int, default=DEFAULT_MAX_ITERS)
    s.add_argument("--out", help="solution file (default: inside the instance directory)")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("analyze", parents=[common], help="structural report for a matrix file")
    a.add_argument("matrix", help="Matrix Market file")
    a.add_argument("--pivot", type=_parse_pivot, action="append",
                   help="symbolic pivot, i or i,j (1-based); repeatable")
    a.add_argument("--blocks", type=_parse_sizes, help="comma-separated block sizes for fill accounting")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bench", parents=[common], help="compare against the baseline LDL^T")
    b.add_argument("--preset", choices=sorted(PRESETS), action="append")
    b.add_argument("--scale", choices=SCALES, action="append")
    b.add_argument("--seed", type=int, default=0, help="first seed")
    b.add_argument("--seeds", type=int, default=3, help="number of seeds per preset")
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--tol", type=float, default=DEFAULT_TOL)
    b.add_argument("--max-refine", type=int, default=DEFAULT_MAX_ITERS)
    b.add_argument("--oracle-limit", type=int, default=300,
                   help="largest dimension checked against the Jacobi inertia oracle")
    b.add_argument("--out", help="write the JSON report here")
    b.set_defaults(func=cmd_bench)
    return p


def _fail(args, code, kind, message):
    if getattr(args, "json", False):
        print(json.dumps({"error": {"type": kind, "message": message}}))
    else:
        print(f"error: {message}", file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        return _fail(args, exc.code, exc.kind, str(exc))
    except StructuralError as exc:
        return _fail(args, EXIT_STRUCTURAL, "structural", str(exc))
    except (SingularBlockError, BaselineBreakdown, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(args, EXIT_NUMERIC, "numeric", str(exc))
    except ParameterError as exc:
        return _fail(args, EXIT_STRUCTURAL, "parameter", str(exc))
    except OSError as exc:
        return _fail(args, EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
