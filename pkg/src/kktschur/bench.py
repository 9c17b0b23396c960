"""Benchmark rows comparing the Schur method against the generic LDL^T baseline.

Report layout (JSON, ``schema = "kktschur-bench/1"``)::

    config    presets, scales, seeds, repetitions, tol, max_refine, backend
    rows      one object per instance, see ROW_FIELDS
    totals    column sums over rows (baseline sums skip breakdown rows)
    warnings  human-readable notes, e.g. baseline breakdowns
    timing    {"speedup": ...}; wall-clock derived, excluded from determinism checks

Every per-row wall time sits under the row's ``"time"`` key; the
:func:`strip_timing` helper removes those and the top-level ``"timing"``.
"""

from __future__ import annotations

import statistics
import time

import numpy as np

from ._jit import backend_name
from .errors import BaselineBreakdown
from .generator import generate_preset
from .kernels.jacobi import inertia_oracle
from .kernels.ldlt import sparse_ldlt_baseline
from .schur import DEFAULT_MAX_ITERS, DEFAULT_TOL, PHASES, factorize_system, refine, solve_refined

SCHEMA = "kktschur-bench/1"
ORACLE_LIMIT = 300
ROW_FIELDS = ("instance", "preset", "scale", "seed", "dims", "nnz", "b_nonzero_columns",
              "factor_nnz", "flops", "residual", "refinement_iterations", "converged",
              "inertia", "baseline_status", "solution_agreement", "time")
TOTAL_FIELDS = ("rows", "factor_nnz_structured", "factor_nnz_baseline", "flops_structured",
                "flops_baseline", "refinement_iterations_structured",
                "refinement_iterations_baseline")


def _median_time(fn, repetitions):
    times, out = [], None
    for _ in range(max(1, repetitions)):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def _median_phases(system, repetitions):
    runs = [factorize_system(system) for _ in range(max(1, repetitions))]
    phases = {p: statistics.median(r.times[p] for r in runs) for p in PHASES}
    return runs[0], phases


def baseline_solve(system, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, M=None):
    """Factor the assembled matrix with the baseline and refine; returns ``(result, x, res, its)``."""
    res = sparse_ldlt_baseline(system.assembled())
    M = system.assembled_full() if M is None else M
    x, norm, its, _ = refine(res.solve, M, system.rhs, tol, max_iters)
    return res, x, norm, its


def bench_row(system, instance_id, repetitions=3, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS,
              oracle_limit=ORACLE_LIMIT, run_baseline=True):
    """Run both pipelines on one instance and collect a report row."""
    meta = system.meta
    M, t_init = _median_time(system.assembled_full, repetitions)

    f, phases = _median_phases(system, repetitions)
    rep, t_solve = _median_time(lambda: solve_refined(f, M, system.rhs, tol, max_iters), repetitions)
    s_inertia = list(rep.inertia)
    t_fact = sum(phases.values())
    times = {"structured": {"init": t_init, **phases, "factor": t_fact, "solve": t_solve,
                            "total": t_fact + t_solve}}

    row = {
        "instance": instance_id,
        "preset": meta.get("preset"),
        "scale": meta.get("scale"),
        "seed": meta.get("seed"),
        "dims": {"matrix": system.dim, "pivot": system.n_C, "schur": system.n_A,
                 "n": system.n, "m": system.m, "n_y": system.n_y},
        "nnz": {"A": system.A.nnz, "B": system.B.nnz, "C": system.pivot_matrix().nnz,
                "M": system.assembled().nnz},
        "b_nonzero_columns": int(f.b_cols.size),
        "factor_nnz": {"structured": f.nnz, "pivot": f.bt.nnz, "schur": f.s_factors.nnz,
                       "B": f.B.nnz, "baseline": None, "ratio": None},
        "flops": {**{p: f.flops[p] for p in PHASES}, "structured": f.total_flops,
                  "baseline": None, "ratio": None},
        "residual": {"structured": rep.residual, "baseline": None},
        "refinement_iterations": {"structured": rep.iterations, "baseline": None},
        "converged": {"structured": rep.converged, "baseline": None},
        "inertia": {"structured": s_inertia, "baseline": None, "oracle": None,
                    "verified": False},
        "baseline_status": "skipped",
        "solution_agreement": None,
    }

    if run_baseline:
        try:
            (b, xb, nb, ib), t_base = _median_time(
                lambda: baseline_solve(system, tol, max_iters, M), repetitions)
        except BaselineBreakdown as exc:
            row["baseline_status"] = f"breakdown at step {exc.step}"
        else:
            row["baseline_status"] = "ok"
            row["factor_nnz"]["baseline"] = b.factor_nnz
            row["factor_nnz"]["ratio"] = b.factor_nnz / f.nnz
            row["flops"]["baseline"] = b.flops
            row["flops"]["ratio"] = b.flops / f.total_flops if f.total_flops else None
            row["residual"]["baseline"] = nb
            row["refinement_iterations"]["baseline"] = ib
            row["converged"]["baseline"] = nb < tol
            row["inertia"]["baseline"] = list(b.factors.inertia)
            scale = max(float(np.max(np.abs(xb))), 1e-300)
            row["solution_agreement"] = float(np.max(np.abs(rep.x - xb))) / scale
            times["baseline"] = {"init": t_init, "factor+solve": t_base}

    if system.dim <= oracle_limit:
        oracle = list(inertia_oracle(M))
        row["inertia"]["oracle"] = oracle
        row["inertia"]["verified"] = oracle == s_inertia
    row["time"] = times
    return row, rep.x


def totals(rows):
    ok = [r for r in rows if r["baseline_status"] == "ok"]
    return {
        "rows": len(rows),
        "factor_nnz_structured": sum(r["factor_nnz"]["structured"] for r in rows),
        "factor_nnz_baseline": sum(r["factor_nnz"]["baseline"] for r in ok),
        "flops_structured": sum(r["flops"]["structured"] for r in rows),
        "flops_baseline": sum(r["flops"]["baseline"] for r in ok),
        "refinement_iterations_structured": sum(r["refinement_iterations"]["structured"] for r in rows),
        "refinement_iterations_baseline": sum(r["refinement_iterations"]["baseline"] for r in ok),
    }


def speedup(rows):
    """Baseline (factorize + solve) over structured (factorize + solve), initialization excluded."""
    ok = [r for r in rows if r["baseline_status"] == "ok"]
    if not ok:
        return None
    base = sum(r["time"]["baseline"]["factor+solve"] for r in ok)
    ours = sum(r["time"]["structured"]["total"] for r in ok)
    return base / ours if ours > 0 else None


def warm_up():
    """Compile the numba kernels outside any timed region."""
    system, _ = generate_preset("lsv-like", "tiny", seed=0)
    f = factorize_system(system)
    solve_refined(f, system.assembled_full(), system.rhs)
    baseline_solve(system)
    inertia_oracle(np.eye(2))


def run_bench(presets, scales, seeds, repetitions=3, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS,
              oracle_limit=ORACLE_LIMIT, progress=None):
    """Generate every (preset, scale, seed) instance and collect a full report."""
    warm_up()
    rows, warnings = [], []
    for preset in presets:
        for scale in scales:
            for seed in seeds:
                system, _ = generate_preset(preset, scale, seed=seed)
                iid = f"{preset}/{scale}/seed{seed}"
                row, _ = bench_row(system, iid, repetitions, tol, max_iters, oracle_limit)
                if row["baseline_status"] not in ("ok", "skipped"):
                    warnings.append(f"{iid}: baseline {row['baseline_status']}; excluded from speedup")
                rows.append(row)
                if progress is not None:
                    progress(row)
    return {
        "schema": SCHEMA,
        "config": {"presets": list(presets), "scales": list(scales), "seeds": list(seeds),
                   "repetitions": int(repetitions), "tol": tol, "max_refine": int(max_iters),
                   "backend": backend_name()},
        "rows": rows,
        "totals": totals(rows),
        "warnings": warnings,
        "timing": {"speedup": speedup(rows)},
    }


def strip_timing(report):
    """Copy of ``report`` without wall-clock fields."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k not in ("time", "timing")}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report


def _fmt(v, spec):
    return "-" if v is None else format(v, spec)


def format_table(report):
    """Aligned text table, one line per row plus totals."""
    head = (f"{'instance':<26} {'dim':>5} {'piv':>5} {'schur':>5} {'nnz S':>9} {'nnz base':>9} "
            f"{'ratio':>6} {'resid':>8} {'it':>3} {'inertia':>15} {'ok':>3}")
    lines = [head, "-" * len(head)]
    for r in report["rows"]:
        ine = "({},{},{})".format(*r["inertia"]["structured"])
        ver = "yes" if r["inertia"]["verified"] else ("-" if r["inertia"]["oracle"] is None else "NO")
        lines.append(
            f"{r['instance']:<26} {r['dims']['matrix']:>5} {r['dims']['pivot']:>5} "
            f"{r['dims']['schur']:>5} {r['factor_nnz']['structured']:>9} "
            f"{_fmt(r['factor_nnz']['baseline'], 'd'):>9} {_fmt(r['factor_nnz']['ratio'], '.2f'):>6} "
            f"{r['residual']['structured']:>8.1e} {r['refinement_iterations']['structured']:>3} "
            f"{ine:>15} {ver:>3}")
    t = report["totals"]
    lines.append("-" * len(head))
    lines.append(f"{'total':<26} {'':>5} {'':>5} {'':>5} {t['factor_nnz_structured']:>9} "
                 f"{t['factor_nnz_baseline']:>9}")
    sp = report.get("timing", {}).get("speedup")
    if sp is not None:
        lines.append(f"speedup (factorize + solve, init excluded): {sp:.2f}x")
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines)
