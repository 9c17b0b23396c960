"""Time the numba kernels against their numpy fallbacks on generated instances.

    python benchmarks/bench_kernels.py --scale small --repetitions 3

Each kernel runs once per backend before timing so compilation is excluded.
Both backends must produce the same inertia; the script exits 1 otherwise.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from kktschur._jit import HAVE_NUMBA
from kktschur.generator import PRESETS, SCALES, generate_preset
from kktschur.kernels.jacobi import inertia_oracle, jacobi_eigenvalues
from kktschur.kernels.ldlt import bunch_kaufman, sparse_ldlt_baseline


def median_time(fn, repetitions):
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def kernels(system, jacobi_limit):
    M = system.assembled()
    dense = M.to_dense()
    jobs = {
        "bunch-kaufman (dense M)": (lambda nb: bunch_kaufman(dense, use_numba=nb),
                                    lambda r: tuple(r.inertia)),
        "baseline LDL^T (sparse M)": (lambda nb: sparse_ldlt_baseline(M, use_numba=nb),
                                      lambda r: tuple(r.factors.inertia)),
    }
    if system.dim <= jacobi_limit:
        jobs["jacobi oracle"] = (lambda nb: inertia_oracle(dense, use_numba=nb), tuple)
    return jobs


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--preset", choices=sorted(PRESETS), action="append")
    p.add_argument("--scale", choices=SCALES, default="tiny")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--jacobi-limit", type=int, default=300,
                   help="skip the Jacobi oracle above this dimension")
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    # compile once outside the timed region
    warm = np.array([[2.0, 1.0], [1.0, -3.0]])
    bunch_kaufman(warm, use_numba=True)
    jacobi_eigenvalues(warm, use_numba=True)

    ok = True
    print(f"{'instance':<24} {'kernel':<26} {'dim':>5} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for preset in args.preset or sorted(PRESETS):
        system, _ = generate_preset(preset, args.scale, seed=args.seed)
        for name, (run, key) in kernels(system, args.jacobi_limit).items():
            run(True)
            r_np, t_np = median_time(lambda: run(False), args.repetitions)
            r_nb, t_nb = median_time(lambda: run(True), args.repetitions)
            same = key(r_np) == key(r_nb)
            ok &= same
            flag = "" if same else "  inertia differs"
            print(f"{preset + '/' + args.scale:<24} {name:<26} {system.dim:>5} "
                  f"{t_np:>9.4f} {t_nb:>9.4f} {t_np / t_nb:>7.1f}x{flag}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
