"""Time the numba and pure-numpy backends on the same replay workload.

Each backend runs in its own interpreter because the backend is fixed at
import time. Prints one ``key=value`` line per (backend, workload).

    python benchmarks/bench_backends.py --n 5528 --runs 5
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from warfarin_bandits import BACKEND, kernels
from warfarin_bandits.dataset import WarfarinDataset, generate_synthetic_records
from warfarin_bandits.evaluation import fit_oracle, run_experiment
from warfarin_bandits.policies import PolicySpec
from warfarin_bandits.reward import standard_table

n, runs, reps = (int(a) for a in sys.argv[1:4])
out = {}

rng = np.random.default_rng(0)
X = rng.normal(size=(reps, 26))
A_inv = np.eye(26)
kernels.sherman_morrison(A_inv.copy(), X[0])  # compile outside the timer
t = time.perf_counter()
for x in X:
    kernels.sherman_morrison(A_inv, x)
out["sherman_morrison_us"] = 1e6 * (time.perf_counter() - t) / reps

b = np.zeros((3, 26))
A3 = np.tile(np.eye(26), (3, 1, 1))
kernels.ucb_scores(A3, b, X[0], 1.0)
t = time.perf_counter()
for x in X:
    kernels.ucb_scores(A3, b, x, 1.0)
out["ucb_scores_us"] = 1e6 * (time.perf_counter() - t) / reps

gram = np.eye(26) + X[:100].T @ X[:100]
kernels.cholesky(gram)
t = time.perf_counter()
for _ in range(reps // 10):
    L, _s = kernels.cholesky(gram)
    kernels.cholesky_solve(L, X[0])
out["cholesky_solve_us"] = 1e6 * (time.perf_counter() - t) / (reps // 10)

ds = WarfarinDataset.from_records(generate_synthetic_records(n, 0, noise_sd=6.0))
table = standard_table()
oracle = fit_oracle(ds.X, ds.buckets, table)
for kind in ("linucb", "regression"):
    t = time.perf_counter()
    run_experiment(lambda: PolicySpec(kind).build(), ds, table, oracle, n_runs=runs, policy_name=kind)
    out[f"{kind}_replay_s"] = time.perf_counter() - t
print(json.dumps({"backend": BACKEND, **out}))
"""


def run_backend(backend, n, runs, reps):
    env = dict(os.environ, WARFARIN_BANDITS_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(n), str(runs), str(reps)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=5528, help="synthetic patients per episode")
    p.add_argument("--runs", type=int, default=5, help="shuffles per policy")
    p.add_argument("--reps", type=int, default=20000, help="calls per kernel micro-benchmark")
    p.add_argument("--backends", default="numba,numpy")
    args = p.parse_args(argv)

    results = {}
    for backend in args.backends.split(","):
        try:
            results[backend] = run_backend(backend, args.n, args.runs, args.reps)
        except subprocess.CalledProcessError as exc:
            print(f"backend={backend} status=unavailable detail={exc.stderr.strip().splitlines()[-1]!r}")
            continue
        r = results[backend]
        print(" ".join([f"backend={backend}", f"n={args.n}", f"runs={args.runs}"]
                       + [f"{k}={v:.4g}" for k, v in r.items() if k != "backend"]))
    if {"numba", "numpy"} <= results.keys():
        fast, slow = results["numba"], results["numpy"]
        print(" ".join(["speedup"] + [f"{k}={slow[k] / fast[k]:.2f}x" for k in fast if k != "backend"]))


if __name__ == "__main__":
    main()
