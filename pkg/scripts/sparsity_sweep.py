"""Budget sweep on the sparse synthetic problem.

For each seed and budget, trains in aggregate mode on 500-D data with a few
informative directions and records held-out error and the surviving feature
count. Writes two CSVs under --out:

    sweep.csv    seed, budget, test_err, train_err, active_features, iterations
    active.csv   seed, budget, iter, active_features   (the dropping curve)

    python scripts/sparsity_sweep.py --seeds 3 --budgets 3,10,30,100,1e6
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from breglr.data import normalize, synth_hyperplane
from breglr.trainer import TrainConfig, predict, train


def run(seed, budget, args):
    tr, te = synth_hyperplane(args.dim, args.m_train, args.m_test, args.noise, seed, args.n_informative)
    trs, A = normalize(tr)
    tes, _ = normalize(te, trs.scale_record)
    cfg = TrainConfig(budget=budget, budget_mode="aggregate", max_outer=args.max_iter,
                      keep_active=(trs.scale_record.intercept_index,))
    params, trace = train(A, cfg)
    label, _ = predict(params, tes.features)
    return float(np.mean(label != te.labels)), trace


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--budgets", default="3,10,30,100,1e6")
    ap.add_argument("--dim", type=int, default=500)
    ap.add_argument("--n-informative", type=int, default=10)
    ap.add_argument("--m-train", type=int, default=200)
    ap.add_argument("--m-test", type=int, default=1000)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--max-iter", type=int, default=500)
    ap.add_argument("--out", default="runs/sparsity")
    args = ap.parse_args(argv)
    budgets = [float(b) for b in args.budgets.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "sweep.csv", "w", newline="") as fs, open(out / "active.csv", "w", newline="") as fa:
        sweep, active = csv.writer(fs), csv.writer(fa)
        sweep.writerow(["seed", "budget", "test_err", "train_err", "active_features", "iterations"])
        active.writerow(["seed", "budget", "iter", "active_features"])
        for seed in range(args.seeds):
            for c in budgets:
                t0 = time.perf_counter()
                err, trace = run(seed, c, args)
                last = trace.final
                sweep.writerow([seed, c, err, last.train_err, last.active_features, last.iteration])
                active.writerows([seed, c, r.iteration, r.active_features] for r in trace.rows)
                print(f"seed {seed} budget {c:g}: test err {err:.3f}  active {last.active_features}"
                      f"  iters {last.iteration}  {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
