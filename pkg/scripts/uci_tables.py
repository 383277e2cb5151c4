"""Confusion tables for WDBC and Musk under seeded 50/50 splits.

Each seed trains the Bregman solver (aggregate budget), the projected-gradient
oracle at the same budget, and a large-budget run, then scores the held-out
half. Counts are summed over seeds. ``--self-test`` adds a row trained and
scored on the full dataset, for comparison with numbers reported that way.

    python scripts/uci_tables.py --datasets wdbc,musk1,musk2 --seeds 5
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from breglr.cli import MetricsReport
from breglr.data import bag_accuracy, load_csv, normalize, split
from breglr.oracle import Budget, OracleConfig, oracle_solve
from breglr.trainer import TrainConfig, predict, train

DATA = Path(__file__).resolve().parents[1] / "data"
BUDGETS = {"wdbc": 1000.0, "musk1": 3000.0, "musk2": 3000.0}


def load(name):
    if name == "wdbc":
        return load_csv(DATA / "wdbc.csv", positive_label="M")
    return load_csv(DATA / f"{name}.csv", group_column=1)


def fit_all(tr, te, budget, large):
    trs, A = normalize(tr)
    tes, _ = normalize(te, trs.scale_record)
    keep = (trs.scale_record.intercept_index,)
    out = {}
    for method, c in (("L1LRB", budget), ("unregularized", large)):
        params, trace = train(A, TrainConfig(budget=c, budget_mode="aggregate", keep_active=keep))
        out[method] = (params.values, trace.final.loss, trace.final.active_features)
    res = oracle_solve(A, OracleConfig(Budget(radius=budget)))
    out["oracle"] = (res.lam, res.objective, int(np.count_nonzero(np.abs(res.lam) > 1e-6)))
    rows = {}
    for method, (lam, loss, active) in out.items():
        pred, _ = predict(lam, tes.features)
        rows[method] = (MetricsReport.from_predictions(method, pred, te.labels, active, loss), pred)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", default="wdbc,musk1,musk2")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--large-budget", type=float, default=1e6)
    ap.add_argument("--self-test", action="store_true")
    ap.add_argument("--out", default="runs/uci")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "tables.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "protocol", "method", "TP", "FN", "FP", "TN", "accuracy", "bag_accuracy"])
        for name in args.datasets.split(","):
            ds, budget = load(name), BUDGETS[name]
            runs = [(f"split-seed{s}", *split(ds, 0.5, s)) for s in range(args.seeds)]
            if args.self_test:
                runs.append(("self-test", ds, ds))
            totals = {}
            for protocol, tr, te in runs:
                for method, (rep, pred) in fit_all(tr, te, budget, args.large_budget).items():
                    bags = bag_accuracy(pred, te.labels, te.groups) if te.groups is not None else ""
                    w.writerow([name, protocol, method, rep.TP, rep.FN, rep.FP, rep.TN, rep.accuracy, bags])
                    if protocol != "self-test":
                        t = totals.setdefault(method, np.zeros(4, int))
                        t += (rep.TP, rep.FN, rep.FP, rep.TN)
                    else:
                        print(f"{name:>6} self-test {method:>14}: accuracy {rep.accuracy:.4f}")
            for method, (tp, fn, fp, tn) in totals.items():
                acc = (tp + tn) / (tp + fn + fp + tn)
                print(f"{name:>6} {args.seeds} splits {method:>14}: TP {tp} FN {fn} FP {fp} TN {tn}"
                      f"  accuracy {acc:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
