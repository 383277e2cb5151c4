"""Command line: ``breglr {train,eval,bench,synth}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure or
non-convergence.  ``BREGLR_LOG_LEVEL`` sets verbosity (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .barrier import BarrierConfig
from .data import DataError, Dataset, ScaleRecord, bag_accuracy, load_csv, normalize, save_csv, split, synth_hyperplane
from .oracle import Budget, OracleConfig, oracle_solve
from .trainer import BUDGET_MODES, TrainConfig, TrainingError, predict, train

log = logging.getLogger("breglr")

MODEL_FORMAT = "breglr-model"
MODEL_VERSION = 1
TRACE_COLUMNS = ("iter", "loss", "train_err", "test_err", "active_features", "max_abs_delta")
METRIC_COLUMNS = ("method", "TP", "FN", "FP", "TN", "accuracy", "active_features", "final_loss")
LARGE_BUDGET = 1e6

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class MetricsReport:
    method: str
    TP: int
    FN: int
    FP: int
    TN: int
    accuracy: float
    active_features: int
    final_loss: float

    def __post_init__(self):
        counts = (self.TP, self.FN, self.FP, self.TN)
        if min(counts) < 0:
            raise ValueError("confusion counts must be nonnegative")
        total = sum(counts)
        if total and abs(self.accuracy - (self.TP + self.TN) / total) > 1e-12:
            raise ValueError("accuracy disagrees with the confusion counts")

    @property
    def total(self) -> int:
        return self.TP + self.FN + self.FP + self.TN

    @classmethod
    def from_predictions(cls, method, pred, labels, active_features, final_loss):
        pred = np.asarray(pred)
        labels = np.asarray(labels)
        tp = int(np.sum((pred > 0) & (labels > 0)))
        fn = int(np.sum((pred < 0) & (labels > 0)))
        fp = int(np.sum((pred > 0) & (labels < 0)))
        tn = int(np.sum((pred < 0) & (labels < 0)))
        total = tp + fn + fp + tn
        acc = (tp + tn) / total if total else float("nan")
        return cls(method, tp, fn, fp, tn, acc, int(active_features), float(final_loss))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _data_args(p, required=True):
    # eval leaves these unset so the values stored with the model apply
    dflt = (lambda v: v) if required else (lambda v: None)
    p.add_argument("--data", required=required, help="CSV file")
    p.add_argument("--label-col", type=int, default=dflt(0))
    p.add_argument("--positive-label", default=None,
                   help="label token mapped to +1 (numeric 0/1 or -1/+1 labels need none)")
    p.add_argument("--group-col", type=int, default=None,
                   help="bag id column; excluded from features, used for bag-level accuracy")
    p.add_argument("--test-fraction", type=float, default=dflt(0.5))
    p.add_argument("--seed", type=int, default=dflt(0))


def _solver_args(p):
    p.add_argument("--budget", type=_positive(float), default=10.0)
    p.add_argument("--budget-mode", choices=BUDGET_MODES, default="per-coord")
    p.add_argument("--mu0", type=_positive(float), default=1.0)
    p.add_argument("--mu-shrink", type=float, default=0.2)
    p.add_argument("--tol", type=_positive(float), default=1e-8,
                   help="absolute loss-decrease tolerance of the outer loop")
    p.add_argument("--tol-kkt", type=_positive(float), default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--drop-threshold", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="breglr", description="Budget-constrained logistic regression by Bregman auxiliary descent.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model; writes model.json and trace.csv")
    _data_args(p)
    _solver_args(p)
    p.add_argument("--no-split", action="store_true", help="train on every row")
    p.add_argument("--out", default="out")

    p = sub.add_parser("eval", help="score a saved model; writes metrics.csv")
    p.add_argument("--model", required=True)
    _data_args(p, required=False)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--out", default="out")

    p = sub.add_parser("bench", help="L1LRB vs oracle vs large budget on one split")
    _data_args(p)
    _solver_args(p)
    p.add_argument("--large-budget", type=_positive(float), default=LARGE_BUDGET)
    p.add_argument("--out", default="out")

    p = sub.add_parser("synth", help="noisy-hyperplane experiment; writes data and curves")
    p.add_argument("--dim", type=int, default=500)
    p.add_argument("--m-train", type=int, default=200)
    p.add_argument("--m-test", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--n-informative", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    _solver_args(p)
    p.set_defaults(budget_mode="aggregate", budget=30.0)
    p.add_argument("--large-budget", type=_positive(float), default=LARGE_BUDGET)
    p.add_argument("--out", default="out")
    return ap


def _train_config(args, budget=None, mode=None, keep=()):
    if not 0 < args.mu_shrink < 1:
        raise UsageError("--mu-shrink must lie in (0, 1)")
    if args.max_iter < 0 or args.drop_threshold < 0:
        raise UsageError("--max-iter and --drop-threshold must be nonnegative")
    barrier = BarrierConfig(mu0=args.mu0, mu_shrink=args.mu_shrink, tol_kkt=args.tol_kkt)
    return TrainConfig(budget=budget or args.budget, budget_mode=mode or args.budget_mode,
                       barrier=barrier, tol_abs=args.tol, max_outer=args.max_iter,
                       drop_threshold=args.drop_threshold, keep_active=keep)


def _load(args) -> Dataset:
    if not Path(args.data).is_file():
        raise DataError(f"no such file: {args.data}")
    ds = load_csv(args.data, args.label_col, args.positive_label, args.group_col)
    if ds.n_rejected:
        log.warning("%s: %d row(s) rejected", args.data, ds.n_rejected)
    if ds.n_features == 0:
        raise DataError(f"{args.data} has no features")
    return ds


def _split(ds, args, no_split=False):
    if no_split:
        return ds, None
    if not 0 < args.test_fraction < 1:
        raise UsageError("--test-fraction must lie strictly between 0 and 1")
    return split(ds, args.test_fraction, args.seed)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in trace.rows:
            w.writerow([r.iteration, _fmt(r.loss), _fmt(r.train_err), _fmt(r.test_err),
                        r.active_features, _fmt(r.max_abs_delta)])


def write_metrics(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for m in reports:
            w.writerow([_fmt(getattr(m, c)) for c in METRIC_COLUMNS])


def save_model(path, params, record: ScaleRecord, meta: dict):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "lam": [float(v) for v in params.values],
        "active": [bool(a) for a in params.active],
        "scale": {
            "lo": record.lo.tolist(), "hi": record.hi.tolist(),
            "constant": record.constant.tolist(),
            "intercept": record.intercept, "mode": record.mode,
        },
        **meta,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise DataError(f"{path} is not a {MODEL_FORMAT} v{MODEL_VERSION} file")
    s = doc["scale"]
    record = ScaleRecord(np.array(s["lo"], float), np.array(s["hi"], float),
                         np.array(s["constant"], bool), s["intercept"], s["mode"])
    return np.array(doc["lam"], float), record, doc


def _fit(train_ds, test_ds, cfg_fn):
    """Scale, train, and return (params, trace, scaled train, scaled test)."""
    trs, A = normalize(train_ds)
    tes = normalize(test_ds, trs.scale_record)[0] if test_ds is not None else None
    cfg = cfg_fn(trs.scale_record.intercept_index)
    params, trace = train(A, cfg, test_features=None if tes is None else tes.features,
                          test_labels=None if tes is None else tes.labels)
    if trace.stop_reason == "max_outer":
        log.warning("iteration cap %d reached before the loss settled", cfg.max_outer)
    return params, trace, trs, tes, A


def cmd_train(args) -> int:
    ds = _load(args)
    tr, te = _split(ds, args, args.no_split)
    params, trace, trs, _, _ = _fit(tr, te, lambda i: _train_config(args, keep=(i,)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / "trace.csv")
    meta = {
        "feature_names": list(trs.feature_names),
        "label_col": args.label_col, "positive_label": args.positive_label,
        "group_col": args.group_col, "test_fraction": args.test_fraction, "seed": args.seed,
        "budget": args.budget, "budget_mode": args.budget_mode,
        "stop_reason": trace.stop_reason, "final_loss": trace.final.loss,
    }
    save_model(out / "model.json", params, trs.scale_record, meta)
    f = trace.final
    print(f"{trace.stop_reason} after {f.iteration} iterations: loss {f.loss:.6g}, "
          f"train error {f.train_err:.4f}, test error {f.test_err:.4f}, active {f.active_features}")
    return EXIT_OK


def cmd_eval(args) -> int:
    lam, record, doc = load_model(args.model)
    for key, fallback in EVAL_FALLBACK.items():
        if getattr(args, key) is None:
            setattr(args, key, doc.get(key, fallback))
    if args.data is None:
        raise UsageError("--data is required")
    ds = _load(args)
    if args.split == "all":
        part = ds
    else:
        tr, te = _split(ds, args)
        part = tr if args.split == "train" else te
    h = record.transform(part.features)
    pred, _ = predict(lam, h)
    margin = (h @ lam) * part.labels
    loss = float(np.sum(np.logaddexp(0.0, -margin)))
    rep = MetricsReport.from_predictions("L1LRB", pred, part.labels,
                                         int(np.count_nonzero(doc["active"])), loss)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics([rep], out / "metrics.csv")
    msg = f"{args.split}: accuracy {rep.accuracy:.4f} (TP {rep.TP} FN {rep.FN} FP {rep.FP} TN {rep.TN})"
    if part.groups is not None:
        msg += f", bag accuracy {bag_accuracy(pred, part.labels, part.groups):.4f}"
    print(msg)
    return EXIT_OK


EVAL_FALLBACK = {"label_col": 0, "positive_label": None, "group_col": None,
                 "test_fraction": 0.5, "seed": 0}


def _curves(traces: dict, path):
    keys = list(traces)
    n = max(len(t.rows) for t in traces.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter"] + [f"{k}_{c}" for k in keys for c in ("loss", "train_err", "test_err", "active_features")])
        for i in range(n):
            row = [i]
            for k in keys:
                rows = traces[k].rows
                r = rows[min(i, len(rows) - 1)]
                row += [_fmt(r.loss), _fmt(r.train_err), _fmt(r.test_err), r.active_features]
            w.writerow(row)


def _score(method, lam, tes, loss, active):
    pred, _ = predict(lam, tes.features)
    return MetricsReport.from_predictions(method, pred, tes.labels, active, loss), pred


def cmd_bench(args) -> int:
    ds = _load(args)
    tr, te = _split(ds, args)
    return _bench(args, tr, te, Path(args.out))


def _bench(args, tr, te, out: Path, with_oracle=True) -> int:
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    params, trace, trs, tes, A = _fit(tr, te, lambda i: _train_config(args, keep=(i,)))
    big, big_trace, *_ = _fit(tr, te, lambda i: _train_config(args, budget=args.large_budget, keep=(i,)))
    rep, pred = _score("L1LRB", params.values, tes, trace.final.loss, trace.final.active_features)
    reports = [rep]
    if with_oracle:
        budget = (Budget(radius=args.budget) if args.budget_mode == "aggregate"
                  else Budget(box=np.full(A.n_features, args.budget / A.n_features)))
        res = oracle_solve(A, OracleConfig(budget))
        if not res.converged:
            log.error("oracle stopped at projected-gradient norm %.3g", res.pg_norm)
            status = EXIT_NUMERIC
        reports.append(_score("oracle", res.lam, tes, res.objective,
                              int(np.count_nonzero(np.abs(res.lam) > args.drop_threshold)))[0])
    reports.append(_score("unregularized", big.values, tes, big_trace.final.loss,
                          big_trace.final.active_features)[0])
    write_metrics(reports, out / "metrics.csv")
    _curves({"L1LRB": trace, "unregularized": big_trace}, out / "curves.csv")
    for r in reports:
        print(f"{r.method:>14}: accuracy {r.accuracy:.4f}  TP {r.TP} FN {r.FN} FP {r.FP} TN {r.TN}  "
              f"active {r.active_features}  loss {r.final_loss:.6g}")
    if te.groups is not None:
        print(f"bag-level accuracy (L1LRB): {bag_accuracy(pred, te.labels, te.groups):.4f}")
    return status


def cmd_synth(args) -> int:
    try:
        tr, te = synth_hyperplane(args.dim, args.m_train, args.m_test, args.noise, args.seed,
                                  args.n_informative)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(tr, out / "train.csv")
    save_csv(te, out / "test.csv")
    return _bench(args, tr, te, out, with_oracle=False)


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    level = os.environ.get("BREGLR_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"breglr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"breglr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, np.linalg.LinAlgError) as exc:
        print(f"breglr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"breglr: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
