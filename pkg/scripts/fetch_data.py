"""Populate data/ with the WDBC and Musk (Clean 1 and 2) datasets.

WDBC ships with scikit-learn. The Musk tables are pulled out of the ``mil``
wheel on PyPI, which bundles the UCI files as ``label,molecule,f1..f166``.

    python scripts/fetch_data.py [--out data]
"""
import argparse
import csv
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MIL_WHEEL = "mil==1.0.5"


def write_wdbc(out: Path) -> None:
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    # sklearn encodes malignant as 0
    diagnosis = ["M" if t == 0 else "B" for t in bunch.target]
    with open(out / "wdbc.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["diagnosis", *[n.replace(" ", "_") for n in bunch.feature_names]])
        for tag, row in zip(diagnosis, bunch.data):
            w.writerow([tag, *[repr(float(x)) for x in row]])


def write_musk(out: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, MIL_WHEEL],
            check=True,
        )
        wheel = next(Path(tmp).glob("mil-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            for name in ("musk1", "musk2"):
                raw = zf.read(f"mil/data/datasets/csv/{name}.csv")
                (out / f"{name}.csv").write_bytes(raw)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    ap.add_argument("--skip-musk", action="store_true")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_wdbc(out)
    if not args.skip_musk:
        write_musk(out)
    for p in sorted(out.glob("*.csv")):
        print(p, sum(1 for _ in open(p)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
