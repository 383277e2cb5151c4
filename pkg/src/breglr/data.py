"""Dataset ingestion, scaling into the normalized constraint form, splits and
synthetic noisy-hyperplane data.

Scaling maps every raw feature affinely onto [-1, 1] using the training
min/max, appends a constant intercept feature and divides everything by
``n + 1`` so each example's absolute feature sum is at most one.  The record
of that map travels with the scaled dataset and is reused verbatim on test
data.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .bregman import ConstraintMatrix

log = logging.getLogger(__name__)

SCALE_MODES = ("uniform", "exact")


class DataError(ValueError):
    """Input data is unreadable or violates the ingestion contract."""


def _frozen(x, dtype=float):
    if x is None:
        return None
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    feature_names: tuple = ()
    groups: np.ndarray | None = None
    scale_record: "ScaleRecord | None" = None
    n_rejected: int = 0

    def __post_init__(self):
        x = _frozen(self.features)
        y = _frozen(self.labels)
        if x.ndim != 2:
            raise DataError("features must be a 2-D (examples x features) array")
        if y.shape != (x.shape[0],):
            raise DataError(f"{y.size} labels for {x.shape[0]} examples")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain missing or non-finite values")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.groups is not None:
            g = _frozen(self.groups, dtype=object)
            if g.shape != y.shape:
                raise DataError("one group id per example is required")
            object.__setattr__(self, "groups", g)

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.labels > 0))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        groups = None if self.groups is None else self.groups[idx]
        return replace(self, features=self.features[idx], labels=self.labels[idx],
                       groups=groups, n_rejected=0)


@dataclass(frozen=True, eq=False)
class ScaleRecord:
    """Affine per-feature map fitted on training data.

    ``x -> (2 (x - lo) / (hi - lo) - 1) / (n + 1)`` for non-constant
    features; constant features map to 0.  With ``intercept`` a column of
    ``1 / (n + 1)`` is appended last.  In ``exact`` mode each example is
    divided by its own absolute sum instead of ``n + 1``.
    """

    lo: np.ndarray
    hi: np.ndarray
    constant: np.ndarray
    intercept: bool = True
    mode: str = "uniform"

    def __post_init__(self):
        if self.mode not in SCALE_MODES:
            raise ValueError(f"scale mode must be one of {SCALE_MODES}")
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        object.__setattr__(self, "constant", _frozen(self.constant, dtype=bool))

    @classmethod
    def fit(cls, features, intercept=True, mode="uniform") -> "ScaleRecord":
        x = np.asarray(features, dtype=float)
        if x.ndim != 2 or x.shape[1] == 0:
            raise DataError("need at least one feature to scale")
        if x.shape[0] == 0:
            raise DataError("need at least one example to fit the scaling")
        lo, hi = x.min(axis=0), x.max(axis=0)
        # a subnormal span cannot be inverted safely; treat it as constant
        flat = (hi - lo) < np.finfo(float).tiny
        return cls(lo, hi, flat, intercept, mode)

    @property
    def n_raw(self) -> int:
        return self.lo.size

    @property
    def n_scaled(self) -> int:
        return self.n_raw + int(self.intercept)

    @property
    def divisor(self) -> float:
        # n + 1 whether or not the intercept column is present
        return float(self.n_raw + 1)

    @property
    def intercept_index(self) -> int | None:
        return self.n_raw if self.intercept else None

    @property
    def feature_scale(self) -> np.ndarray:
        """Multiplicative part of the map per scaled column (uniform mode)."""
        span = np.where(self.constant, 1.0, self.hi - self.lo)
        s = np.where(self.constant, 1.0, 2.0 / span) / self.divisor
        return np.append(s, 1.0 / self.divisor) if self.intercept else s

    def unit(self, features, clip=True):
        """The [-1, 1] step only, before the column-sum division."""
        x = np.asarray(features, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_raw:
            raise DataError(f"expected {self.n_raw} raw features, got shape {x.shape}")
        span = np.where(self.constant, 1.0, self.hi - self.lo)
        z = np.where(self.constant, 0.0, 2.0 * (x - self.lo) / span - 1.0)
        # test points outside the training range would break the column bound
        return np.clip(z, -1.0, 1.0) if clip else z

    def transform(self, features, clip=True) -> np.ndarray:
        z = self.unit(features, clip)
        if self.intercept:
            z = np.hstack([z, np.ones((z.shape[0], 1))])
        if self.mode == "uniform":
            return z / self.divisor
        norms = np.abs(z).sum(axis=1, keepdims=True)
        return z / np.where(norms > 0, norms, 1.0)

    def inverse(self, scaled) -> np.ndarray:
        h = np.asarray(scaled, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.n_scaled:
            raise DataError(f"expected {self.n_scaled} scaled features, got shape {h.shape}")
        if self.mode == "uniform":
            z = h * self.divisor
        elif self.intercept:
            # the intercept column stores the per-example divisor
            z = h / h[:, [-1]]
        else:
            raise DataError("exact scaling without an intercept cannot be inverted")
        z = z[:, : self.n_raw]
        return np.where(self.constant, self.lo, (z + 1.0) * 0.5 * (self.hi - self.lo) + self.lo)


def normalize(ds: Dataset, record: ScaleRecord | None = None, *, intercept=True,
              mode="uniform") -> tuple[Dataset, ConstraintMatrix]:
    """Scale ``ds`` into constraint form; fits a record unless one is given.

    Pass the training set's record when scaling test data.
    """
    if ds.n_features == 0:
        raise DataError(f"dataset {ds.name!r} has no features")
    if record is None:
        record = ScaleRecord.fit(ds.features, intercept, mode)
        if record.constant.any():
            log.warning("%s: %d constant feature(s) mapped to 0", ds.name,
                        int(record.constant.sum()))
    h = record.transform(ds.features)
    names = ds.feature_names or tuple(f"x{j}" for j in range(ds.n_features))
    if record.intercept:
        names = tuple(names) + ("intercept",)
    scaled = replace(ds, features=h, feature_names=names, scale_record=record)
    A = ConstraintMatrix.from_features(h, ds.labels, record.feature_scale)
    return scaled, A


def _is_number(tok: str) -> bool:
    try:
        return math.isfinite(float(tok))
    except ValueError:
        return False


def _label_map(tokens, positive_label):
    kinds = sorted(set(tokens))
    if len(kinds) > 2:
        raise DataError(f"label column has {len(kinds)} distinct values: {kinds[:5]}")
    if positive_label is None:
        nums = {float(k) for k in kinds} if all(_is_number(k) for k in kinds) else None
        if nums is not None and nums <= {-1.0, 0.0, 1.0}:
            return lambda tok: 1.0 if float(tok) == 1.0 else -1.0
        raise DataError("labels are not numeric 0/1 or -1/+1; give the positive label token")
    positive_label = str(positive_label).strip()
    if positive_label not in kinds:
        raise DataError(f"positive label {positive_label!r} not among {kinds}")
    return lambda tok: 1.0 if tok == positive_label else -1.0


def load_csv(path, label_column: int = 0, positive_label=None, group_column: int | None = None,
             name: str | None = None) -> Dataset:
    """Read a comma-separated file into a Dataset with labels in {-1, +1}.

    A header row is detected when any feature cell of the first row is
    non-numeric.  Rows with an empty or non-numeric feature cell are dropped
    and counted in ``n_rejected``.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    width = len(rows[0])
    label_column = label_column % width if label_column < 0 else label_column
    if label_column >= width or (group_column is not None and group_column >= width):
        raise DataError(f"column index out of range for {width} columns")
    skip = {label_column} | ({group_column} if group_column is not None else set())
    feat_cols = [j for j in range(width) if j not in skip]
    if not feat_cols:
        raise DataError(f"{path} has no feature columns")

    header = None
    if not all(_is_number(rows[0][j].strip()) for j in feat_cols):
        header, rows = rows[0], rows[1:]

    feats, toks, groups = [], [], []
    rejected = 0
    for r in rows:
        cells = [c.strip() for c in r]
        if len(cells) != width or not all(_is_number(cells[j]) for j in feat_cols):
            rejected += 1
            continue
        feats.append([float(cells[j]) for j in feat_cols])
        toks.append(cells[label_column])
        if group_column is not None:
            groups.append(cells[group_column])
    if not feats:
        raise DataError(f"{path}: no usable rows ({rejected} rejected)")
    to_y = _label_map(toks, positive_label)
    names = tuple(header[j].strip() for j in feat_cols) if header else ()
    ds = Dataset(np.array(feats), np.array([to_y(t) for t in toks]),
                 name or str(path), names, groups if group_column is not None else None,
                 None, rejected)
    log.info("%s: %d rows loaded, %d rejected", ds.name, ds.n_examples, rejected)
    return ds


def save_csv(ds: Dataset, path):
    """Write ``label[,group],features...`` with a header; labels as +1/-1."""
    names = ds.feature_names or tuple(f"x{j}" for j in range(ds.n_features))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + (["group"] if ds.groups is not None else []) + list(names))
        for i in range(ds.n_examples):
            g = [ds.groups[i]] if ds.groups is not None else []
            w.writerow([int(ds.labels[i])] + g + [repr(float(v)) for v in ds.features[i]])


def split(ds: Dataset, test_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified seeded split; each class sends ``round(frac * count)`` to test."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    test = []
    for cls in (-1.0, 1.0):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise DataError(f"class {int(cls):+d} has a single instance; cannot stratify")
        k = int(math.floor(test_fraction * idx.size + 0.5))
        k = min(max(k, 1), idx.size - 1)
        test.append(rng.permutation(idx)[:k])
    mask = np.zeros(ds.n_examples, bool)
    mask[np.concatenate(test)] = True
    return ds.subset(np.flatnonzero(~mask)), ds.subset(np.flatnonzero(mask))


def synth_hyperplane(dim: int, m_train: int, m_test: int, noise_sigma: float, seed: int = 0,
                     n_informative: int | None = None) -> tuple[Dataset, Dataset]:
    """Uniform points in [-1, 1]^dim labelled by a random hyperplane through 0.

    After labelling, a fair coin per instance decides whether Gaussian noise
    of standard deviation ``noise_sigma`` is added to all its coordinates.
    ``n_informative`` restricts the hyperplane normal to the first k axes.
    """
    if dim < 1 or m_train < 1 or m_test < 0:
        raise ValueError("dim and m_train must be positive, m_test nonnegative")
    if not 0 <= noise_sigma < 1:
        raise ValueError("noise_sigma must lie in [0, 1)")
    k = dim if n_informative is None else int(n_informative)
    if not 1 <= k <= dim:
        raise ValueError("n_informative must lie in [1, dim]")
    rng = np.random.default_rng(seed)
    m = m_train + m_test
    normal = np.zeros(dim)
    normal[:k] = rng.standard_normal(k)
    x = rng.uniform(-1.0, 1.0, size=(m, dim))
    y = np.where(x @ normal >= 0, 1.0, -1.0)
    flip = rng.random(m) < 0.5
    x = x + flip[:, None] * rng.normal(0.0, noise_sigma, size=(m, dim))
    names = tuple(f"x{j}" for j in range(dim))
    tag = f"synth-d{dim}-s{noise_sigma:g}-seed{seed}"
    train = Dataset(x[:m_train], y[:m_train], tag + "-train", names)
    test = Dataset(x[m_train:], y[m_train:], tag + "-test", names)
    return train, test


def bag_accuracy(pred, labels, groups) -> float:
    """Accuracy at group level: a group is positive if any member is."""
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    keys = np.unique(groups)
    hits = 0
    for g in keys:
        sel = groups == g
        hits += np.any(pred[sel] > 0) == np.any(labels[sel] > 0)
    return hits / keys.size
