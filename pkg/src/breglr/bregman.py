"""Bregman distances for the bit-entropy generator and its Legendre map.

The logistic generator is ``F(p) = sum p ln p + (1 - p) ln(1 - p)`` on the
unit cube; its Bregman distance is the sum of two relative entropies and the
associated Legendre transform is a coordinatewise sigmoid reweighting.
Sigmoid here follows the decreasing convention ``sigma(x) = 1 / (1 + e^x)``,
so ``q_i = sigma(v_i)`` is the probability of the *wrong* label.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, kl_div, logit, rel_entr, xlogy

__all__ = [
    "DomainError",
    "GeneratorKind",
    "Generator",
    "ConstraintMatrix",
    "sigmoid",
    "generator_value",
    "generator_grad",
    "bregman_distance",
    "loss_at_zero",
    "loss_from_margins",
    "legendre_transform",
    "margins",
    "model_distribution",
    "Q0_VALUE",
]

Q0_VALUE = 0.5
_COLSUM_SLACK = 1e-12
_Q_LO = np.finfo(float).tiny
_Q_HI = np.nextafter(1.0, 0.0)


class DomainError(ValueError):
    """A point lies outside the generator's domain."""


class GeneratorKind(enum.Enum):
    LOGISTIC = "logistic"
    UNNORMALIZED = "unnormalized"


@dataclass(frozen=True)
class Generator:
    kind: GeneratorKind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"generator dimension must be positive, got {self.dim}")

    @classmethod
    def logistic(cls, dim: int) -> "Generator":
        return cls(GeneratorKind.LOGISTIC, dim)

    @classmethod
    def unnormalized(cls, dim: int) -> "Generator":
        return cls(GeneratorKind.UNNORMALIZED, dim)

    def check(self, p, name="p") -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise DomainError(f"{name} has shape {p.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(p)):
            raise DomainError(f"{name} has non-finite entries")
        if np.any(p < 0):
            raise DomainError(f"{name} has negative entries")
        if self.kind is GeneratorKind.LOGISTIC and np.any(p > 1):
            raise DomainError(f"{name} has entries above 1")
        return p


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    """``entries[j, i] = labels[i] * h_j(x_i)`` for n features and m examples.

    ``feature_scale`` records the multiplicative factor applied to each
    feature during normalization (ones when the caller built A directly).
    """

    entries: np.ndarray
    labels: np.ndarray
    feature_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        y = np.array(self.labels, dtype=float)
        if a.ndim != 2:
            raise ValueError("constraint matrix must be 2-D (features x examples)")
        if y.shape != (a.shape[1],):
            raise ValueError(f"labels shape {y.shape} does not match {a.shape[1]} examples")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(a)):
            raise ValueError("constraint matrix has non-finite entries")
        scale = np.ones(a.shape[0]) if self.feature_scale is None else np.array(self.feature_scale, float)
        if scale.shape != (a.shape[0],) or np.any(scale <= 0):
            raise ValueError("feature_scale must hold one positive factor per feature")
        a.setflags(write=False)
        y.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_scale", scale)

    @classmethod
    def from_features(cls, h, labels, feature_scale=None) -> "ConstraintMatrix":
        """Build A from an (examples x features) matrix of scaled feature values."""
        h = np.asarray(h, dtype=float)
        y = np.asarray(labels, dtype=float)
        return cls(h.T * y[None, :], y, feature_scale)

    @property
    def n_features(self) -> int:
        return self.entries.shape[0]

    @property
    def n_examples(self) -> int:
        return self.entries.shape[1]

    def column_sums(self) -> np.ndarray:
        return np.abs(self.entries).sum(axis=0)

    def is_normalized(self, slack: float = _COLSUM_SLACK) -> bool:
        return bool(np.all(np.abs(self.entries) <= 1 + slack)) and bool(
            np.all(self.column_sums() <= 1 + slack)
        )


def sigmoid(x):
    """``1 / (1 + e^x)``, the decreasing logistic."""
    return expit(-np.asarray(x, dtype=float))


def generator_value(gen: Generator, p) -> float:
    p = gen.check(p)
    if gen.kind is GeneratorKind.LOGISTIC:
        return float(np.sum(xlogy(p, p) + xlogy(1 - p, 1 - p)))
    return float(np.sum(xlogy(p, p)))


def generator_grad(gen: Generator, q) -> np.ndarray:
    """Gradient of F; infinite on the boundary where it is unbounded."""
    q = gen.check(q, "q")
    with np.errstate(divide="ignore"):
        if gen.kind is GeneratorKind.LOGISTIC:
            return np.log(q) - np.log1p(-q)
        return np.log(q) + 1.0


def bregman_distance(gen: Generator, p, q) -> float:
    """``F(p) - F(q) - grad F(q).(p - q)``, with ``0 ln 0 = 0``.

    Returns ``math.inf`` when q sits on the boundary where p does not, which
    is a valid (infinite) distance rather than a domain error.
    """
    p = gen.check(p)
    q = gen.check(q, "q")
    if gen.kind is GeneratorKind.LOGISTIC:
        # second entropy term through log1p so 1 - q is never rounded
        with np.errstate(divide="ignore", invalid="ignore"):
            comp = np.where(p < 1, (1 - p) * (np.log1p(-p) - np.log1p(-q)), 0.0)
        terms = rel_entr(p, q) + comp
    else:
        terms = kl_div(p, q)
    total = float(np.sum(terms))
    return math.inf if math.isinf(total) else max(total, 0.0)


def loss_at_zero(q) -> float:
    """``D(0 || q) = -sum ln(1 - q_i)``; ``math.inf`` if any ``q_i == 1``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise DomainError("q must be a vector")
    if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
        raise DomainError("q must lie in [0, 1]")
    if np.any(q == 1.0):
        return math.inf
    return float(-np.sum(np.log1p(-q)))


def loss_from_margins(v) -> float:
    """``sum ln(1 + e^{-v_i})`` evaluated without forming q.

    Equal to ``loss_at_zero(sigmoid(v))`` but keeps full precision when some
    ``sigmoid(v_i)`` is within rounding of 1.
    """
    return float(np.sum(np.logaddexp(0.0, -np.asarray(v, dtype=float))))


def legendre_transform(v, q) -> np.ndarray:
    """``q e^{-v} / (1 - q + q e^{-v})`` computed in log-odds space.

    Writing the map as ``expit(logit(q) - v)`` never exponentiates a large
    positive number, so no branch on the sign of v is needed. Results are
    clipped into the open interval so downstream logs stay finite.
    """
    v = np.asarray(v, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
        raise DomainError("q must lie in [0, 1]")
    if not np.all(np.isfinite(v)):
        raise DomainError("v must be finite")
    with np.errstate(divide="ignore"):
        out = expit(logit(q) - v)
    interior = (q > 0) & (q < 1) & (v != 0)
    return np.where(interior, np.clip(out, _Q_LO, _Q_HI), q)


def margins(A: ConstraintMatrix, lam) -> np.ndarray:
    """``v = lam^T A``, i.e. ``y_i f_lam(x_i)`` for each example."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (A.n_features,):
        raise ValueError(f"parameter vector has shape {lam.shape}, expected ({A.n_features},)")
    return lam @ A.entries


def model_distribution(A: ConstraintMatrix, lam) -> np.ndarray:
    v = margins(A, lam)
    return legendre_transform(v, np.full(v.shape, Q0_VALUE))
