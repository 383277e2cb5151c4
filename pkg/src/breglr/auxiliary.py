"""Auxiliary upper bound on the per-step loss change and its separable form.

For a step ``delta`` taken from the current point q, the change in
``D(0 || q)`` is at most ``sum_i q_i (exp(-(delta^T A)_i) - 1)``. When every
column of A has absolute sum at most one, Jensen's inequality splits this
bound into independent one-dimensional terms

    G_j(d) = W+_j (e^{-d} - 1) + W-_j (e^{d} - 1)

with ``W+_j`` / ``W-_j`` the q-weighted mass of positive / negative entries
in row j.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .bregman import ConstraintMatrix

EXP_CLAMP = 500.0


class CoordWeights(NamedTuple):
    w_plus: np.ndarray
    w_minus: np.ndarray


def _clamped(x):
    return np.clip(x, -EXP_CLAMP, EXP_CLAMP)


def auxiliary_value(delta, q, A: ConstraintMatrix) -> float:
    delta = np.asarray(delta, dtype=float)
    q = np.asarray(q, dtype=float)
    if delta.shape != (A.n_features,) or q.shape != (A.n_examples,):
        raise ValueError("dimension mismatch between delta, q and A")
    v = delta @ A.entries
    return float(np.sum(q * np.expm1(-_clamped(v))))


def coord_weights(q, A: ConstraintMatrix) -> CoordWeights:
    q = np.asarray(q, dtype=float)
    if q.shape != (A.n_examples,):
        raise ValueError(f"q has shape {q.shape}, expected ({A.n_examples},)")
    a = A.entries
    # exact sign test on stored entries: zeros go to neither side
    w_plus = np.where(a > 0, a, 0.0) @ q
    w_minus = np.where(a < 0, -a, 0.0) @ q
    return CoordWeights(w_plus, w_minus)


def coord_loss(delta, w_plus, w_minus):
    d = _clamped(np.asarray(delta, dtype=float))
    return w_plus * np.expm1(-d) + w_minus * np.expm1(d)


def coord_loss_grad(delta, w_plus, w_minus):
    d = _clamped(np.asarray(delta, dtype=float))
    return -w_plus * np.exp(-d) + w_minus * np.exp(d)


def coord_loss_hess(delta, w_plus, w_minus):
    d = _clamped(np.asarray(delta, dtype=float))
    return w_plus * np.exp(-d) + w_minus * np.exp(d)


def coord_argmin(w_plus, w_minus):
    """Unconstrained minimizer ``0.5 ln(W+/W-)``.

    +inf / -inf when only one side carries mass, nan when both are zero
    (the coordinate is inert and every value is optimal).
    """
    wp = np.asarray(w_plus, dtype=float)
    wm = np.asarray(w_minus, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * (np.log(wp) - np.log(wm))
    return np.where((wp == 0) & (wm == 0), np.nan, out)


def separable_bound(delta, weights: CoordWeights) -> float:
    """``sum_j G_j(delta_j)``, an upper bound on :func:`auxiliary_value`."""
    return float(np.sum(coord_loss(delta, weights.w_plus, weights.w_minus)))
