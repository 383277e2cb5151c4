"""Outer loop: budget-constrained logistic regression by auxiliary descent.

Each sweep evaluates ``q = sigmoid(lam^T A)``, collects the per-coordinate
weights ``W+ / W-`` and hands every active coordinate to the barrier solver
with its own box ``|lam_j + delta_j| <= u_j``.  The step is applied to all
coordinates at once.

Two budget modes are supported:

``per-coord``
    fixed boxes ``u_j`` (``budget / n`` each unless given explicitly).
``aggregate``
    an L1 ball ``||lam||_1 <= budget``.  Before each sweep a master step
    splits the ball into per-coordinate boxes by bisecting on the ball's
    multiplier; coordinates whose share is zero are pulled exactly to zero,
    which is where the sparsity comes from.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .auxiliary import (
    CoordWeights,
    auxiliary_value,
    coord_loss,
    coord_loss_grad,
    coord_weights,
)
from .barrier import BarrierConfig, solve_batch
from .bregman import ConstraintMatrix, loss_from_margins, margins, sigmoid

log = logging.getLogger(__name__)

BUDGET_MODES = ("per-coord", "aggregate")


class TrainingError(RuntimeError):
    """Training hit a numerical failure; ``dump`` carries the last state."""

    def __init__(self, msg, dump=None):
        super().__init__(msg)
        self.dump = dump or {}


class DescentViolation(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    budget: float = 10.0
    budget_mode: str = "per-coord"
    budget_u: tuple | None = None
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    tol_abs: float = 1e-8
    tol_rel: float = 1e-6
    max_outer: int = 500
    drop_threshold: float = 1e-6
    drop_patience: int = 3
    keep_active: tuple = ()
    descent_slack: float = 1e-9
    check_descent: bool = True

    def __post_init__(self):
        if self.budget_mode not in BUDGET_MODES:
            raise ValueError(f"budget_mode must be one of {BUDGET_MODES}")
        if not self.budget > 0 and self.budget_u is None:
            raise ValueError("budget must be positive")
        if self.budget_u is not None and np.any(np.asarray(self.budget_u, float) < 0):
            raise ValueError("per-coordinate budgets must be nonnegative")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("outer tolerances must be positive")
        if self.max_outer < 0 or self.drop_patience < 1 or self.drop_threshold < 0:
            raise ValueError("invalid iteration or feature-drop settings")


@dataclass
class ParamVector:
    values: np.ndarray
    active: np.ndarray
    budget_u: np.ndarray | None = None
    aggregate_c: float | None = None

    @property
    def n(self) -> int:
        return self.values.size

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def is_feasible(self, slack: float = 1e-9) -> bool:
        if self.aggregate_c is not None and self.l1() > self.aggregate_c + slack:
            return False
        if self.budget_u is not None and np.any(np.abs(self.values) > self.budget_u + slack):
            return False
        return True


@dataclass
class TraceRow:
    iteration: int
    loss: float
    train_err: float
    test_err: float
    active_features: int
    max_abs_delta: float
    bound: float = 0.0
    aux: float = 0.0
    newton_iters: int = 0
    unconverged: int = 0
    tau: float = 0.0


@dataclass
class TrainTrace:
    rows: list = field(default_factory=list)
    stop_reason: str = ""
    deltas: list = field(default_factory=list)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def losses(self) -> np.ndarray:
        return self.column("loss")

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def as_dicts(self):
        return [asdict(r) for r in self.rows]


def per_coord_budget(cfg: TrainConfig, n: int) -> np.ndarray:
    if cfg.budget_u is not None:
        u = np.asarray(cfg.budget_u, dtype=float)
        if u.shape != (n,):
            raise ValueError(f"budget_u has shape {u.shape}, expected ({n},)")
        return u
    return np.full(n, cfg.budget / n)


def _penalized_target(w_plus, w_minus, lam, tau):
    """``lam + argmin_d G(d) + tau |lam + d|`` per coordinate (closed form)."""
    wp, wm = w_plus, w_minus
    g0 = coord_loss_grad(-lam, wp, wm)
    root = np.sqrt(tau * tau + 4.0 * wp * wm)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.log(2.0 * wp / (tau + root))
        down = np.log((tau + root) / (2.0 * wm))
    z = np.where(g0 < -tau, lam + up, np.where(g0 > tau, lam + down, 0.0))
    inert = (wp == 0) & (wm == 0)
    return np.where(inert, np.where(tau > 0, 0.0, lam), z)


def allocate_budget(weights: CoordWeights, lam, radius: float, active=None, iters: int = 500):
    """Split an L1 ball into per-coordinate boxes for one sweep.

    Returns ``(u, tau)`` where ``tau`` is the ball multiplier found by
    bisection and ``u_j = |lam_j + delta_j(tau)|`` is the magnitude each
    coordinate may reach.  Inactive coordinates keep ``u_j = |lam_j|``.
    """
    lam = np.asarray(lam, dtype=float)
    active = np.ones(lam.size, bool) if active is None else np.asarray(active, bool)
    wp, wm = weights.w_plus[active], weights.w_minus[active]
    la = lam[active]
    u = np.abs(lam).astype(float)
    room = radius - np.abs(lam[~active]).sum()
    if room <= 0 or la.size == 0:
        u[active] = 0.0
        return u, math.inf

    def used(tau):
        return np.abs(_penalized_target(wp, wm, la, tau))

    z0 = used(0.0)
    if np.all(np.isfinite(z0)) and z0.sum() <= room:
        u[active] = z0
        return u, 0.0
    hi = float(np.max(np.abs(coord_loss_grad(-la, wp, wm)))) * (1 + 1e-12) + 1e-300
    lo = 0.0
    for _ in range(iters):
        # the bracket can span hundreds of decades, so bisect geometrically
        mid = math.sqrt(lo * hi) if lo > 0 else hi * 1e-3
        if not lo < mid < hi:
            break
        if used(mid).sum() > room:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    za = used(hi)
    total = za.sum()
    if total > room:
        za *= room / total
    u[active] = za
    return u, hi


def drop_features(deltas, lam, active, threshold: float, patience: int = 3, exempt=()):
    """Deactivate coordinates whose last ``patience`` steps and weight are all tiny.

    ``deltas`` is the sequence of past step vectors (most recent last).
    """
    active = np.array(active, dtype=bool)
    if len(deltas) == 0:
        raise ValueError("need at least one completed iteration")
    if threshold <= 0 or len(deltas) < patience:
        return active
    recent = np.abs(np.asarray(list(deltas)[-patience:]))
    quiet = np.all(recent < threshold, axis=0) & (np.abs(np.asarray(lam)) < threshold)
    quiet[list(exempt)] = False
    return active & ~quiet


def predict(lam, features):
    """Labels (ties go to +1) and ``P(y = +1 | x)`` for scaled features.

    ``features`` is one scaled instance (n,) or a matrix (m, n).
    """
    lam = np.asarray(getattr(lam, "values", lam), dtype=float)
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != lam.size:
        raise ValueError(f"instance has {x.shape[-1]} features, model has {lam.size}")
    f = x @ lam
    prob = sigmoid(-f)
    label = np.where(f >= 0, 1, -1)
    return label, prob


def _error_rate(lam, features, labels):
    if features is None:
        return math.nan
    pred, _ = predict(lam, features)
    return float(np.mean(pred != labels))


def train(A: ConstraintMatrix, config: TrainConfig = TrainConfig(), *,
          test_features=None, test_labels=None):
    """Run the auxiliary-descent loop; returns ``(ParamVector, TrainTrace)``.

    ``test_features`` (scaled, examples x features) and ``test_labels`` are
    only used to fill the ``test_err`` column of the trace.
    """
    if not A.is_normalized():
        raise ValueError("constraint matrix violates the column normalization sum_j |A_ji| <= 1")
    n, m = A.entries.shape
    cfg = config
    train_features = (A.entries * A.labels[None, :]).T
    train_labels = A.labels

    lam = np.zeros(n)
    active = np.ones(n, dtype=bool)
    aggregate = cfg.budget_mode == "aggregate"
    u_fixed = None if aggregate else per_coord_budget(cfg, n)
    params = ParamVector(lam, active, u_fixed, cfg.budget if aggregate else None)

    v = np.zeros(m)
    loss = loss_from_margins(v)
    trace = TrainTrace()
    trace.rows.append(TraceRow(0, loss, _error_rate(lam, train_features, train_labels),
                               _error_rate(lam, test_features, test_labels), n, 0.0))
    recent = deque(maxlen=max(cfg.drop_patience, 1))
    exempt = tuple(cfg.keep_active)
    trace.stop_reason = "max_outer"

    for k in range(1, cfg.max_outer + 1):
        q = sigmoid(v)
        w = coord_weights(q, A)
        if aggregate:
            u, tau = allocate_budget(w, lam, cfg.budget, active)
        else:
            u, tau = u_fixed, 0.0
        delta = np.zeros(n)
        idx = np.flatnonzero(active)
        res = solve_batch(w.w_plus[idx], w.w_minus[idx], lam[idx], u[idx], cfg.barrier)
        delta[idx] = res.delta

        bound = float(np.sum(coord_loss(delta, w.w_plus, w.w_minus)))
        aux = auxiliary_value(delta, q, A)
        lam_new = lam + delta
        lam_new[idx] = np.clip(lam_new[idx], -u[idx], u[idx])
        delta = lam_new - lam
        v_new = margins(A, lam_new)
        new_loss = loss_from_margins(v_new)

        if not math.isfinite(new_loss) or np.any(~np.isfinite(lam_new)):
            raise TrainingError(
                f"non-finite loss at iteration {k}",
                dump={"iteration": k, "lam": lam.copy(), "delta": delta, "u": u,
                      "w_plus": w.w_plus, "w_minus": w.w_minus, "loss": loss},
            )
        if cfg.check_descent and new_loss > loss + cfg.descent_slack:
            raise DescentViolation(
                f"loss increased at iteration {k}: {loss!r} -> {new_loss!r}",
                dump={"iteration": k, "lam": lam.copy(), "delta": delta, "bound": bound, "aux": aux},
            )

        decrease = loss - new_loss
        lam, v, loss = lam_new, v_new, new_loss
        params.values = lam
        recent.append(delta)
        trace.deltas.append(delta)
        active = drop_features(recent, lam, active, cfg.drop_threshold, cfg.drop_patience, exempt)
        params.active = active
        trace.rows.append(TraceRow(
            k, loss,
            _error_rate(lam, train_features, train_labels),
            _error_rate(lam, test_features, test_labels),
            int(active.sum()),
            float(np.max(np.abs(delta))) if n else 0.0,
            bound, aux, int(res.newton_iters.sum()), res.n_unconverged,
            float(tau),
        ))
        if res.n_unconverged:
            log.debug("iteration %d: %d subproblems hit max_newton", k, res.n_unconverged)

        droppable = np.ones(n, bool)
        droppable[list(exempt)] = False
        if not np.any(active & droppable):
            rest = np.abs(delta[active])
            if rest.size == 0 or np.all(rest < cfg.drop_threshold):
                trace.stop_reason = "all_dropped"
                break
        if decrease < cfg.tol_abs or decrease < cfg.tol_rel * abs(loss):
            trace.stop_reason = "converged"
            break

    log.info("stopped after %d iterations (%s), loss %.6g", len(trace.rows) - 1, trace.stop_reason, loss)
    return params, trace
