"""Reference solver for budget-constrained logistic regression.

Minimizes ``sum_i ln(1 + exp(-y_i f(x_i)))`` over ``lam`` in an L1 ball or a
coordinate box by projected gradient steps (optionally with Nesterov
momentum and adaptive restart).  It shares nothing with the Bregman path on
purpose: the loss, gradient and projections are all written here from
scratch so the two solvers can check each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Budget:
    """Either a box ``|lam_j| <= box[j]`` or an L1 ball ``||lam||_1 <= radius``."""

    box: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if (self.box is None) == (self.radius is None):
            raise ValueError("give exactly one of box or radius")
        if self.radius is not None and self.radius < 0:
            raise ValueError("L1 radius must be nonnegative")
        if self.box is not None:
            b = np.asarray(self.box, dtype=float)
            if np.any(b < 0):
                raise ValueError("box half-widths must be nonnegative")
            object.__setattr__(self, "box", b)

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.box is not None:
            return np.clip(v, -self.box, self.box)
        return l1_project(v, self.radius)


@dataclass(frozen=True)
class OracleConfig:
    budget: Budget
    step_size: float | None = None
    max_iters: int = 200_000
    tol: float = 1e-8
    accelerate: bool = True

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol and max_iters must be positive")


@dataclass
class OracleResult:
    lam: np.ndarray
    objective: float
    converged: bool
    iterations: int
    pg_norm: float


def l1_project(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` by sorting."""
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    srt = np.sort(a)[::-1]
    css = np.cumsum(srt)
    k = np.arange(1, srt.size + 1)
    hits = np.nonzero(srt * k > css - radius)[0]
    # k = 1 always qualifies in exact arithmetic; rounding can hide it
    rho = hits[-1] if hits.size else 0
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def logloss(entries: np.ndarray, lam: np.ndarray) -> float:
    margin = lam @ entries
    return float(np.sum(np.logaddexp(0.0, -margin)))


def logloss_grad(entries: np.ndarray, lam: np.ndarray) -> np.ndarray:
    margin = lam @ entries
    # d/dm ln(1 + e^{-m}) = -1 / (1 + e^{m})
    w = 0.5 * (1.0 - np.tanh(0.5 * margin))
    return -(entries @ w)


def _auto_step(entries):
    # Lipschitz constant of the gradient is at most ||A||_2^2 / 4
    smax = np.linalg.norm(entries, 2)
    return 4.0 / max(smax**2, 1e-300)


def oracle_solve(A, cfg: OracleConfig) -> OracleResult:
    """Projected (accelerated) gradient on the constrained log-loss.

    ``A`` is either a ConstraintMatrix or a raw (features x examples) array.
    Converged means the unit-step projected gradient
    ``||lam - P(lam - grad)||`` fell below ``cfg.tol``.
    """
    entries = np.asarray(getattr(A, "entries", A), dtype=float)
    n = entries.shape[0]
    proj = cfg.budget.project
    safe = _auto_step(entries)
    step_max = cfg.step_size if cfg.step_size is not None else 4.0 * safe
    safe = min(safe, step_max)
    step = safe

    x = proj(np.zeros(n))
    fx = logloss(entries, x)
    y, fy = x.copy(), fx
    t_mom = 1.0
    pg = np.inf
    for it in range(1, cfg.max_iters + 1):
        gy = logloss_grad(entries, y)
        step = min(step_max, 2.0 * step)
        noise = 1e-12 * max(1.0, abs(fy))
        while True:
            xn = proj(y - step * gy)
            fn = logloss(entries, xn)
            if abs(fn - fy) <= noise:
                # objective differences are lost in rounding; trust only 1/L
                if step > safe:
                    step = safe
                    continue
                break
            d = xn - y
            if cfg.accelerate:
                ok = fn <= fy + gy @ d + (d @ d) / (2.0 * step)
            else:
                ok = fn <= fy + 1e-4 * (gy @ d)
            # a step of 1/L always satisfies the bound, so never go below it
            if ok or step <= safe:
                break
            step = max(0.5 * step, safe)
        if cfg.accelerate:
            # gradient-based restart: momentum points uphill
            if (y - xn) @ (xn - x) > 0:
                t_mom = 1.0
                y = xn.copy()
            else:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
                y = xn + ((t_mom - 1.0) / t_next) * (xn - x)
                t_mom = t_next
            fy = logloss(entries, y)
        else:
            y, fy = xn, fn
        x, fx = xn, fn
        gx = logloss_grad(entries, x)
        pg = float(np.linalg.norm(x - proj(x - gx)))
        if pg <= cfg.tol:
            return OracleResult(x, fx, True, it, pg)
    return OracleResult(x, fx, False, cfg.max_iters, pg)
