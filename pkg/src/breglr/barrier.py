"""Primal-dual log-barrier Newton solver for the one-dimensional subproblems.

Each coordinate j of a sweep asks for

    minimize  G(d)           over  lo <= d <= hi,  G(d) <= rho

where ``G(d) = W+ (e^{-d} - 1) + W- (e^{d} - 1)``, ``[lo, hi] = [-u - lam,
u - lam]`` keeps ``|lam + d| <= u`` and ``rho = G(clip(0, lo, hi))`` demands
the step does not raise the bound above its value at the smallest feasible
move (``rho = 0`` whenever ``|lam| <= u``).  With slacks ``s, t, r`` this is

    minimize   G(d) + a (s + t) - mu (ln s + ln t + ln r)
    subject to d + s = hi,   d - t = lo,   G(d) + r = rho

over ``x = (d, r, s, t)`` with multiplier ``lam_ineq`` for the descent row
and ``nu = (nu_hi, nu_lo)`` for the two box rows.  The 7x7 Newton system
keeps the block layout

    [ H + lam_ineq * grad2 f   J     A^T ] [dx  ]     [r_dual]
    [ lam_ineq * J^T           f     0   ] [dlam] = - [r_cent]
    [ A                        0     0   ] [dnu ]     [r_pri ]

with ``f = G + r - rho`` and ``r_cent = lam_ineq * f``.  Since ``s + t`` is
pinned to ``hi - lo`` the penalty ``a`` only shifts ``nu``.

Everything below works on stacked arrays so a whole sweep of coordinates is
solved at once; :func:`solve_subproblem` is the single-coordinate wrapper.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .auxiliary import EXP_CLAMP, coord_argmin, coord_loss

FRACTION_TO_BOUNDARY = 0.95
TIKHONOV = 1e-10
ARMIJO = 1e-4
MAX_BACKTRACK = 60
# descent available below this (relative to max weight) is treated as none
MIN_GAP = 1e-13

STATUS_INTERIOR = "interior"
STATUS_DEGENERATE_BOX = "degenerate_box"
STATUS_INERT = "inert"
STATUS_NO_DESCENT = "no_descent"
STATUS_MAX_NEWTON = "max_newton"


class DegenerateKKT(np.linalg.LinAlgError):
    """The Newton matrix is singular even after regularization."""


@dataclass(frozen=True)
class BarrierConfig:
    mu0: float = 1.0
    mu_shrink: float = 0.2
    mu_min: float = 1e-9
    tol_kkt: float = 1e-10
    max_newton: int = 50

    def __post_init__(self):
        if not 0 < self.mu_shrink < 1:
            raise ValueError("mu_shrink must lie in (0, 1)")
        if self.mu0 <= 0 or self.mu_min <= 0 or self.tol_kkt <= 0:
            raise ValueError("mu0, mu_min and tol_kkt must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")


@dataclass(frozen=True)
class SubproblemSpec:
    w_plus: float
    w_minus: float
    lam: float
    u: float
    penalty_a: float | None = None
    mu0: float = 1.0
    mu_shrink: float = 0.2
    mu_min: float = 1e-9
    tol_kkt: float = 1e-10
    max_newton: int = 50

    def __post_init__(self):
        if self.w_plus < 0 or self.w_minus < 0:
            raise ValueError("coordinate weights must be nonnegative")
        if self.penalty_a is not None and self.penalty_a <= 0:
            raise ValueError("penalty_a must be positive")
        self.barrier  # validates the schedule

    @property
    def c(self) -> float:
        """Upper room ``u - lam``."""
        return self.u - self.lam

    @property
    def lo(self) -> float:
        return -self.u - self.lam

    @property
    def hi(self) -> float:
        return self.u - self.lam

    @property
    def a(self) -> float:
        if self.penalty_a is not None:
            return self.penalty_a
        return default_penalty(self.w_plus, self.w_minus)

    @property
    def level(self) -> float:
        """``rho``: value of G at the smallest feasible move."""
        ref = min(max(0.0, self.lo), self.hi)
        return float(coord_loss(ref, self.w_plus, self.w_minus))

    @property
    def barrier(self) -> BarrierConfig:
        return BarrierConfig(self.mu0, self.mu_shrink, self.mu_min, self.tol_kkt, self.max_newton)


@dataclass(frozen=True)
class SubproblemState:
    delta: float
    r: float
    s: float
    t: float
    lam_ineq: float
    nu: tuple[float, float]
    mu: float

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.r, self.s, self.t, self.lam_ineq, *self.nu], dtype=float)

    @classmethod
    def from_array(cls, x, mu) -> "SubproblemState":
        x = np.asarray(x, dtype=float)
        return cls(*map(float, x[:5]), (float(x[5]), float(x[6])), float(mu))


@dataclass(frozen=True)
class KKTResidual:
    dual: np.ndarray
    cent: np.ndarray
    pri: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.dual, self.cent, self.pri])

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.vector())))


@dataclass
class SubproblemDiagnostics:
    status: str
    delta_raw: float
    newton_iters: int = 0
    mu_stages: int = 0
    converged: bool = True
    # one (mu, ||r||_inf, ||r_cent||_inf) triple per barrier stage
    residual_history: list = field(default_factory=list)


def default_penalty(w_plus, w_minus):
    return 10.0 * np.maximum(w_plus, w_minus) + 1.0


# ---------------------------------------------------------------------------
# stacked residual / Jacobian, rows of X are (d, r, s, t, lam_ineq, nu_hi, nu_lo)


def _exp_terms(d, wp, wm):
    # G, G' and G'' share the same two exponentials
    d = np.minimum(np.maximum(d, -EXP_CLAMP), EXP_CLAMP)
    em, ep = np.expm1(-d), np.expm1(d)
    g = wp * em + wm * ep
    a, b = wp * (em + 1.0), wm * (ep + 1.0)
    return g, b - a, a + b


def _residual(X, wp, wm, lo, hi, rho, a, mu):
    d, r, s, t, li, n1, n2 = X.T
    g, g1, _ = _exp_terms(d, wp, wm)
    F = np.empty_like(X)
    F[:, 0] = g1 * (1.0 + li) + n1 + n2
    F[:, 1] = li - mu / r
    F[:, 2] = a - mu / s + n1
    F[:, 3] = a - mu / t - n2
    F[:, 4] = li * (g + r - rho)
    F[:, 5] = d + s - hi
    F[:, 6] = d - t - lo
    return F


_JAC_CONST = np.zeros((7, 7))
_JAC_CONST[0, 5] = _JAC_CONST[0, 6] = 1.0
_JAC_CONST[1, 4] = _JAC_CONST[2, 5] = 1.0
_JAC_CONST[3, 6] = -1.0
_JAC_CONST[5, 0] = _JAC_CONST[5, 2] = _JAC_CONST[6, 0] = 1.0
_JAC_CONST[6, 3] = -1.0


def _jacobian(X, wp, wm, lo, hi, rho, a, mu):
    d, r, s, t, li, n1, n2 = X.T
    g, g1, g2 = _exp_terms(d, wp, wm)
    M = np.repeat(_JAC_CONST[None], X.shape[0], axis=0)
    M[:, 0, 0] = g2 * (1.0 + li)
    M[:, 0, 4] = g1
    M[:, 1, 1] = mu / r**2
    M[:, 2, 2] = mu / s**2
    M[:, 3, 3] = mu / t**2
    M[:, 4, 0] = li * g1
    M[:, 4, 1] = li
    M[:, 4, 4] = g + r - rho
    return M


def _solve_kkt(M, rhs):
    try:
        return np.linalg.solve(M, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(rhs)
    eye = np.eye(M.shape[-1])
    for i in range(M.shape[0]):
        try:
            out[i] = np.linalg.solve(M[i], rhs[i])
        except np.linalg.LinAlgError:
            try:
                out[i] = np.linalg.solve(M[i] + TIKHONOV * eye, rhs[i])
            except np.linalg.LinAlgError as exc:
                raise DegenerateKKT(f"KKT matrix singular for subproblem {i}") from exc
    return out


def _max_step(X, dX):
    """Largest step in (0, 1] keeping r, s, t, lam_ineq strictly positive."""
    pos = X[:, 1:5]
    dpos = dX[:, 1:5]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dpos < 0, -pos / dpos, np.inf)
    return np.minimum(1.0, FRACTION_TO_BOUNDARY * ratio.min(axis=1))


def _tol(X, tol_kkt):
    return tol_kkt * (1.0 + np.abs(X).max(axis=1))


def _newton_stage(X, prob, cfg: BarrierConfig):
    """Damped Newton on the residual at fixed mu; updates X in place.

    ``prob`` holds the per-row (wp, wm, lo, hi, rho, a, mu) arrays.

    Returns (iterations used per row, converged mask, final residuals).
    """
    k = X.shape[0]
    iters = np.zeros(k, dtype=int)
    F = _residual(X, *prob)
    done = np.abs(F).max(axis=1) <= _tol(X, cfg.tol_kkt)
    for _ in range(cfg.max_newton):
        act = ~done
        if not act.any():
            break
        if act.all():
            idx = slice(None)
            Xa, pa, Fa = X.copy(), prob, F
        else:
            idx = np.flatnonzero(act)
            Xa = X[idx]
            pa = tuple(p[idx] for p in prob)
            Fa = F[idx]
        dX = _solve_kkt(_jacobian(Xa, *pa), -Fa)
        alpha = _max_step(Xa, dX)
        base = np.linalg.norm(Fa, axis=1)
        Xn = Xa + alpha[:, None] * dX
        Fn = _residual(Xn, *pa)
        bad = np.linalg.norm(Fn, axis=1) > (1.0 - ARMIJO * alpha) * base
        for _ in range(MAX_BACKTRACK):
            if not bad.any():
                break
            alpha = np.where(bad, 0.5 * alpha, alpha)
            b = np.flatnonzero(bad)
            Xn[b] = Xa[b] + alpha[b, None] * dX[b]
            Fn[b] = _residual(Xn[b], *(p[b] for p in pa))
            bad[b] = np.linalg.norm(Fn[b], axis=1) > (1.0 - ARMIJO * alpha[b]) * base[b]
        X[idx] = Xn
        F[idx] = Fn
        iters[idx] += 1
        done[idx] = np.abs(Fn).max(axis=1) <= _tol(Xn, cfg.tol_kkt)
    return iters, done, F


@dataclass
class BatchResult:
    delta: np.ndarray
    delta_raw: np.ndarray
    status: np.ndarray
    newton_iters: np.ndarray
    converged: np.ndarray
    history: list = field(default_factory=list)

    @property
    def n_unconverged(self) -> int:
        return int(np.count_nonzero(~self.converged))


def solve_batch(w_plus, w_minus, lam, u, cfg: BarrierConfig = BarrierConfig(),
                penalty_a=None, record_history=False) -> BatchResult:
    """Solve the box-constrained descent subproblem for every coordinate.

    Inputs broadcast to a common 1-D shape.  The returned ``delta`` lies in
    ``[-u - lam, u - lam]`` exactly; ``delta_raw`` is the barrier iterate
    before that final projection.
    """
    wp, wm, lam, u = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (w_plus, w_minus, lam, u))
    wp, wm, lam, u = np.broadcast_arrays(wp, wm, lam, u)
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ValueError("per-coordinate budget u must be finite and nonnegative")
    if np.any(wp < 0) or np.any(wm < 0):
        raise ValueError("coordinate weights must be nonnegative")
    k = wp.shape[0]
    lo = -u - lam
    hi = u - lam
    ref = np.clip(0.0, lo, hi)
    a = default_penalty(wp, wm) if penalty_a is None else np.broadcast_to(np.asarray(penalty_a, float), (k,))

    delta = ref.copy()
    delta_raw = ref.copy()
    status = np.full(k, STATUS_NO_DESCENT, dtype=object)
    iters = np.zeros(k, dtype=int)
    conv = np.ones(k, dtype=bool)

    degenerate = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(lam))
    status[degenerate] = STATUS_DEGENERATE_BOX
    delta[degenerate] = delta_raw[degenerate] = hi[degenerate]
    inert = ~degenerate & (wp == 0) & (wm == 0)
    status[inert] = STATUS_INERT

    cand = ~degenerate & ~inert
    scale = np.where(cand, np.maximum(wp, wm), 1.0)
    wpn, wmn = wp / scale, wm / scale
    target = np.clip(np.nan_to_num(coord_argmin(wpn, wmn), nan=0.0), lo, hi)
    d0 = ref + 0.5 * (target - ref)
    rho = coord_loss(ref, wpn, wmn)
    gap = rho - coord_loss(d0, wpn, wmn)
    s0 = hi - d0
    t0 = d0 - lo
    live = cand & (gap > MIN_GAP) & (s0 > 0) & (t0 > 0)
    history = []
    if live.any():
        idx = np.flatnonzero(live)
        g = gap[idx]
        an = a[idx] / scale[idx]
        prob = (wpn[idx], wmn[idx], lo[idx], hi[idx], rho[idx], an)
        mu_scale = np.minimum(1.0, g)
        mu = cfg.mu0 * mu_scale
        X = np.empty((idx.size, 7))
        X[:, 0] = d0[idx]
        X[:, 1] = g
        X[:, 2] = s0[idx]
        X[:, 3] = t0[idx]
        X[:, 4] = mu / g
        X[:, 5] = mu / s0[idx] - an
        X[:, 6] = an - mu / t0[idx]
        it = np.zeros(idx.size, dtype=int)
        ok = np.ones(idx.size, dtype=bool)
        mu_stop = cfg.mu_min * mu_scale
        while True:
            used, done, F = _newton_stage(X, prob + (mu,), cfg)
            it += used
            ok &= done
            if record_history:
                history.append((mu.copy(), np.abs(F).max(axis=1), np.abs(F[:, 4])))
            if np.all(mu * cfg.mu_shrink < mu_stop):
                break
            mu = mu * cfg.mu_shrink
        raw = X[:, 0]
        # the barrier stops a slack of order mu short of an active bound;
        # G is convex, so the best of the iterate and the two ends is exact
        cands = np.stack([np.clip(raw, lo[idx], hi[idx]), lo[idx], hi[idx], ref[idx]])
        vals = coord_loss(cands, wpn[idx], wmn[idx])
        dl = cands[np.argmin(vals, axis=0), np.arange(idx.size)]
        delta[idx] = dl
        delta_raw[idx] = raw
        iters[idx] = it
        conv[idx] = ok
        status[idx] = np.where(ok, STATUS_INTERIOR, STATUS_MAX_NEWTON)
    return BatchResult(delta, delta_raw, status, iters, conv, history)


# ---------------------------------------------------------------------------
# single-coordinate surface


def _prob(spec: SubproblemSpec):
    arr = lambda x: np.array([float(x)])  # noqa: E731
    return (arr(spec.w_plus), arr(spec.w_minus), arr(spec.lo), arr(spec.hi), arr(spec.level), arr(spec.a))


def _check_interior(st: SubproblemState):
    if not (st.r > 0 and st.s > 0 and st.t > 0):
        raise ValueError("state is not interior: r, s and t must be positive")
    if st.mu <= 0:
        raise ValueError("barrier parameter must be positive")


def kkt_residual(spec: SubproblemSpec, st: SubproblemState) -> KKTResidual:
    _check_interior(st)
    F = _residual(st.as_array()[None, :], *_prob(spec), st.mu)[0]
    return KKTResidual(F[:4], F[4:5], F[5:])


def kkt_matrix(spec: SubproblemSpec, st: SubproblemState) -> np.ndarray:
    _check_interior(st)
    return _jacobian(st.as_array()[None, :], *_prob(spec), st.mu)[0]


def newton_step(spec: SubproblemSpec, st: SubproblemState):
    """Full Newton direction ``(dx, dlam, dnu)`` for the residual at ``st``."""
    M = kkt_matrix(spec, st)
    rhs = -kkt_residual(spec, st).vector()
    step = _solve_kkt(M[None], rhs[None])[0]
    return step[:4], float(step[4]), step[5:]


def solve_subproblem(spec: SubproblemSpec):
    """Barrier path for one coordinate; returns ``(delta, diagnostics)``."""
    if spec.u < 0:
        raise ValueError(f"infeasible subproblem: budget u={spec.u} is negative")
    res = solve_batch(spec.w_plus, spec.w_minus, spec.lam, spec.u, spec.barrier,
                      penalty_a=spec.penalty_a, record_history=True)
    hist = [(float(m[0]), float(r[0]), float(c[0])) for m, r, c in res.history]
    diag = SubproblemDiagnostics(
        status=str(res.status[0]),
        delta_raw=float(res.delta_raw[0]),
        newton_iters=int(res.newton_iters[0]),
        mu_stages=len(hist),
        converged=bool(res.converged[0]),
        residual_history=hist,
    )
    return float(res.delta[0]), diag
