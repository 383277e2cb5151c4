import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breglr.auxiliary import coord_loss, coord_loss_grad, coord_loss_hess
from breglr.barrier import (
    FRACTION_TO_BOUNDARY,
    BarrierConfig,
    SubproblemSpec,
    SubproblemState,
    _max_step,
    kkt_matrix,
    kkt_residual,
    newton_step,
    solve_batch,
    solve_subproblem,
)

from helpers import grid_min

E2 = math.e**2


def interior_state(spec, delta, mu=0.1, lam_ineq=None):
    s, t = spec.hi - delta, delta - spec.lo
    r = spec.level - coord_loss(delta, spec.w_plus, spec.w_minus)
    li = mu / r if lam_ineq is None else lam_ineq
    return SubproblemState(delta, r, s, t, li, (mu / s - spec.a, spec.a - mu / t), mu)


def centered(spec, delta0, mu):
    """Newton iterations at fixed mu from a hand-built interior start."""
    st_ = interior_state(spec, delta0, mu)
    x = st_.as_array()
    for _ in range(60):
        dx, dl, dn = newton_step(spec, SubproblemState.from_array(x, mu))
        step = np.concatenate([dx, [dl], dn])
        alpha = float(_max_step(x[None], step[None])[0])
        x = x + alpha * step
    return SubproblemState.from_array(x, mu)


@pytest.mark.parametrize("wp,wm,lam,u,expected", [
    (1.0, 1.0, 0.0, 10.0, 0.0),
    (E2, 1.0, 0.0, 10.0, 1.0),
    (E2, 1.0, 0.2, 0.5, 0.3),
    (1.0, E2, 0.0, 0.25, -0.25),
])
def test_solve_examples(wp, wm, lam, u, expected):
    delta, diag = solve_subproblem(SubproblemSpec(wp, wm, lam, u))
    assert delta == pytest.approx(expected, abs=1e-8)
    assert abs(lam + delta) <= u
    assert diag.converged


def test_boundary_case_matches_grid():
    spec = SubproblemSpec(E2, 1.0, 0.2, 0.5)
    delta, _ = solve_subproblem(spec)
    assert coord_loss(delta, E2, 1.0) <= grid_min(E2, 1.0, spec.lo, spec.hi) + 1e-9


def test_special_statuses():
    delta, diag = solve_subproblem(SubproblemSpec(0.0, 0.0, 0.3, 1.0))
    assert delta == 0.0 and diag.status == "inert"
    delta, diag = solve_subproblem(SubproblemSpec(1.0, 2.0, 0.3, 0.0))
    assert delta == -0.3 and diag.status == "degenerate_box"
    # one-sided weight: pushed to the box edge in the descending direction
    delta, diag = solve_subproblem(SubproblemSpec(2.0, 0.0, 0.0, 1.5))
    assert delta == pytest.approx(1.5, abs=1e-6) and diag.status == "interior"


def test_invalid_specs():
    with pytest.raises(ValueError):
        solve_subproblem(SubproblemSpec(1.0, 1.0, 0.0, -1.0))
    with pytest.raises(ValueError):
        SubproblemSpec(-1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        SubproblemSpec(1.0, 1.0, 0.0, 1.0, mu_shrink=1.5)
    with pytest.raises(ValueError):
        BarrierConfig(mu0=0.0)


def test_spec_room_and_penalty():
    spec = SubproblemSpec(2.0, 3.0, 0.25, 1.0)
    assert spec.c == 0.75 and spec.hi == 0.75 and spec.lo == -1.25
    assert spec.a == 31.0
    assert SubproblemSpec(2.0, 3.0, 0.25, 1.0, penalty_a=5.0).a == 5.0


def test_batch_agrees_with_single(rng):
    wp, wm = rng.exponential(size=(2, 30))
    lam = rng.normal(size=30)
    u = rng.uniform(0, 2, 30)
    res = solve_batch(wp, wm, lam, u)
    for i in range(0, 30, 7):
        d, _ = solve_subproblem(SubproblemSpec(wp[i], wm[i], lam[i], u[i]))
        assert d == pytest.approx(res.delta[i], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-2, 2), st.floats(0, 2))
def test_feasible_and_not_worse_than_smallest_move(wp, wm, lam, u):
    spec = SubproblemSpec(wp, wm, lam, u)
    delta, diag = solve_subproblem(spec)
    assert abs(lam + delta) <= u * (1 + 1e-15) + 1e-15
    assert coord_loss(delta, wp, wm) <= spec.level + 1e-12
    assert math.isfinite(diag.delta_raw)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-1, 1), st.floats(0.05, 2))
def test_stationary_against_feasible_probes(wp, wm, lam, u):
    spec = SubproblemSpec(wp, wm, lam, u)
    delta, _ = solve_subproblem(spec)
    g = coord_loss(delta, wp, wm)
    for h in (1e-4, -1e-4):
        probe = min(max(delta + h, spec.lo), spec.hi)
        assert coord_loss(probe, wp, wm) >= g - 1e-9


def test_centrality_shrinks_with_mu(rng):
    for _ in range(20):
        wp, wm = rng.exponential(size=2)
        spec = SubproblemSpec(wp, wm, rng.normal(), rng.uniform(0.1, 2))
        _, diag = solve_subproblem(spec)
        for mu, _, cent in diag.residual_history:
            assert cent <= 10 * mu


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fraction_to_boundary_keeps_interior(seed):
    r = np.random.default_rng(seed)
    X = r.uniform(0.01, 3, size=(5, 7))
    dX = r.normal(size=(5, 7)) * r.uniform(0.1, 100)
    alpha = _max_step(X, dX)
    Xn = X + alpha[:, None] * dX
    assert np.all(Xn[:, 1:5] >= (1 - FRACTION_TO_BOUNDARY) * X[:, 1:5] * (1 - 1e-12))
    assert np.all((alpha > 0) & (alpha <= 1))


def test_residual_blocks_at_centered_point():
    spec = SubproblemSpec(E2, 1.0, 0.0, 3.0)
    st_ = centered(spec, 0.5, 1e-3)
    assert kkt_residual(spec, st_).norm_inf() <= 1e-12
    dx, dl, dn = newton_step(spec, st_)
    assert np.max(np.abs(np.concatenate([dx, [dl], dn]))) <= 1e-10


def test_dual_block_directional_derivative():
    spec = SubproblemSpec(2.0, 1.0, 0.1, 2.0)
    st_ = centered(spec, 0.2, 1e-2)
    eps = 1e-6
    moved = SubproblemState(st_.delta + eps, st_.r, st_.s, st_.t, st_.lam_ineq, st_.nu, st_.mu)
    change = kkt_residual(spec, moved).dual[0] - kkt_residual(spec, st_).dual[0]
    expected = coord_loss_hess(st_.delta, 2.0, 1.0) * (1 + st_.lam_ineq) * eps
    assert change == pytest.approx(expected, rel=1e-4)


def test_symmetric_primal_rows_vanish():
    spec = SubproblemSpec(1.0, 1.0, 0.0, 1.0)
    st_ = SubproblemState(0.0, 0.5, spec.hi, -spec.lo, 1.0, (0.0, 0.0), 0.1)
    np.testing.assert_array_equal(kkt_residual(spec, st_).pri, 0.0)


def test_non_interior_state_rejected():
    spec = SubproblemSpec(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        kkt_residual(spec, SubproblemState(0.0, -1.0, 1.0, 1.0, 1.0, (0.0, 0.0), 0.1))
    with pytest.raises(ValueError):
        kkt_matrix(spec, SubproblemState(0.0, 1.0, 1.0, 1.0, 1.0, (0.0, 0.0), 0.0))


def test_newton_solve_residual(rng):
    for _ in range(50):
        wp, wm = rng.exponential(size=2)
        spec = SubproblemSpec(wp, wm, rng.normal() * 0.3, rng.uniform(0.5, 2))
        st_ = SubproblemState(rng.uniform(spec.lo, spec.hi) * 0.5, *rng.uniform(0.1, 2, 4),
                              tuple(rng.normal(size=2)), rng.uniform(1e-3, 1))
        st_ = SubproblemState(st_.delta, st_.r, spec.hi - st_.delta, st_.delta - spec.lo,
                              st_.lam_ineq, st_.nu, st_.mu)
        M = kkt_matrix(spec, st_)
        rhs = kkt_residual(spec, st_).vector()
        dx, dl, dn = newton_step(spec, st_)
        sol = np.concatenate([dx, [dl], dn])
        assert np.linalg.norm(M @ sol + rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_newton_direction_on_near_quadratic():
    spec = SubproblemSpec(1.0, 1.0, 0.0, 5.0)
    for d in (0.05, -0.03):
        st_ = SubproblemState(d, 1.0, spec.hi - d, d - spec.lo, 1e-9, (0.0, 0.0), 1e-9)
        dx, _, _ = newton_step(spec, st_)
        newton = -coord_loss_grad(d, 1.0, 1.0) / coord_loss_hess(d, 1.0, 1.0)
        assert np.sign(dx[0]) == np.sign(newton)


def test_grid_oracle_on_random_specs(rng):
    worst = 0.0
    for _ in range(40):
        wp = rng.exponential() * (rng.random() > 0.1)
        wm = rng.exponential() * (rng.random() > 0.1)
        spec = SubproblemSpec(wp, wm, rng.normal(), rng.uniform(0, 2))
        delta, _ = solve_subproblem(spec)
        worst = max(worst, coord_loss(delta, wp, wm) - grid_min(wp, wm, spec.lo, spec.hi))
    assert worst <= 1e-5
