import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breglr.auxiliary import coord_weights
from breglr.bregman import ConstraintMatrix, loss_from_margins, margins, model_distribution
from breglr.trainer import (
    TrainConfig,
    allocate_budget,
    drop_features,
    per_coord_budget,
    predict,
    train,
)

from helpers import random_instance


def separable_1d():
    x = np.array([0.2, 0.5, 0.9, -0.3, -0.7, -1.0])
    return ConstraintMatrix.from_features(x[:, None], np.sign(x))


def lam_history(trace, n):
    return np.cumsum(np.vstack([np.zeros(n)] + trace.deltas), axis=0)


def test_separable_large_budget_keeps_descending():
    params, trace = train(separable_1d(), TrainConfig(budget=10.0, max_outer=40))
    # the whole budget is spent in the first sweep, after which nothing moves
    steps = np.diff(trace.losses)
    assert steps[0] < 0 and np.all(steps <= 0)
    assert params.values[0] == 10.0
    assert trace.final.train_err == 0.0
    params, trace = train(separable_1d(), TrainConfig(budget=10.0, budget_mode="aggregate"))
    assert params.values[0] == pytest.approx(10.0)


def test_separable_small_budget_matches_grid():
    A = separable_1d()
    params, trace = train(A, TrainConfig(budget=0.5))
    assert params.values[0] == pytest.approx(0.5, abs=1e-12)
    grid = np.linspace(-0.5, 0.5, 10_001)
    best = min(loss_from_margins(margins(A, np.array([g]))) for g in grid)
    assert trace.final.loss == pytest.approx(best, abs=1e-4)


def test_zero_iterations_is_m_log_two():
    A = random_instance(np.random.default_rng(0), 3, 17)
    params, trace = train(A, TrainConfig(max_outer=0))
    assert trace.final.loss == pytest.approx(17 * math.log(2), rel=1e-15)
    np.testing.assert_array_equal(params.values, 0.0)


def test_rejects_unnormalized_matrix():
    A = ConstraintMatrix(np.full((3, 4), 0.5), np.ones(4))
    with pytest.raises(ValueError):
        train(A)


@pytest.mark.parametrize("mode", ["per-coord", "aggregate"])
def test_descent_certificate_and_feasibility(rng, mode):
    A = random_instance(rng, 8, 60)
    cfg = TrainConfig(budget=6.0, budget_mode=mode, max_outer=60)
    params, trace = train(A, cfg)
    rows = trace.rows
    for prev, row in zip(rows, rows[1:]):
        change = row.loss - prev.loss
        assert change <= row.aux + 1e-9
        assert row.aux <= row.bound + 1e-9
        assert row.bound <= 1e-12
    for lam in lam_history(trace, 8):
        if mode == "aggregate":
            assert np.abs(lam).sum() <= 6.0 + 1e-9
        else:
            assert np.all(np.abs(lam) <= 6.0 / 8 + 1e-12)
    assert params.is_feasible()


def test_fixed_point_is_stationary(rng):
    A = random_instance(rng, 5, 40)
    u = 0.6
    params, trace = train(A, TrainConfig(budget=5 * u, tol_abs=1e-13, tol_rel=1e-14, max_outer=2000))
    lam = params.values
    f0 = loss_from_margins(margins(A, lam))
    h = 1e-6
    for j in range(5):
        for sgn in (1, -1):
            probe = lam.copy()
            probe[j] = np.clip(probe[j] + sgn * h, -u, u)
            # a feasible step can gain at most a second-order amount
            assert loss_from_margins(margins(A, probe)) >= f0 - 1e-9


def test_inactive_coordinates_stay_put(rng):
    A = random_instance(rng, 30, 60)
    params, trace = train(A, TrainConfig(budget=0.5, budget_mode="aggregate", max_outer=200,
                                         keep_active=(29,)))
    assert not params.active.all()
    counts = trace.column("active_features")
    assert np.all(np.diff(counts) <= 0)
    # after the last drop, dropped coordinates never move again
    last = int(np.flatnonzero(np.diff(counts))[-1]) + 1
    idle = np.array(trace.deltas[last:])[:, ~params.active]
    assert idle.size and np.all(idle == 0.0)
    assert np.all(np.abs(params.values[~params.active]) < 1e-6)


def test_drop_rule():
    deltas = [np.array([1e-7, 1e-3, 1e-8])] * 3
    lam = np.array([1e-8, 0.0, 0.5])
    active = drop_features(deltas, lam, np.ones(3, bool), 1e-6)
    np.testing.assert_array_equal(active, [False, True, True])
    np.testing.assert_array_equal(drop_features(deltas, lam, np.ones(3, bool), 0.0), True)
    # only two quiet sweeps so far
    np.testing.assert_array_equal(drop_features(deltas[:2], lam, np.ones(3, bool), 1e-6), True)
    np.testing.assert_array_equal(
        drop_features(deltas, np.zeros(3), np.ones(3, bool), 1e-6, exempt=(0,)), [True, True, False])
    with pytest.raises(ValueError):
        drop_features([], lam, np.ones(3, bool), 1e-6)


def test_inert_problem_halts():
    # every coordinate has zero weight, so nothing ever moves
    A = ConstraintMatrix(np.zeros((3, 4)), np.ones(4))
    params, trace = train(A, TrainConfig(budget=1.0))
    assert len(trace.rows) == 2 and trace.stop_reason == "converged"
    np.testing.assert_array_equal(params.values, 0.0)


def test_predict_examples(rng):
    x = rng.normal(size=(5, 3))
    label, prob = predict(np.zeros(3), x)
    np.testing.assert_array_equal(prob, 0.5)
    np.testing.assert_array_equal(label, 1)
    label, prob = predict(np.array([math.log(3)]), np.array([[1.0]]))
    assert prob[0] == pytest.approx(0.75, rel=1e-15) and label[0] == 1
    with pytest.raises(ValueError):
        predict(np.zeros(2), x)


def test_training_error_matches_indicator_loop(rng):
    A = random_instance(rng, 4, 50)
    params, trace = train(A, TrainConfig(budget=8.0, max_outer=30))
    h = (A.entries * A.labels).T
    miss = sum(1 for i in range(50) if A.labels[i] * (h[i] @ params.values) <= 0)
    assert trace.final.train_err == pytest.approx(miss / 50)


def test_budget_split_and_allocation(rng):
    assert per_coord_budget(TrainConfig(budget=6.0), 3).tolist() == [2.0, 2.0, 2.0]
    with pytest.raises(ValueError):
        per_coord_budget(TrainConfig(budget_u=(1.0, 2.0)), 3)
    A = random_instance(rng, 6, 40)
    lam = rng.normal(size=6) * 0.3
    w = coord_weights(model_distribution(A, lam), A)
    u, tau = allocate_budget(w, lam, 1.0)
    assert u.sum() <= 1.0 + 1e-12 and tau > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5))
def test_allocation_never_exceeds_ball(seed, radius):
    r = np.random.default_rng(seed)
    A = random_instance(r, int(r.integers(2, 10)), 30)
    lam = r.normal(size=A.n_features) * 30
    w = coord_weights(model_distribution(A, lam), A)
    u, _ = allocate_budget(w, lam, radius)
    assert u.sum() <= radius * (1 + 1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(budget_mode="sideways")
    with pytest.raises(ValueError):
        TrainConfig(budget=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(tol_abs=0.0)
    with pytest.raises(ValueError):
        TrainConfig(drop_patience=0)
