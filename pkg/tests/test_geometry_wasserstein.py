"""Distortion geometry and the exact transport solver.

The key cross-check here is the two-route identity: the distortion of a
codebook equals the squared W2 distance between the empirical measure and
the codebook's quantized law, with the W2 side computed by linear
programming rather than nearest-neighbor geometry.
"""

import numpy as np
import pytest

from cclvq.errors import DimensionMismatchError, ValidationError
from cclvq.geometry import (
    DiscreteMeasure,
    distortion,
    loss_values,
    nearest_indices,
    quantized_law,
)
from cclvq.wasserstein import best_supported_w2, w2_1d, w2_discrete, w2_to_quantized


def measure(points, weights):
    return DiscreteMeasure(np.asarray(points, dtype=np.float64), np.asarray(weights, dtype=np.float64))


def test_loss_values_squared_and_l1():
    preds = np.array([[0.0, 0.0], [1.0, 2.0]])
    ys = np.array([[3.0, 4.0], [1.0, 0.0]])
    assert np.allclose(loss_values(preds, ys, "squared"), [25.0, 4.0])
    assert np.allclose(loss_values(preds, ys, "l1"), [7.0, 2.0])
    with pytest.raises(ValidationError):
        loss_values(preds, ys, "hinge")


def test_distortion_hand_value():
    ys = np.array([[0.0], [1.0], [10.0]])
    cb = np.array([[0.0], [10.0]])
    # nearest distances 0, 1, 0 -> mean 1/3
    assert distortion(ys, cb) == pytest.approx(1 / 3)


def test_nearest_indices_smallest_index_on_tie():
    ys = np.array([[1.0]])
    cb = np.array([[0.0], [2.0]])
    assert nearest_indices(ys, cb)[0] == 0


def test_quantized_law_weights_are_cell_frequencies():
    ys = np.array([[0.0], [0.1], [0.2], [5.0]])
    cb = np.array([[0.0], [5.0]])
    law = quantized_law(ys, cb)
    assert np.allclose(law.weights, [0.75, 0.25])
    assert np.array_equal(law.points, cb)


def test_discrete_measure_validation():
    with pytest.raises(ValidationError):
        measure([[0.0]], [0.5])  # weights don't sum to 1
    with pytest.raises(ValidationError):
        measure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(DimensionMismatchError):
        w2_discrete(measure([[0.0]], [1.0]), measure([[0.0, 1.0]], [1.0]))


# -- transport --------------------------------------------------------------


def test_w2_between_point_masses_is_distance():
    mu = measure([[0.0, 0.0]], [1.0])
    nu = measure([[3.0, 4.0]], [1.0])
    val, plan = w2_discrete(mu, nu)
    assert val == pytest.approx(5.0, abs=1e-12)
    assert plan.cost(mu, nu) == pytest.approx(25.0, abs=1e-12)


def test_w2_plan_marginals():
    rng = np.random.default_rng(0)
    mu = measure(rng.normal(size=(4, 2)), np.full(4, 0.25))
    w = rng.random(3)
    nu = measure(rng.normal(size=(3, 2)), w / w.sum())
    _, plan = w2_discrete(mu, nu)
    assert np.abs(plan.mass.sum(axis=1) - mu.weights).max() < 1e-9
    assert np.abs(plan.mass.sum(axis=0) - nu.weights).max() < 1e-9


def test_w2_is_symmetric_and_zero_on_self():
    rng = np.random.default_rng(3)
    mu = measure(rng.normal(size=(5, 1)), np.full(5, 0.2))
    w = rng.random(4)
    nu = measure(rng.normal(size=(4, 1)), w / w.sum())
    ab, _ = w2_discrete(mu, nu)
    ba, _ = w2_discrete(nu, mu)
    assert ab == pytest.approx(ba, abs=1e-10)
    self_dist, _ = w2_discrete(mu, mu)
    assert self_dist < 1e-9


def test_lp_route_agrees_with_sorted_1d_route():
    """Two independent solvers for the 1-D case must coincide."""
    rng = np.random.default_rng(7)
    for _ in range(25):
        a, b = rng.integers(2, 9), rng.integers(2, 9)
        wa, wb = rng.random(a) + 0.1, rng.random(b) + 0.1
        mu = measure(rng.normal(size=(a, 1)) * 3, wa / wa.sum())
        nu = measure(rng.normal(size=(b, 1)) * 3, wb / wb.sum())
        lp, _ = w2_discrete(mu, nu)
        assert lp == pytest.approx(w2_1d(mu, nu), abs=1e-9)


def test_w2_1d_rejects_multidim():
    mu = measure([[0.0, 1.0]], [1.0])
    with pytest.raises(ValidationError):
        w2_1d(mu, mu)


def test_quantized_transport_squared_equals_distortion():
    rng = np.random.default_rng(5)
    ys = rng.normal(size=(30, 2))
    cb = rng.normal(size=(4, 2))
    assert w2_to_quantized(ys, cb) ** 2 == pytest.approx(distortion(ys, cb), abs=1e-9)


def test_best_supported_w2_is_sqrt_distortion():
    rng = np.random.default_rng(6)
    ys = rng.normal(size=(20, 3))
    support = rng.normal(size=(5, 3))
    assert best_supported_w2(ys, support) == pytest.approx(
        np.sqrt(distortion(ys, support)), abs=1e-9
    )


def test_best_supported_w2_beats_quantized_weights_never():
    """Freely chosen weights can't do better than the nearest-cell law."""
    rng = np.random.default_rng(8)
    ys = rng.normal(size=(15, 1))
    support = rng.normal(size=(3, 1))
    law = quantized_law(ys, support)
    emp = measure(ys, np.full(15, 1 / 15))
    via_law, _ = w2_discrete(emp, law)
    assert best_supported_w2(ys, support) <= via_law + 1e-9
