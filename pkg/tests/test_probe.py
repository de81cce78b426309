"""Softmax probe: gradient correctness, determinism, aggregation."""

import numpy as np
import pytest

from rbmtransfer.probe import (
    ProbeConfig,
    SoftmaxModel,
    _one_hot,
    accuracy,
    loss_and_grad,
    mean_ci95,
    predict,
    softmax,
    train_softmax,
)


def finite_difference_grad(weights, bias, features, one_hot, l2, h=1e-5):
    gw = np.zeros_like(weights)
    for idx in np.ndindex(*weights.shape):
        wp, wm = weights.copy(), weights.copy()
        wp[idx] += h
        wm[idx] -= h
        lp, _, _ = loss_and_grad(wp, bias, features, one_hot, l2)
        lm, _, _ = loss_and_grad(wm, bias, features, one_hot, l2)
        gw[idx] = (lp - lm) / (2 * h)
    gb = np.zeros_like(bias)
    for j in range(bias.shape[0]):
        bp, bm = bias.copy(), bias.copy()
        bp[j] += h
        bm[j] -= h
        lp, _, _ = loss_and_grad(weights, bp, features, one_hot, l2)
        lm, _, _ = loss_and_grad(weights, bm, features, one_hot, l2)
        gb[j] = (lp - lm) / (2 * h)
    return gw, gb


def relative_error(a, b, floor=1e-3):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


class TestTrainSoftmax:
    def test_separable_data_reaches_perfect_accuracy(self, rng):
        n = 60
        features = np.vstack([
            rng.normal([-2, -2], 0.3, size=(n, 2)),
            rng.normal([2, 2], 0.3, size=(n, 2)),
        ])
        labels = np.array([0] * n + [1] * n)
        model = train_softmax(features, labels, ProbeConfig(epochs=200, seed=0))
        assert accuracy(predict(model, features), labels) == 1.0

    def test_huge_l2_crushes_weights(self, rng):
        features = rng.normal(size=(40, 3))
        labels = rng.integers(0, 2, size=40)
        model = train_softmax(features, labels, ProbeConfig(epochs=100, l2=1e6, seed=0))
        assert np.linalg.norm(model.weights) <= 1e-2

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(5):
            n, d, c = 8, 3, 3
            features = rng.normal(size=(n, d))
            labels = rng.integers(0, c, size=n)
            labels[:c] = np.arange(c)  # all classes present
            one_hot = _one_hot(labels, np.unique(labels))
            weights = rng.normal(scale=0.5, size=(d, c))
            bias = rng.normal(scale=0.5, size=c)
            _, gw, gb = loss_and_grad(weights, bias, features, one_hot, l2=0.01)
            fw, fb = finite_difference_grad(weights, bias, features, one_hot, 0.01)
            assert relative_error(gw, fw).max() <= 1e-6
            assert relative_error(gb, fb).max() <= 1e-6

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            train_softmax(np.zeros((4, 2)), np.zeros(4, dtype=int), ProbeConfig())

    def test_deterministic(self, rng):
        features = rng.normal(size=(30, 4))
        labels = rng.integers(0, 3, size=30)
        a = train_softmax(features, labels, ProbeConfig(epochs=20, seed=9))
        b = train_softmax(features, labels, ProbeConfig(epochs=20, seed=9))
        assert a.weights.tobytes() == b.weights.tobytes()

    def test_loss_history_non_increasing(self, rng):
        features = rng.normal(size=(50, 3))
        labels = rng.integers(0, 3, size=50)
        # deliberately large rate to force halvings
        model = train_softmax(features, labels,
                              ProbeConfig(learning_rate=50.0, epochs=60, seed=2))
        diffs = np.diff(model.loss_history)
        assert np.all(diffs <= 1e-12)
        assert model.rate_halvings  # the backoff fired and was recorded
        epoch, new_rate = model.rate_halvings[0]
        assert new_rate < 50.0


class TestPredict:
    def test_zero_model_predicts_lowest_label(self):
        model = SoftmaxModel(weights=np.zeros((3, 4)), bias=np.zeros(4),
                             class_labels=np.array([2, 5, 7, 9]))
        np.testing.assert_array_equal(predict(model, np.ones((5, 3))), 2)

    def test_one_hot_identity_recovery(self):
        model = SoftmaxModel(weights=np.eye(4), bias=np.zeros(4),
                             class_labels=np.arange(4))
        np.testing.assert_array_equal(predict(model, np.eye(4)), np.arange(4))

    def test_scalar_oracle(self, rng):
        model = SoftmaxModel(weights=rng.normal(size=(3, 4)),
                             bias=rng.normal(size=4),
                             class_labels=np.array([1, 3, 5, 8]))
        features = rng.normal(size=(10, 3))
        got = predict(model, features)
        for b in range(10):
            scores = [features[b] @ model.weights[:, j] + model.bias[j] for j in range(4)]
            assert got[b] == model.class_labels[int(np.argmax(scores))]

    def test_invariant_to_constant_score_shift(self, rng):
        w = rng.normal(size=(3, 4))
        features = rng.normal(size=(10, 3))
        a = SoftmaxModel(weights=w, bias=np.zeros(4), class_labels=np.arange(4))
        b = SoftmaxModel(weights=w, bias=np.full(4, 17.5), class_labels=np.arange(4))
        np.testing.assert_array_equal(predict(a, features), predict(b, features))


class TestSoftmaxFunction:
    def test_rows_sum_to_one(self, rng):
        p = softmax(rng.normal(scale=30, size=(50, 6)))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0)


class TestAccuracy:
    def test_identical(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_disjoint(self):
        assert accuracy([1, 1], [2, 2]) == 0.0

    def test_half(self):
        assert accuracy([1, 2], [1, 3]) == 0.5


class TestMeanCi95:
    def test_constant_values(self):
        mean, half = mean_ci95([0.5, 0.5, 0.5])
        assert mean == 0.5 and half == 0.0
        # non-dyadic constants accumulate at most rounding noise
        _, half = mean_ci95([0.4, 0.4, 0.4])
        assert half < 1e-15

    def test_two_point_plug_in(self):
        mean, half = mean_ci95([0.0, 1.0])
        assert mean == 0.5
        assert abs(half - 1.96 * np.sqrt(0.5) / np.sqrt(2)) < 1e-12

    def test_oracle(self, rng):
        values = rng.random(17)
        mean, half = mean_ci95(values)
        assert abs(mean - values.mean()) <= 1e-12
        sample_std = np.sqrt(((values - values.mean()) ** 2).sum() / 16)
        assert abs(half - 1.96 * sample_std / np.sqrt(17)) <= 1e-12

    def test_needs_two(self):
        with pytest.raises(ValueError):
            mean_ci95([0.5])
