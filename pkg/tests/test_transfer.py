"""Frozen-block transfer: decoupling, immutability, feature layout."""

import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import TapeRng
from rbmtransfer.ranking import score_features
from rbmtransfer.rbm import Rbm, TrainConfig, hidden_probs, init_rbm, train
from rbmtransfer.transfer import (
    TargetRbm,
    TransferSpec,
    adaptive_cd_step,
    build_transfer_spec,
    extract_features,
    init_target,
    self_taught_features,
    train_adaptive,
)


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def source_with_scores(scores, rng, visN=4):
    signs = rng.choice([-1.0, 1.0], size=(visN, len(scores)))
    W = signs * np.asarray(scores, dtype=float)
    return Rbm(W=W, b_vis=rng.normal(size=visN), b_hid=rng.normal(size=len(scores)))


@pytest.fixture
def binary_data(rng):
    return (rng.random((30, 4)) > 0.5).astype(float)


class TestBuildSpec:
    def test_k_zero_empty(self, rng):
        src = source_with_scores([3.0, 1.0, 2.0], rng)
        spec = build_transfer_spec(src, score_features(src), 0, 0.5)
        assert spec.k == 0 and spec.W_t.shape == (4, 0)

    def test_full_k_is_column_permutation(self, rng):
        src = source_with_scores([3.0, 1.0, 2.0], rng)
        ranking = score_features(src)
        spec = build_transfer_spec(src, ranking, 3, 1.0)
        np.testing.assert_array_equal(spec.W_t, src.W[:, ranking.order])
        assert sorted(spec.source_indices.tolist()) == [0, 1, 2]

    def test_rank_order_selection(self, rng):
        src = source_with_scores([3.0, 1.0, 2.0], rng)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        np.testing.assert_array_equal(spec.source_indices, [0, 2])
        np.testing.assert_array_equal(spec.b_t, src.b_hid[[0, 2]])

    def test_k_out_of_range(self, rng):
        src = source_with_scores([1.0], rng)
        with pytest.raises(ValueError, match="out of range"):
            build_transfer_spec(src, score_features(src), 2, 0.0)

    def test_theta_validated(self, rng):
        src = source_with_scores([1.0], rng)
        with pytest.raises(ValueError, match="theta"):
            build_transfer_spec(src, score_features(src), 1, 1.5)


class TestInitTarget:
    def test_dimension_mismatch(self, rng):
        src = source_with_scores([1.0, 2.0], rng, visN=4)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        with pytest.raises(ValueError, match="resize"):
            init_target(spec, 7, 3)

    def test_adaptive_block_matches_standalone_init(self, rng):
        src = source_with_scores([1.0, 2.0], rng, visN=4)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        t = init_target(spec, 4, 3, seed=99)
        alone = init_rbm(4, 3, seed=99)
        assert t.U.tobytes() == alone.W.tobytes()
        assert not t.b_u.any() and not t.b_vis.any()


class TestTrainAdaptive:
    def test_theta_zero_bit_decoupling(self, rng, binary_data):
        src = source_with_scores([2.0, 0.5, 1.0, 3.0], rng)
        spec = build_transfer_spec(src, score_features(src), 3, 0.0)
        cfg = TrainConfig(learning_rate=0.3, epochs=4, batch_size=7, seed=5)
        target, _ = train_adaptive(init_target(spec, 4, 5, seed=5), binary_data, cfg)
        alone, _ = train(init_rbm(4, 5, seed=5), binary_data, cfg)
        assert target.U.tobytes() == alone.W.tobytes()
        assert target.b_u.tobytes() == alone.b_hid.tobytes()
        assert target.b_vis.tobytes() == alone.b_vis.tobytes()

    def test_frozen_block_immutable(self, rng, binary_data):
        src = source_with_scores([2.0, 0.5, 1.0], rng)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        w_before, b_before = spec.W_t.tobytes(), spec.b_t.tobytes()
        cfg = TrainConfig(learning_rate=0.4, epochs=5, batch_size=10, seed=1)
        target, _ = train_adaptive(init_target(spec, 4, 2, seed=1), binary_data, cfg)
        assert target.spec.W_t.tobytes() == w_before
        assert target.spec.b_t.tobytes() == b_before

    def test_deterministic(self, rng, binary_data):
        src = source_with_scores([2.0, 1.0], rng)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        cfg = TrainConfig(epochs=3, batch_size=8, seed=17)
        a, _ = train_adaptive(init_target(spec, 4, 3, seed=17), binary_data, cfg)
        b, _ = train_adaptive(init_target(spec, 4, 3, seed=17), binary_data, cfg)
        assert a.U.tobytes() == b.U.tobytes()

    def test_hand_computed_adaptive_step(self):
        # visN=4, k=2 frozen units, m=2 adaptive units, one CD-1 step
        W_t = np.array([[1.0, -0.5], [0.3, 0.8], [-0.2, 0.1], [0.6, -0.4]])
        b_t = np.array([0.2, -0.1])
        U = np.array([[0.1, -0.2], [0.4, 0.3], [-0.3, 0.2], [0.5, -0.1]])
        b_u = np.array([-0.2, 0.1])
        b_vis = np.array([0.05, -0.1, 0.2, 0.0])
        theta = 0.7
        spec = TransferSpec(W_t=W_t, b_t=b_t, theta=theta,
                            source_indices=np.array([0, 1]))
        t = TargetRbm(spec=spec, U=U.copy(), b_u=b_u.copy(), b_vis=b_vis.copy())
        batch = np.array([[1.0, 0.0, 1.0, 1.0]])
        cfg = TrainConfig(learning_rate=0.5, momentum=0.0, weight_decay=0.002,
                          batch_size=1)
        u_adaptive = [0.4, 0.7]
        u_frozen = [0.6, 0.2]
        u_visible = [0.3, 0.8, 0.5, 0.1]
        out, state, vel = adaptive_cd_step(
            t, batch, cfg,
            TapeRng(uniforms=u_adaptive + u_visible),
            TapeRng(uniforms=u_frozen),
        )

        # scalar oracle with the same tapes
        v = batch[0]
        h_plus = np.array(
            [sigmoid(v @ W_t[:, j] + b_t[j]) for j in range(2)]
            + [sigmoid(v @ U[:, j] + b_u[j]) for j in range(2)]
        )
        h_hat = np.array([
            float(u_frozen[0] < h_plus[0]), float(u_frozen[1] < h_plus[1]),
            float(u_adaptive[0] < h_plus[2]), float(u_adaptive[1] < h_plus[3]),
        ])
        v_minus = np.array([
            sigmoid(theta * (h_hat[:2] @ W_t[i, :]) + h_hat[2:] @ U[i, :] + b_vis[i])
            for i in range(4)
        ])
        v_hat = (np.array(u_visible) < v_minus).astype(float)
        h_minus = np.array(
            [sigmoid(v_hat @ W_t[:, j] + b_t[j]) for j in range(2)]
            + [sigmoid(v_hat @ U[:, j] + b_u[j]) for j in range(2)]
        )
        dU = 0.5 * (np.outer(v, h_plus[2:]) - np.outer(v_hat, h_minus[2:])) - 0.5 * 0.002 * U
        db_u = 0.5 * (h_plus[2:] - h_minus[2:])
        db_vis = 0.5 * (v - v_hat)

        np.testing.assert_allclose(out.U, U + dU, atol=1e-12)
        np.testing.assert_allclose(out.b_u, b_u + db_u, atol=1e-12)
        np.testing.assert_allclose(out.b_vis, b_vis + db_vis, atol=1e-12)
        np.testing.assert_array_equal(out.spec.W_t, W_t)
        np.testing.assert_array_equal(state.h_plus[0], h_plus)

    def test_theta_continuity_single_step(self, rng):
        # same tapes across theta: ||dU(eps) - dU(0)|| <= C * eps
        visN, k, m = 5, 3, 2
        src = source_with_scores(rng.uniform(0.5, 2.0, size=4), rng, visN=visN)
        ranking = score_features(src)
        batch = (rng.random((6, visN)) > 0.5).astype(float)
        cfg = TrainConfig(learning_rate=0.2, momentum=0.0, batch_size=6)
        tape_a = rng.random(200).tolist()
        tape_f = rng.random(200).tolist()

        def delta_u(theta):
            spec = build_transfer_spec(src, ranking, k, theta)
            t = init_target(spec, visN, m, seed=3)
            out, _, _ = adaptive_cd_step(
                t, batch, cfg,
                TapeRng(uniforms=list(tape_a)), TapeRng(uniforms=list(tape_f)),
            )
            return out.U - t.U

        base = delta_u(0.0)
        d3 = np.linalg.norm(delta_u(1e-3) - base)
        d4 = np.linalg.norm(delta_u(1e-4) - base)
        c = d3 / 1e-3
        assert d4 <= c * 1e-4 * 1.5 + 1e-15

    def test_nonfinite_update_raises(self, rng, binary_data):
        src = source_with_scores([1.0], rng)
        spec = build_transfer_spec(src, score_features(src), 1, 1.0)
        cfg = TrainConfig(learning_rate=1e300, epochs=2, batch_size=30, seed=0)
        with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
            train_adaptive(init_target(spec, 4, 2, seed=0), binary_data, cfg)


class TestFeatures:
    def test_k_zero_equals_plain_hidden_probs(self, rng, binary_data):
        spec = TransferSpec(W_t=np.zeros((4, 0)), b_t=np.zeros(0), theta=0.0,
                            source_indices=np.array([], dtype=np.int64))
        t = init_target(spec, 4, 5, seed=2)
        plain = Rbm(W=t.U, b_vis=t.b_vis, b_hid=t.b_u)
        np.testing.assert_array_equal(
            extract_features(t, binary_data), hidden_probs(plain, binary_data)
        )

    def test_block_structure(self, rng, binary_data):
        src = source_with_scores([2.0, 1.0, 0.5], rng)
        spec = build_transfer_spec(src, score_features(src), 2, 0.3)
        t = init_target(spec, 4, 3, seed=4)
        feats = extract_features(t, binary_data)
        assert feats.shape == (30, 5)
        frozen_alone = hidden_probs(
            Rbm(W=spec.W_t, b_vis=np.zeros(4), b_hid=spec.b_t), binary_data
        )
        adaptive_alone = hidden_probs(
            Rbm(W=t.U, b_vis=np.zeros(4), b_hid=t.b_u), binary_data
        )
        np.testing.assert_allclose(feats[:, :2], frozen_alone, atol=1e-14)
        np.testing.assert_allclose(feats[:, 2:], adaptive_alone, atol=1e-14)

    def test_transferred_features_match_source_units(self, rng, binary_data):
        src = source_with_scores([2.0, 1.0, 0.5, 3.0], rng)
        ranking = score_features(src)
        spec = build_transfer_spec(src, ranking, 3, 1.0)
        t = init_target(spec, 4, 2, seed=0)
        feats = extract_features(t, binary_data)
        source_feats = hidden_probs(src, binary_data)
        np.testing.assert_array_equal(
            feats[:, :3], source_feats[:, ranking.order[:3]]
        )

    def test_self_taught_block_invariant_under_training(self, rng, binary_data):
        src = source_with_scores([2.0, 1.0], rng)
        spec = build_transfer_spec(src, score_features(src), 2, 1.0)
        t0 = init_target(spec, 4, 3, seed=8)
        cfg = TrainConfig(epochs=4, batch_size=10, seed=8)
        t1, _ = train_adaptive(t0, binary_data, cfg)
        np.testing.assert_array_equal(
            extract_features(t0, binary_data)[:, :2],
            extract_features(t1, binary_data)[:, :2],
        )


class TestSelfTaught:
    def test_matches_full_transfer_block_modulo_rank_order(self, rng, binary_data):
        src = source_with_scores([0.5, 2.0, 1.0], rng)
        ranking = score_features(src)
        spec = build_transfer_spec(src, ranking, 3, 1.0)
        t = init_target(spec, 4, 1, seed=0)
        stl = self_taught_features(src, binary_data)
        transferred = extract_features(t, binary_data)[:, :3]
        np.testing.assert_array_equal(transferred, stl[:, ranking.order])

    def test_zero_parameter_source(self, binary_data):
        src = Rbm(W=np.zeros((4, 3)), b_vis=np.zeros(4), b_hid=np.zeros(3))
        np.testing.assert_array_equal(self_taught_features(src, binary_data), 0.5)

    def test_empty_dataset_rejected(self, rng):
        src = source_with_scores([1.0], rng)
        with pytest.raises(ValueError, match="empty"):
            self_taught_features(src, np.zeros((0, 4)))
