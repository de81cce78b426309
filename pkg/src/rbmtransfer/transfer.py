"""Adaptive feature transfer: frozen high-rank sub-networks plus new units.

A TargetRbm carries a frozen block of transferred weights W_t (with their
hidden biases) next to an adaptive block U. The up-pass always uses the
full weights, so transferred units emit their source features unchanged
("self-taught" features). The down-pass scales the transferred columns by
the influence factor theta in [0, 1]: at theta=0 the frozen block cannot
steer reconstruction and the adaptive units learn exactly as a
standalone RBM would; at theta=1 the transferred knowledge guides what
the new units learn. Only U, its biases and the visible biases are ever
updated.

Randomness discipline: the trainer draws shuffles, adaptive-block hidden
samples and visible samples from the main seeded stream in exactly the
order a standalone m-unit trainer would, and samples the frozen block
from a second stream derived from (seed, 1). That makes the theta=0 run
bit-identical to standalone training and keeps every sampling event
aligned across theta values.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .rbm import (
    GibbsState,
    TrainTrace,
    Velocity,
    hidden_probs,
    minibatches,
    sample_bernoulli,
    _sample_visible,
)


@dataclass(frozen=True)
class TransferSpec:
    """The knowledge package: frozen weights/biases, theta, and provenance."""

    W_t: np.ndarray  # (visN, k)
    b_t: np.ndarray  # (k,)
    theta: float
    source_indices: np.ndarray  # k source hidden indices, rank order

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.W_t.ndim != 2 or self.b_t.shape != (self.W_t.shape[1],):
            raise ValueError("transfer spec shapes inconsistent")
        if len(self.source_indices) != self.W_t.shape[1]:
            raise ValueError("source_indices length must equal k")
        if len(set(int(i) for i in self.source_indices)) != len(self.source_indices):
            raise ValueError("source_indices must be distinct")

    @property
    def k(self):
        return self.W_t.shape[1]


@dataclass(frozen=True)
class TargetRbm:
    """Frozen transferred block [0..k) concatenated with adaptive block [k..k+m)."""

    spec: TransferSpec
    U: np.ndarray  # (visN, m)
    b_u: np.ndarray  # (m,)
    b_vis: np.ndarray  # (visN,)
    visible_type: str = "binary"

    def __post_init__(self):
        if self.U.ndim != 2 or self.U.shape[1] < 1:
            raise ValueError("adaptive block must have at least one unit")
        if self.spec.k > 0 and self.spec.W_t.shape[0] != self.U.shape[0]:
            raise ValueError("transferred and adaptive blocks disagree on visN")
        if self.b_u.shape != (self.U.shape[1],) or self.b_vis.shape != (self.U.shape[0],):
            raise ValueError("bias shapes inconsistent")

    @property
    def visN(self):
        return self.U.shape[0]

    @property
    def m(self):
        return self.U.shape[1]

    @property
    def k(self):
        return self.spec.k

    def up_weights(self):
        """Full unscaled weights [W_t | U] used by the hidden-unit pass."""
        if self.k == 0:
            return self.U
        return np.hstack([self.spec.W_t, self.U])

    def down_weights(self):
        """Reconstruction weights [theta * W_t | U]."""
        if self.k == 0:
            return self.U
        return np.hstack([self.spec.theta * self.spec.W_t, self.U])

    def hidden_biases(self):
        return np.concatenate([self.spec.b_t, self.b_u])


def build_transfer_spec(source, ranking, k, theta):
    """Pick the top-k ranked source units and freeze their parameters."""
    if not (0 <= k <= source.hidN):
        raise ValueError(f"k={k} out of range 0..{source.hidN}")
    chosen = ranking.order[:k]
    return TransferSpec(
        W_t=source.W[:, chosen].copy(),
        b_t=source.b_hid[chosen].copy(),
        theta=float(theta),
        source_indices=np.asarray(chosen, dtype=np.int64).copy(),
    )


def init_target(spec, visN, m, visible_type="binary", seed=0):
    """Target model around a frozen spec: U ~ Normal(0, 0.01^2), biases zero."""
    if m < 1:
        raise ValueError("need at least one adaptive unit")
    if spec.k > 0 and spec.W_t.shape[0] != visN:
        raise ValueError(
            f"transferred weights have {spec.W_t.shape[0]} visible rows, target has {visN}; "
            "resize the data or the source model first"
        )
    rng = np.random.default_rng(seed)
    U = rng.normal(0.0, 0.01, size=(visN, m))
    return TargetRbm(spec=spec, U=U, b_u=np.zeros(m), b_vis=np.zeros(visN), visible_type=visible_type)


def target_hidden_probs(t, V):
    """p(h | v) over all k+m units using the full up-weights.

    The blocks are computed with separate matrix products so that the
    adaptive columns go through exactly the BLAS calls a standalone
    m-unit model would issue; the bit-level theta=0 decoupling contract
    depends on that.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if V.shape[1] != t.visN:
        raise ValueError(f"batch has {V.shape[1]} columns, model expects {t.visN}")
    adaptive = expit(V @ t.U + t.b_u)
    if t.k == 0:
        return adaptive
    frozen = expit(V @ t.spec.W_t + t.spec.b_t)
    return np.hstack([frozen, adaptive])


def target_visible_probs(t, H):
    """Visible activations from all k+m hiddens through the theta-scaled down-weights."""
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    pre = np.ascontiguousarray(H[:, t.k:]) @ t.U.T + t.b_vis
    if t.k > 0:
        pre = pre + t.spec.theta * (np.ascontiguousarray(H[:, :t.k]) @ t.spec.W_t.T)
    if t.visible_type == "binary":
        return expit(pre)
    return pre


def _sample_hiddens(t, h_probs, rng_main, rng_frozen):
    """Sample the adaptive block from the main stream, the frozen block from its own."""
    k = t.k
    adaptive = sample_bernoulli(h_probs[:, k:], rng_main)
    if k == 0:
        return adaptive
    frozen = sample_bernoulli(h_probs[:, :k], rng_frozen)
    return np.hstack([frozen, adaptive])


def adaptive_cd_step(t, batch, config, rng_main, rng_frozen, velocity=None):
    """One CD-k step updating only U, b_u and b_vis.

    The gradient statistics for U use the adaptive hidden columns; the
    frozen block contributes to the chain (via the up-pass and the
    theta-scaled down-pass) but receives no update.
    """
    if velocity is None:
        velocity = Velocity.zeros(t.visN, t.m)
    k = t.k
    v_plus = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    h_plus = target_hidden_probs(t, v_plus)
    h_sample = _sample_hiddens(t, h_plus, rng_main, rng_frozen)
    h_plus_sample = h_sample
    for step in range(config.cd_k):
        v_minus = target_visible_probs(t, h_sample)
        v_minus_sample = _sample_visible(t.visible_type, v_minus, rng_main)
        h_minus = target_hidden_probs(t, v_minus_sample)
        if step < config.cd_k - 1:
            h_sample = _sample_hiddens(t, h_minus, rng_main, rng_frozen)

    n = v_plus.shape[0]
    eta = config.learning_rate
    ha_plus = np.ascontiguousarray(h_plus[:, k:])
    ha_minus = np.ascontiguousarray(h_minus[:, k:])
    dU = (
        eta / n * (v_plus.T @ ha_plus - v_minus_sample.T @ ha_minus)
        - eta * config.weight_decay * t.U
        + config.momentum * velocity.dW
    )
    db_vis = (
        eta / n * (v_plus - v_minus_sample).sum(axis=0)
        + config.momentum * velocity.db_vis
    )
    db_u = (
        eta / n * (ha_plus - ha_minus).sum(axis=0)
        + config.momentum * velocity.db_hid
    )
    new_velocity = Velocity(dU, db_vis, db_u)

    b_u = t.b_u + db_u
    if config.sparsity_target is not None and config.sparsity_cost > 0:
        b_u = b_u + eta * config.sparsity_cost * (
            config.sparsity_target - ha_plus.mean(axis=0)
        )

    updated = TargetRbm(
        spec=t.spec,  # shared, never copied: the frozen block is immutable
        U=t.U + dU,
        b_u=b_u,
        b_vis=t.b_vis + db_vis,
        visible_type=t.visible_type,
    )
    for arr in (updated.U, updated.b_u, updated.b_vis):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite update; learning rate likely divergent")
    state = GibbsState(
        v_plus=v_plus,
        h_plus=h_plus,
        h_plus_sample=h_plus_sample,
        v_minus=v_minus,
        v_minus_sample=v_minus_sample,
        h_minus=h_minus,
    )
    return updated, state, new_velocity


def train_adaptive(t, data, config):
    """Train the adaptive parameters; the transferred block stays bit-identical."""
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    if x.shape[1] != t.visN:
        raise ValueError(f"data has {x.shape[1]} dims, target expects {t.visN}")
    rng_main = np.random.default_rng(config.seed)
    rng_frozen = np.random.default_rng([config.seed, 1])
    velocity = Velocity.zeros(t.visN, t.m)
    trace = TrainTrace()
    model = t
    for _ in range(config.epochs):
        t0 = time.perf_counter()
        perm = rng_main.permutation(x.shape[0])
        for idx in minibatches(x.shape[0], config.batch_size, perm):
            model, _, velocity = adaptive_cd_step(
                model, x[idx], config, rng_main, rng_frozen, velocity
            )
        recon = target_visible_probs(model, target_hidden_probs(model, x))
        trace.reconstruction_error.append(float(((x - recon) ** 2).mean()))
        trace.mean_hidden_activation.append(float(target_hidden_probs(model, x).mean()))
        trace.epoch_seconds.append(time.perf_counter() - t0)
    return model, trace


def extract_features(t, data):
    """Hidden probabilities of all k+m units on the data, full up-weights.

    Columns 0..k-1 are the self-taught features of the transferred units,
    columns k..k+m-1 the adaptive features.
    """
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    return target_hidden_probs(t, x)


def self_taught_features(source, data):
    """Baseline: the unmodified source model's hidden probabilities on target data."""
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    if x.size == 0 or x.shape[0] < 1:
        raise ValueError("empty dataset")
    return hidden_probs(source, x)
