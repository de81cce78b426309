"""Restricted Boltzmann machine with contrastive-divergence training.

Models are immutable snapshots; every update step returns a new Rbm.
Training is a pure function of (model, data, config): repeated runs with
the same seed are bit-identical. Random draws are always consumed in
row-major order, which is the reproducibility contract all transfer and
experiment code relies on.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

ENUMERATION_LIMIT = 20  # largest layer size we will exhaustively enumerate


@dataclass(frozen=True)
class Rbm:
    """Weights W (visN x hidN), biases, and the visible unit type."""

    W: np.ndarray
    b_vis: np.ndarray
    b_hid: np.ndarray
    visible_type: str = "binary"

    def __post_init__(self):
        if self.visible_type not in ("binary", "gaussian"):
            raise ValueError(f"unknown visible_type {self.visible_type!r}")
        if self.W.ndim != 2 or min(self.W.shape) < 1:
            raise ValueError("W must be a non-empty visN x hidN matrix")
        if self.b_vis.shape != (self.W.shape[0],) or self.b_hid.shape != (self.W.shape[1],):
            raise ValueError("bias shapes inconsistent with W")
        for arr in (self.W, self.b_vis, self.b_hid):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")

    @property
    def visN(self):
        return self.W.shape[0]

    @property
    def hidN(self):
        return self.W.shape[1]


@dataclass
class TrainConfig:
    """Hyper-parameters for CD training.

    Defaults are conventional choices; sparsity regularization is off
    unless both sparsity_target and sparsity_cost are set.
    """

    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 100
    cd_k: int = 1
    momentum: float = 0.5
    weight_decay: float = 0.0002
    sparsity_target: Optional[float] = None
    sparsity_cost: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.cd_k < 1 or self.batch_size < 1:
            raise ValueError("cd_k and batch_size must be >= 1")
        if not (0 <= self.momentum < 1):
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or self.sparsity_cost < 0:
            raise ValueError("weight_decay and sparsity_cost must be non-negative")
        if self.sparsity_target is not None and not (0 < self.sparsity_target < 1):
            raise ValueError("sparsity_target must lie in (0, 1)")


@dataclass
class GibbsState:
    """Intermediate quantities of one CD step (probabilities and samples)."""

    v_plus: np.ndarray
    h_plus: np.ndarray
    h_plus_sample: np.ndarray
    v_minus: np.ndarray
    v_minus_sample: np.ndarray
    h_minus: np.ndarray


@dataclass
class Velocity:
    """Momentum accumulator for (W, b_vis, b_hid) updates."""

    dW: np.ndarray
    db_vis: np.ndarray
    db_hid: np.ndarray

    @classmethod
    def zeros(cls, visN, hidN):
        return cls(np.zeros((visN, hidN)), np.zeros(visN), np.zeros(hidN))


@dataclass
class TrainTrace:
    reconstruction_error: list = field(default_factory=list)
    mean_hidden_activation: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)


def init_rbm(visN, hidN, visible_type="binary", seed=0):
    """Fresh model: W ~ Normal(0, 0.01^2) from the seeded generator, zero biases."""
    if visN < 1 or hidN < 1:
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, 0.01, size=(visN, hidN))
    return Rbm(W=W, b_vis=np.zeros(visN), b_hid=np.zeros(hidN), visible_type=visible_type)


def hidden_probs(rbm, V):
    """p(h=1 | v) for a batch: sigmoid(V @ W + b_hid)."""
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if V.shape[1] != rbm.visN:
        raise ValueError(f"batch has {V.shape[1]} columns, model expects {rbm.visN}")
    return expit(V @ rbm.W + rbm.b_hid)


def visible_probs(rbm, H):
    """Visible activations given hiddens: sigmoid for binary, mean field for gaussian."""
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    if H.shape[1] != rbm.hidN:
        raise ValueError(f"batch has {H.shape[1]} columns, model expects {rbm.hidN}")
    pre = H @ rbm.W.T + rbm.b_vis
    if rbm.visible_type == "binary":
        return expit(pre)
    return pre  # gaussian visible units, unit variance convention


def sample_bernoulli(probs, rng):
    """Binary samples: entry is 1 iff a uniform draw < prob.

    Draws are consumed in row-major order; this ordering is part of the
    reproducibility contract.
    """
    return (rng.random(probs.shape) < probs).astype(np.float64)


def _sample_visible(visible_type, v_probs, rng):
    if visible_type == "binary":
        return sample_bernoulli(v_probs, rng)
    return v_probs + rng.standard_normal(v_probs.shape)


def gibbs_chain(rbm, batch, cd_k, rng):
    """Run a CD-k alternating chain from the data batch.

    Positive statistics pair the data with hidden probabilities; negative
    statistics pair the final sampled visibles with the hidden
    probabilities computed from them.
    """
    v_plus = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    h_plus = hidden_probs(rbm, v_plus)
    h_sample = sample_bernoulli(h_plus, rng)
    h_plus_sample = h_sample
    for step in range(cd_k):
        v_minus = visible_probs(rbm, h_sample)
        v_minus_sample = _sample_visible(rbm.visible_type, v_minus, rng)
        h_minus = hidden_probs(rbm, v_minus_sample)
        if step < cd_k - 1:
            h_sample = sample_bernoulli(h_minus, rng)
    return GibbsState(
        v_plus=v_plus,
        h_plus=h_plus,
        h_plus_sample=h_plus_sample,
        v_minus=v_minus,
        v_minus_sample=v_minus_sample,
        h_minus=h_minus,
    )


def cd_update(rbm, batch, config, rng, velocity=None):
    """One CD-k parameter update; returns (new model, gibbs state, velocity).

    dW = eta/n (V+^T H+ - Vhat-^T H-) - eta*weight_decay*W + momentum*dW_prev,
    with analogous bias updates from activation differences. The sparsity
    penalty, when configured, adds eta*cost*(target - mean H+) to the
    hidden biases outside the momentum accumulator.
    """
    if velocity is None:
        velocity = Velocity.zeros(rbm.visN, rbm.hidN)
    state = gibbs_chain(rbm, batch, config.cd_k, rng)
    n = state.v_plus.shape[0]
    eta = config.learning_rate

    dW = (
        eta / n * (state.v_plus.T @ state.h_plus - state.v_minus_sample.T @ state.h_minus)
        - eta * config.weight_decay * rbm.W
        + config.momentum * velocity.dW
    )
    db_vis = (
        eta / n * (state.v_plus - state.v_minus_sample).sum(axis=0)
        + config.momentum * velocity.db_vis
    )
    db_hid = (
        eta / n * (state.h_plus - state.h_minus).sum(axis=0)
        + config.momentum * velocity.db_hid
    )
    new_velocity = Velocity(dW, db_vis, db_hid)

    b_hid = rbm.b_hid + db_hid
    if config.sparsity_target is not None and config.sparsity_cost > 0:
        b_hid = b_hid + eta * config.sparsity_cost * (
            config.sparsity_target - state.h_plus.mean(axis=0)
        )

    updated = Rbm(
        W=rbm.W + dW,
        b_vis=rbm.b_vis + db_vis,
        b_hid=b_hid,
        visible_type=rbm.visible_type,
    )
    for arr in (updated.W, updated.b_vis, updated.b_hid):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite update; learning rate likely divergent")
    return updated, state, new_velocity


def minibatches(n, batch_size, perm):
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train(rbm, data, config):
    """Epochs of minibatch CD over seeded shuffles; returns (model, trace)."""
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    velocity = Velocity.zeros(rbm.visN, rbm.hidN)
    trace = TrainTrace()
    model = rbm
    for _ in range(config.epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(x.shape[0])
        for idx in minibatches(x.shape[0], config.batch_size, perm):
            model, _, velocity = cd_update(model, x[idx], config, rng, velocity)
        trace.reconstruction_error.append(reconstruction_error(model, x))
        trace.mean_hidden_activation.append(float(hidden_probs(model, x).mean()))
        trace.epoch_seconds.append(time.perf_counter() - t0)
    return model, trace


def free_energy(rbm, v):
    """F(v); exp(-F(v)) is proportional to the marginal p(v).

    Binary visibles: F(v) = -b_vis.v - sum_j log(1 + exp(b_hid_j + v.w_j)).
    Gaussian visibles replace the linear term with ||v - b_vis||^2 / 2.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    hidden_term = np.logaddexp(0.0, V @ rbm.W + rbm.b_hid).sum(axis=1)
    if rbm.visible_type == "binary":
        f = -V @ rbm.b_vis - hidden_term
    else:
        f = 0.5 * ((V - rbm.b_vis) ** 2).sum(axis=1) - hidden_term
    return float(f[0]) if single else f


def all_binary_patterns(n):
    """All 2^n binary row vectors, in increasing binary-counter order."""
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration over 2^{n} states refused (limit 2^{ENUMERATION_LIMIT})")
    bits = np.arange(2**n, dtype=np.int64)[:, None] >> np.arange(n - 1, -1, -1)
    return (bits & 1).astype(np.float64)


def log_partition(rbm):
    """log Z by exhaustive enumeration over the cheaper layer."""
    if rbm.visible_type == "gaussian":
        if rbm.hidN > ENUMERATION_LIMIT:
            raise ValueError("gaussian model too large: hidden layer must be enumerable")
        # integrate the gaussian visibles analytically for each hidden state
        H = all_binary_patterns(rbm.hidN)
        mean = rbm.b_vis + H @ rbm.W.T
        log_terms = (
            H @ rbm.b_hid
            + 0.5 * (mean**2).sum(axis=1)
            - 0.5 * (rbm.b_vis**2).sum()
        )
        return rbm.visN / 2 * np.log(2 * np.pi) + logsumexp(log_terms)
    if min(rbm.visN, rbm.hidN) > ENUMERATION_LIMIT:
        raise ValueError("model too large for exact enumeration")
    if rbm.visN <= rbm.hidN:
        return logsumexp(-free_energy(rbm, all_binary_patterns(rbm.visN)))
    # enumerate the hidden layer through the dual free energy
    H = all_binary_patterns(rbm.hidN)
    g = -(H @ rbm.b_hid) - np.logaddexp(0.0, H @ rbm.W.T + rbm.b_vis).sum(axis=1)
    return logsumexp(-g)


def exact_log_likelihood(rbm, data):
    """Mean log p(v) over the samples, with Z computed exactly.

    Feasible only at toy scale; raises for models whose smaller layer
    exceeds the enumeration limit.
    """
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    log_z = log_partition(rbm)
    return float(np.mean(-free_energy(rbm, x) - log_z))


def reconstruction_error(rbm, data):
    """Mean squared error of the deterministic mean-field reconstruction."""
    x = data.samples if hasattr(data, "samples") else np.asarray(data, dtype=np.float64)
    recon = visible_probs(rbm, hidden_probs(rbm, x))
    return float(((x - recon) ** 2).mean())
