"""Per-hidden-unit scores, sign patterns, pruning and rule readout.

Each hidden unit j, together with its column of weights w_j, forms a
sub-network. Approximating w_j by a single magnitude c_j times a sign
vector s_j loses sum_i (w_ij - c_j s_ij)^2; that loss is minimized by
s_ij = sign(w_ij) and c_j = mean_i |w_ij|, which is the unit's score.
Ranking, pruning and the logical reading of tiny models all build on
those two closed forms.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rbm import Rbm, all_binary_patterns

OPTIMALITY_TOL = 1e-12


@dataclass
class FeatureRanking:
    """Scores c (hidN), signs s (visN x hidN), rank order, total loss."""

    scores: np.ndarray
    signs: np.ndarray
    order: np.ndarray  # hidden indices, descending score, ties by index
    total_loss: float


@dataclass
class SubNetwork:
    """One hidden unit with its visible connections and bias."""

    hidden_index: int
    weights: np.ndarray
    hidden_bias: float
    score: float
    signs: np.ndarray


@dataclass(frozen=True)
class Literal:
    """A signed propositional variable tied to a visible-unit column."""

    name: str
    index: int
    positive: bool

    def __str__(self):
        return self.name if self.positive else f"¬{self.name}"


@dataclass
class LogicalRule:
    """head-literal = conjunction of body literals, weighted by a score."""

    head: Literal
    body: tuple
    score: float

    def __str__(self):
        return f"{self.head} = " + " ∧ ".join(str(lit) for lit in self.body)


@dataclass
class MinimizerReport:
    passed: bool
    worst_margin: float
    unit_margins: np.ndarray


def sign_matrix(W):
    """Elementwise sign with the sign(0) = +1 convention."""
    return np.where(W >= 0, 1.0, -1.0)


def sign_scale_loss(W, scores, signs):
    """Direct evaluation of the approximation loss sum_j ||w_j - c_j s_j||^2."""
    return float(((W - signs * scores[None, :]) ** 2).sum())


def score_features(rbm):
    """Score every hidden unit and compute the loss at the optimum.

    The closed form of the total loss, sum_j (||w_j||^2 - visN c_j^2),
    must agree with sign_scale_loss; tests treat the pair as a dual-route
    check.
    """
    W = rbm.W
    scores = np.abs(W).mean(axis=0)
    signs = sign_matrix(W)
    order = np.argsort(-scores, kind="stable")
    total_loss = float((W**2).sum() - rbm.visN * (scores**2).sum())
    return FeatureRanking(scores=scores, signs=signs, order=order, total_loss=total_loss)


def verify_minimizer(rbm, trials=50, rng=None):
    """Check that (c_j, s_j) is optimal for every unit.

    Two probes per unit: random scale perturbations c_j + delta, and an
    exhaustive sweep of all sign vectors with the per-sign optimal scale
    c(s) = (w_j . s) / visN. Margins are candidate loss minus optimal
    loss; the worst margin over all probes must not be meaningfully
    negative.
    """
    if rbm.visN > 12:
        raise ValueError(f"exhaustive sign enumeration refused for visN={rbm.visN} > 12")
    if rng is None:
        rng = np.random.default_rng(0)
    ranking = score_features(rbm)
    S = all_binary_patterns(rbm.visN) * 2 - 1  # all sign vectors
    unit_margins = np.empty(rbm.hidN)
    for j in range(rbm.hidN):
        w = rbm.W[:, j]
        opt = float(((w - ranking.scores[j] * ranking.signs[:, j]) ** 2).sum())

        deltas = rng.normal(scale=max(ranking.scores[j], 0.1), size=trials)
        perturbed = ranking.scores[j] + deltas
        loss_c = ((w[None, :] - perturbed[:, None] * ranking.signs[:, j][None, :]) ** 2).sum(axis=1)

        c_per_sign = S @ w / rbm.visN
        loss_s = ((w[None, :] - c_per_sign[:, None] * S) ** 2).sum(axis=1)

        unit_margins[j] = min(loss_c.min(), loss_s.min()) - opt
    worst = float(unit_margins.min())
    return MinimizerReport(passed=worst >= -OPTIMALITY_TOL, worst_margin=worst, unit_margins=unit_margins)


def rank(ranking):
    """Hidden indices from highest to lowest score (ties by ascending index)."""
    return ranking.order.copy()


def prune(rbm, keep, direction="drop_lowest"):
    """Keep only `keep` hidden units chosen by score rank.

    drop_lowest keeps the top-ranked units, drop_highest the bottom-ranked
    ones; retained columns stay in their original index order. Visible
    biases are untouched.
    """
    if not (1 <= keep <= rbm.hidN):
        raise ValueError(f"keep={keep} out of range 1..{rbm.hidN}")
    order = score_features(rbm).order
    if direction == "drop_lowest":
        kept = order[:keep]
    elif direction == "drop_highest":
        kept = order[rbm.hidN - keep:]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    kept = np.sort(kept)
    return Rbm(
        W=rbm.W[:, kept].copy(),
        b_vis=rbm.b_vis.copy(),
        b_hid=rbm.b_hid[kept].copy(),
        visible_type=rbm.visible_type,
    )


def extract_subnetworks(rbm, indices):
    """Copy the requested hidden units out as SubNetwork records."""
    ranking = score_features(rbm)
    out = []
    for j in indices:
        j = int(j)
        out.append(
            SubNetwork(
                hidden_index=j,
                weights=rbm.W[:, j].copy(),
                hidden_bias=float(rbm.b_hid[j]),
                score=float(ranking.scores[j]),
                signs=ranking.signs[:, j].copy(),
            )
        )
    return out


def to_logical_rules(rbm, var_names, head_index):
    """Read each hidden unit as one conjunction rule over the visible variables.

    A visible variable enters with the polarity of its weight sign; the
    designated head variable becomes the rule head, negated when its sign
    is negative.
    """
    if len(var_names) != rbm.visN:
        raise ValueError(f"{len(var_names)} names for {rbm.visN} visible units")
    if not (0 <= head_index < rbm.visN):
        raise ValueError(f"head_index {head_index} out of range")
    ranking = score_features(rbm)
    rules = []
    for j in range(rbm.hidN):
        s = ranking.signs[:, j]
        head = Literal(var_names[head_index], head_index, s[head_index] > 0)
        body = tuple(
            Literal(var_names[i], i, s[i] > 0)
            for i in range(rbm.visN)
            if i != head_index
        )
        rules.append(LogicalRule(head=head, body=body, score=float(ranking.scores[j])))
    return rules


def rule_consistency(rule, truth_table):
    """True iff every table row satisfying all body literals satisfies the head.

    Rows are assignments over the visible variables (columns in literal
    index order); a rule whose body matches no row is vacuously
    consistent.
    """
    table = np.asarray(truth_table, dtype=np.float64)
    match = np.ones(table.shape[0], dtype=bool)
    for lit in rule.body:
        want = 1.0 if lit.positive else 0.0
        match &= table[:, lit.index] == want
    head_want = 1.0 if rule.head.positive else 0.0
    return bool(np.all(table[match, rule.head.index] == head_want))


def write_filter_pgms(rbm, directory, image_shape):
    """Dump each hidden unit's weight column as a binary PGM (P5) image.

    Weights are affinely mapped to 0..255 per unit (min to 0, max to 255);
    a constant column maps to all zeros. Returns the written paths.
    """
    h, w = image_shape
    if h * w != rbm.visN:
        raise ValueError(f"image shape {image_shape} does not cover {rbm.visN} visible units")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    width = len(str(rbm.hidN - 1))
    for j in range(rbm.hidN):
        col = rbm.W[:, j]
        span = col.max() - col.min()
        if span > 0:
            pixels = np.rint((col - col.min()) / span * 255).astype(np.uint8)
        else:
            pixels = np.zeros(rbm.visN, dtype=np.uint8)
        path = directory / f"filter_{j:0{width}d}.pgm"
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(pixels.tobytes())
        paths.append(path)
    return paths
