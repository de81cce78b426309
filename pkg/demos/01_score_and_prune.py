#!/usr/bin/env python3
"""Score the hidden units of a digit RBM, then prune it from both ends.

Trains a small RBM on synthetic digit images, ranks every hidden unit by
the mean absolute weight of its visible connections, dumps the filters
as PGM images, and compares reconstruction quality after dropping the
lowest-scoring versus the highest-scoring half of the units.
"""

import numpy as np

from rbmtransfer import (
    TrainConfig,
    init_rbm,
    normalize,
    prune,
    reconstruction_error,
    score_features,
    train,
    write_filter_pgms,
)
from rbmtransfer.synthetic import synthetic_digits

data = normalize(synthetic_digits(1500, seed=42, jitter=2), "unit_scale")
print(f"training data: {data.n_samples} samples of {data.n_dims} dims")

model = init_rbm(data.n_dims, 64, seed=0)
model, trace = train(model, data, TrainConfig(learning_rate=0.1, epochs=15,
                                              batch_size=100, seed=0))
print(f"reconstruction error per epoch: {np.round(trace.reconstruction_error, 4)}")

ranking = score_features(model)
print("\ntop five units by score:")
for r, j in enumerate(ranking.order[:5]):
    print(f"  rank {r}: unit {j:2d}  score {ranking.scores[j]:.4f}")
print("bottom five units:")
for r, j in enumerate(ranking.order[-5:]):
    print(f"  rank {59 + r}: unit {j:2d}  score {ranking.scores[j]:.4f}")
print(f"total sign-scale information loss: {ranking.total_loss:.3f}")

paths = write_filter_pgms(model, "out/filters", data.dims)
print(f"\nwrote {len(paths)} filter images to out/filters/ (PGM, one per unit)")

half = model.hidN // 2
keep_best = prune(model, half, "drop_lowest")
keep_worst = prune(model, half, "drop_highest")
print(f"\nreconstruction error, full model:      {reconstruction_error(model, data):.4f}")
print(f"reconstruction error, best {half} kept:  {reconstruction_error(keep_best, data):.4f}")
print(f"reconstruction error, worst {half} kept: {reconstruction_error(keep_worst, data):.4f}")
print("\nhalving the model costs reconstruction either way, but the ordering "
      "favors the high-score half; the real separation shows up in "
      "classification accuracy (see 04_prune_curve.py).")
