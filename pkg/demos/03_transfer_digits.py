#!/usr/bin/env python3
"""Adaptive transfer between digit domains with scarce target data.

Trains a source RBM on digit classes 0-4, freezes its top-ranked
sub-networks inside a target model, and lets fresh units adapt on the
disjoint classes 5-9. The target domain has only 400 labelled samples
(200 for training), which is where transfer pays off most: an RBM
trained from scratch on that little data is far behind, while the
influence factor theta switches the frozen knowledge from passive
feature combination (0) to actively guiding the new units (1).
"""

import rbmtransfer.experiments as ex
from rbmtransfer import ProbeConfig, TrainConfig, normalize
from rbmtransfer.synthetic import synthetic_digits

source = normalize(
    synthetic_digits(3000, classes=range(5), seed=1, jitter=3, noise_sigma=32),
    "unit_scale",
)
target = normalize(
    synthetic_digits(400, classes=range(5, 10), seed=2, jitter=3, noise_sigma=32),
    "unit_scale",
)
print(f"source: {source.n_samples} samples of classes 0-4")
print(f"target: {target.n_samples} samples of classes 5-9 "
      f"(split 200 train / 100 valid / 100 test)")

report = ex.run_transfer(
    source, target,
    source_hidden=64, rbm_hidden=[64],
    k_grid=[32], m_grid=[32], theta_grid=[0.0, 1.0],
    repeat=5, master_seed=0,
    source_train=TrainConfig(epochs=15),
    target_train=TrainConfig(epochs=25),
    probe_cfg=ProbeConfig(epochs=200),
    split_fractions=(0.5, 0.25, 0.25),
)

print("\ntest accuracy on the target domain (mean over 5 seeds, 95% CI):")
for row in report["rows"]:
    ci = row["test_ci95"]
    print(f"  {row['row']:<14s} {100 * row['test_mean']:6.2f}% +- {100 * ci:.2f}")

print("""
reading the rows:
  rbm           64 units trained from scratch on 200 target samples
  astl_theta=0  32 frozen source units + 32 fresh units, knowledge inert
  astl_theta=1  same blocks, frozen down-weights guide the new units
  stl           all 64 source units as-is (no adaptation)
  raw           softmax straight on pixels

guided transfer (theta=1) beats inert combination (theta=0), and both
beat training from scratch. With domains this close and target data
this small, plain self-taught features are strong too; the adaptive
route matters more as the domains drift apart.""")
