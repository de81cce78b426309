#!/usr/bin/env python3
"""Classification accuracy as units are pruned away, in both score orders.

A 100-unit RBM is trained on augmented real-handwriting digits (needs
scikit-learn for the base glyphs), then pruned step by step; each pruned
model's features feed a softmax probe. Removing the lowest-scoring units
first keeps accuracy near the unpruned level until half the model is
gone, while removing the highest-scoring ones first collapses it
quickly, so the two curves and their areas separate sharply.
"""

import rbmtransfer.experiments as ex
from rbmtransfer import ProbeConfig, TrainConfig, init_rbm, normalize, train
from rbmtransfer.synthetic import handwritten_digits

train_ds = normalize(handwritten_digits(2000, seed=101, train_pool=True), "unit_scale")
test_ds = normalize(handwritten_digits(1000, seed=202, train_pool=False), "unit_scale")

model = init_rbm(784, 100, seed=4)
model, _ = train(model, train_ds, TrainConfig(learning_rate=0.1, epochs=15,
                                              batch_size=100, seed=4))

rows = ex.run_prune_curve(model, train_ds, test_ds, step=10,
                          probe_cfg=ProbeConfig(epochs=500, seed=0))
ex.write_csv(rows, ["direction", "kept_units", "accuracy"], "out/prune_curve.csv")
print("wrote out/prune_curve.csv")

print(f"\n{'kept':>6s} {'drop_lowest':>12s} {'drop_highest':>13s}")
acc = {(r["direction"], r["kept_units"]): r["accuracy"] for r in rows}
for kept in range(100, 0, -10):
    lo = acc[("drop_lowest", kept)]
    hi = acc[("drop_highest", kept)]
    bar = "#" * int(40 * lo)
    print(f"{kept:6d} {lo:12.3f} {hi:13.3f}   {bar}")

print(f"\narea under curve, drop_lowest:  {ex.curve_area(rows, 'drop_lowest'):.2f}")
print(f"area under curve, drop_highest: {ex.curve_area(rows, 'drop_highest'):.2f}")
