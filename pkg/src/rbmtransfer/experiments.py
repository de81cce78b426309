"""Experiment orchestration: XOR rule readout, pruning curves, transfer grids.

Every run is a pure function of its configuration and master seed.
Per-cell seeds are derived by hashing (master_seed, k, m, theta,
repeat_index), so extending a grid never perturbs existing cells.
Result files (CSV/JSON) contain no wall-clock values; timing goes into
the run manifest instead, keeping outputs byte-identical across reruns.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import probe as probe_mod
from . import ranking as ranking_mod
from . import rbm as rbm_mod
from . import transfer as transfer_mod
from .data import split

XOR_VAR_NAMES = ("x", "y", "z")


def xor_truth_table():
    """The four satisfying assignments of z = x XOR y, columns (x, y, z)."""
    return np.array(
        [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=np.float64
    )


def derive_seed(master_seed, *parts):
    """A stable 63-bit seed from the master seed and any hashable parts.

    Floats are keyed by repr so that e.g. theta=0.0 and theta=0 derive
    the same stream only when they are numerically the same float.
    """
    key = "|".join([str(int(master_seed))] + [
        repr(float(p)) if isinstance(p, float) else str(p) for p in parts
    ])
    digest = hashlib.sha256(key.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def cell_seed(master_seed, k, m, theta, repeat_index):
    return derive_seed(master_seed, k, m, float(theta), repeat_index)


# ---------------------------------------------------------------------------
# XOR demonstration


@dataclass
class XorReport:
    rows: list  # one dict per (seed, hidden unit)
    mean_consistent_score: float
    mean_inconsistent_score: float
    top_rule_consistent_fraction: float
    config: dict = field(default_factory=dict)


def _sign_pattern(rule):
    return "{" + ",".join(("+" if lit.positive else "-") + lit.name
                          for lit in rule.body + (rule.head,)) + "}"


def run_xor(hidden=10, seeds=50, epochs=2000, learning_rate=0.5, master_seed=0):
    """Train per-seed RBMs on the XOR table and read out ranked rules.

    Returns per-unit rows (score, sign pattern, rule, consistency) plus
    the aggregate consistency-versus-score statistics.
    """
    table = xor_truth_table()
    head_index = XOR_VAR_NAMES.index("z")
    rows = []
    consistent_scores = []
    inconsistent_scores = []
    top_consistent = 0
    for i in range(seeds):
        seed = derive_seed(master_seed, "xor", i)
        model = rbm_mod.init_rbm(3, hidden, "binary", seed=seed)
        cfg = rbm_mod.TrainConfig(
            learning_rate=learning_rate, epochs=epochs, batch_size=4, seed=seed
        )
        model, _ = rbm_mod.train(model, table, cfg)
        rules = ranking_mod.to_logical_rules(model, XOR_VAR_NAMES, head_index)
        order = ranking_mod.score_features(model).order
        for j, rule in enumerate(rules):
            ok = ranking_mod.rule_consistency(rule, table)
            (consistent_scores if ok else inconsistent_scores).append(rule.score)
            rows.append({
                "seed_index": i,
                "hidden_index": j,
                "score": rule.score,
                "signs": _sign_pattern(rule),
                "rule": str(rule),
                "consistent": ok,
            })
        if ranking_mod.rule_consistency(rules[int(order[0])], table):
            top_consistent += 1
    return XorReport(
        rows=rows,
        mean_consistent_score=float(np.mean(consistent_scores)) if consistent_scores else float("nan"),
        mean_inconsistent_score=float(np.mean(inconsistent_scores)) if inconsistent_scores else float("nan"),
        top_rule_consistent_fraction=top_consistent / seeds,
        config={
            "hidden": hidden, "seeds": seeds, "epochs": epochs,
            "learning_rate": learning_rate, "master_seed": master_seed,
        },
    )


# ---------------------------------------------------------------------------
# Pruning curve


def _probe_accuracy(train_x, train_y, test_x, test_y, probe_cfg):
    model = probe_mod.train_softmax(train_x, train_y, probe_cfg)
    return probe_mod.accuracy(probe_mod.predict(model, test_x), test_y)


def run_prune_curve(model, train_ds, test_ds, step, probe_cfg):
    """Probe accuracy of progressively pruned models, both directions.

    Returns rows {direction, kept_units, accuracy} for kept counts
    hidN, hidN-step, ... down to the last positive count.
    """
    counts = list(range(model.hidN, 0, -step))
    rows = []
    for direction in ("drop_lowest", "drop_highest"):
        for keep in counts:
            pruned = ranking_mod.prune(model, keep, direction)
            acc = _probe_accuracy(
                rbm_mod.hidden_probs(pruned, train_ds.samples), train_ds.labels,
                rbm_mod.hidden_probs(pruned, test_ds.samples), test_ds.labels,
                probe_cfg,
            )
            rows.append({"direction": direction, "kept_units": keep, "accuracy": acc})
    return rows


def curve_area(rows, direction):
    """Trapezoidal area under one direction's accuracy-vs-kept curve."""
    pts = sorted(
        ((r["kept_units"], r["accuracy"]) for r in rows if r["direction"] == direction)
    )
    xs = np.array([p[0] for p in pts], dtype=np.float64)
    ys = np.array([p[1] for p in pts], dtype=np.float64)
    return float(np.trapezoid(ys, xs))


# ---------------------------------------------------------------------------
# Transfer experiment


def _features_for(method, model_or_none, source, datasets):
    """Feature matrices for (train, valid, test) under the given method."""
    if method == "raw":
        return [d.samples for d in datasets]
    if method == "stl":
        return [transfer_mod.self_taught_features(source, d) for d in datasets]
    if method == "rbm":
        return [rbm_mod.hidden_probs(model_or_none, d.samples) for d in datasets]
    if method == "astl":
        return [transfer_mod.extract_features(model_or_none, d) for d in datasets]
    raise ValueError(f"unknown method {method!r}")


def run_transfer(source_data, target_data, *, source_hidden, rbm_hidden,
                 k_grid, m_grid, theta_grid, repeat, master_seed,
                 source_train, target_train, probe_cfg,
                 split_fractions=(0.7, 0.15, 0.15), source_model=None):
    """Full transfer comparison with baselines and validation-based selection.

    Rows: raw-pixel probe, plain target RBM, self-taught source features
    (RBM STL), and one adaptive row per theta. The plain-RBM baseline for
    h hidden units is seeded exactly like an adaptive cell (k=0, m=h,
    theta=0), so a grid containing that cell reproduces the baseline
    bit-for-bit.
    """
    if source_model is None:
        s_seed = derive_seed(master_seed, "source")
        source_model = rbm_mod.init_rbm(
            source_data.n_dims, source_hidden, "binary", seed=s_seed
        )
        source_model, _ = rbm_mod.train(
            source_model, source_data, replace(source_train, seed=s_seed)
        )
    ranking = ranking_mod.score_features(source_model)

    tr, va, te = split(target_data, split_fractions, derive_seed(master_seed, "split"))
    splits = (tr, va, te)

    cells = []

    def eval_probe(features, p_seed):
        cfg = replace(probe_cfg, seed=p_seed)
        model = probe_mod.train_softmax(features[0], tr.labels, cfg)
        val = probe_mod.accuracy(probe_mod.predict(model, features[1]), va.labels)
        test = probe_mod.accuracy(probe_mod.predict(model, features[2]), te.labels)
        return val, test

    for rep in range(repeat):
        feats = _features_for("raw", None, source_model, splits)
        val, test = eval_probe(feats, derive_seed(master_seed, "raw", rep))
        cells.append({"method": "raw", "k": None, "m": None, "theta": None,
                      "repeat": rep, "val_accuracy": val, "test_accuracy": test})

        feats = _features_for("stl", None, source_model, splits)
        val, test = eval_probe(feats, derive_seed(master_seed, "stl", rep))
        cells.append({"method": "stl", "k": source_model.hidN, "m": None, "theta": None,
                      "repeat": rep, "val_accuracy": val, "test_accuracy": test})

        for h in rbm_hidden:
            seed = cell_seed(master_seed, 0, h, 0.0, rep)
            model = rbm_mod.init_rbm(tr.n_dims, h, "binary", seed=seed)
            model, _ = rbm_mod.train(model, tr, replace(target_train, seed=seed))
            feats = _features_for("rbm", model, source_model, splits)
            val, test = eval_probe(
                feats, derive_seed(master_seed, 0, h, 0.0, rep, "probe")
            )
            cells.append({"method": "rbm", "k": None, "m": h, "theta": None,
                          "repeat": rep, "val_accuracy": val, "test_accuracy": test})

        for theta in theta_grid:
            for k in k_grid:
                for m in m_grid:
                    seed = cell_seed(master_seed, k, m, theta, rep)
                    spec = transfer_mod.build_transfer_spec(source_model, ranking, k, theta)
                    target = transfer_mod.init_target(spec, tr.n_dims, m, "binary", seed=seed)
                    target, _ = transfer_mod.train_adaptive(
                        target, tr, replace(target_train, seed=seed)
                    )
                    feats = _features_for("astl", target, source_model, splits)
                    val, test = eval_probe(
                        feats, derive_seed(master_seed, k, m, theta, rep, "probe")
                    )
                    cells.append({"method": "astl", "k": k, "m": m, "theta": float(theta),
                                  "repeat": rep, "val_accuracy": val, "test_accuracy": test})

    report = {
        "config": {
            "source_hidden": source_hidden, "rbm_hidden": list(rbm_hidden),
            "k_grid": list(k_grid), "m_grid": list(m_grid),
            "theta_grid": [float(t) for t in theta_grid],
            "repeat": repeat, "master_seed": master_seed,
            "split_fractions": list(split_fractions),
            "source_train": _config_echo(source_train),
            "target_train": _config_echo(target_train),
            "probe": _config_echo(probe_cfg),
        },
        "cells": cells,
        "aggregates": aggregate_cells(cells),
    }
    report["rows"] = summary_rows(report["aggregates"])
    return report


def _config_echo(cfg):
    doc = dict(vars(cfg))
    doc.pop("seed", None)  # per-cell seeds are derived, not taken from here
    return doc


def _cell_key(c):
    return (c["method"], c["k"], c["m"], c["theta"])


def aggregate_cells(cells):
    """Mean and 95% CI half-width of val/test accuracy per grid cell."""
    groups = {}
    for c in cells:
        groups.setdefault(_cell_key(c), []).append(c)
    out = []
    for key in sorted(groups, key=lambda k: [str(x) for x in k]):
        vals = np.array([c["val_accuracy"] for c in groups[key]])
        tests = np.array([c["test_accuracy"] for c in groups[key]])
        if len(vals) >= 2:
            val_mean, val_ci = probe_mod.mean_ci95(vals)
            test_mean, test_ci = probe_mod.mean_ci95(tests)
        else:
            val_mean, val_ci = float(vals[0]), None
            test_mean, test_ci = float(tests[0]), None
        out.append({
            "method": key[0], "k": key[1], "m": key[2], "theta": key[3],
            "repeat": len(vals),
            "val_mean": val_mean, "val_ci95": val_ci,
            "test_mean": test_mean, "test_ci95": test_ci,
        })
    return out


def summary_rows(aggregates):
    """One row per method (astl split by theta), best cell by validation mean."""
    rows = []
    by_method = {}
    for agg in aggregates:
        name = agg["method"]
        if name == "astl":
            name = f"astl_theta={agg['theta']:g}"
        by_method.setdefault(name, []).append(agg)
    for name in sorted(by_method):
        best = max(by_method[name], key=lambda a: a["val_mean"])
        rows.append({
            "row": name,
            "selected": {"k": best["k"], "m": best["m"], "theta": best["theta"]},
            "val_mean": best["val_mean"],
            "test_mean": best["test_mean"],
            "test_ci95": best["test_ci95"],
        })
    return rows


def run_sweep(source_data, target_data, *, source_hidden, k_grid, m_grid, theta,
              repeat, master_seed, source_train, target_train, probe_cfg,
              split_fractions=(0.7, 0.15, 0.15), source_model=None):
    """(k, m) grid at fixed theta; returns rows (k, m, mean test accuracy)."""
    report = run_transfer(
        source_data, target_data,
        source_hidden=source_hidden, rbm_hidden=[],
        k_grid=k_grid, m_grid=m_grid, theta_grid=[theta],
        repeat=repeat, master_seed=master_seed,
        source_train=source_train, target_train=target_train,
        probe_cfg=probe_cfg, split_fractions=split_fractions,
        source_model=source_model,
    )
    rows = []
    for agg in report["aggregates"]:
        if agg["method"] == "astl":
            rows.append({"k": agg["k"], "m": agg["m"], "mean_accuracy": agg["test_mean"]})
    rows.sort(key=lambda r: (r["k"], r["m"]))
    return rows


# ---------------------------------------------------------------------------
# Deterministic output files


def config_hash(doc):
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")
    ).hexdigest()


def write_json(doc, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(rows, fieldnames, path):
    """Plain deterministic CSV; floats use their shortest round-trip repr."""
    def fmt(v):
        if isinstance(v, bool):
            return str(int(v))
        if isinstance(v, float):
            return repr(v)
        return "" if v is None else str(v)

    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(fieldnames) + "\n")
        for row in rows:
            f.write(",".join(fmt(row[name]) for name in fieldnames) + "\n")


def write_manifest(path, config_doc, master_seed, wall_seconds):
    """Run provenance: effective config, its hash, versions, timing.

    Timing lives here rather than in the result files so identical runs
    stay byte-identical.
    """
    import platform

    from . import __version__

    write_json({
        "config": config_doc,
        "config_sha256": config_hash(config_doc),
        "master_seed": master_seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "wall_seconds": wall_seconds,
    }, path)
