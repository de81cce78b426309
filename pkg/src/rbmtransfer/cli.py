"""Command-line surface: train | rank | prune-curve | xor | transfer | sweep | probe.

Each subcommand reads an optional JSON config file, overlays generic
``--set key=value`` overrides (dotted keys, JSON values), and writes its
artifacts plus a manifest (config hash, seed, versions, timing) into the
output directory. The output root defaults to $RBMTRANSFER_OUT or the
current directory.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import copy
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import model_io, probe, ranking, rbm, synthetic
from .data import (
    load_csv,
    load_idx_images,
    load_idx_labels,
    normalize,
    pca_fit,
    pca_transform,
    resize_nearest,
    split,
)


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _set_dotted(doc, dotted, value):
    parts = dotted.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted!r}: {p!r} is not an object")
    node[parts[-1]] = value


def effective_config(defaults, args):
    cfg = copy.deepcopy(defaults)
    if args.config:
        try:
            with open(args.config) as f:
                cfg = _merge(cfg, json.load(f))
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings allowed
        _set_dotted(cfg, key, value)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    return cfg


def out_dir(args, cfg):
    root = args.out or cfg.get("out_dir") or os.environ.get("RBMTRANSFER_OUT") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _train_config(doc, seed=0):
    try:
        return rbm.TrainConfig(seed=seed, **(doc or {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad training config: {e}")


def _probe_config(doc, seed=0):
    try:
        return probe.ProbeConfig(seed=seed, **(doc or {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad probe config: {e}")


# ---------------------------------------------------------------------------
# dataset handling


def load_dataset(spec):
    """Load a dataset from a config spec: idx | csv | synthetic."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"dataset spec must be an object with a 'kind': {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "idx":
            ds = load_idx_images(spec["images"])
            if spec.get("labels"):
                labels = load_idx_labels(spec["labels"])
                if labels.shape[0] != ds.n_samples:
                    raise ValueError(
                        f"{labels.shape[0]} labels for {ds.n_samples} images"
                    )
                ds = replace(ds, labels=labels)
            return ds
        if kind == "csv":
            return load_csv(
                spec["path"],
                has_labels=spec.get("has_labels", False),
                label_column=spec.get("label_column", 0),
            )
        if kind == "synthetic":
            return synthetic.synthetic_digits(
                spec["n"],
                classes=spec.get("classes", range(10)),
                seed=spec.get("seed", 0),
                jitter=spec.get("jitter", 4),
                noise_sigma=spec.get("noise_sigma", 16.0),
            )
    except KeyError as e:
        raise ConfigError(f"dataset spec missing field {e}")
    except (OSError, ValueError) as e:
        raise DataError(str(e))
    raise ConfigError(f"unknown dataset kind {kind!r}")


def apply_preprocess(ds, chain):
    for step in chain or []:
        op = step.get("op")
        try:
            if op == "unit_scale":
                ds = normalize(ds, "unit_scale", max_value=step.get("max_value"))
            elif op == "binarize":
                ds = normalize(ds, "binarize", threshold=step.get("threshold", 0.5))
            elif op == "zscore":
                ds = normalize(ds, "zscore")
            elif op == "pca":
                ds = pca_transform(pca_fit(ds, step["k"]), ds)
            elif op == "resize":
                ds = resize_nearest(ds, tuple(step["shape"]))
            else:
                raise ConfigError(f"unknown preprocess op {op!r}")
        except ConfigError:
            raise
        except (KeyError, ValueError) as e:
            raise DataError(f"preprocess step {op!r} failed: {e}")
    return ds


def _load_prepared(cfg, key):
    ds = load_dataset(cfg.get(key) or _missing(key))
    return apply_preprocess(ds, cfg.get("preprocess"))


def _missing(key):
    raise ConfigError(f"config field {key!r} is required")


def _require_labels(ds, what):
    if ds.labels is None:
        raise DataError(f"{what} needs labels")
    return ds


def _load_model(path):
    try:
        return model_io.load_model(path)
    except (OSError, ValueError, KeyError) as e:
        raise DataError(f"cannot load model {path}: {e}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    defaults = {
        "data": None, "preprocess": [{"op": "unit_scale"}],
        "hidden": 64, "visible_type": "binary",
        "train": {}, "master_seed": 0,
    }
    cfg = effective_config(defaults, args)
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = _load_prepared(cfg, "data")
    seed = ex.derive_seed(cfg["master_seed"], "train")
    model = rbm.init_rbm(ds.n_dims, cfg["hidden"], cfg["visible_type"], seed=seed)
    model, trace = rbm.train(model, ds, _train_config(cfg["train"], seed=seed))
    model_io.save_model(model, out / "model.json")
    ex.write_csv(
        [{"epoch": i, "reconstruction_error": e, "mean_hidden_activation": a}
         for i, (e, a) in enumerate(zip(trace.reconstruction_error, trace.mean_hidden_activation))],
        ["epoch", "reconstruction_error", "mean_hidden_activation"],
        out / "trace.csv",
    )
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    print(f"trained {model.visN}x{model.hidN} model -> {out / 'model.json'}")
    return 0


def cmd_rank(args):
    defaults = {"model": None, "filters_dir": None, "image_shape": None, "master_seed": 0}
    cfg = effective_config(defaults, args)
    if args.model:
        cfg["model"] = args.model
    if not cfg["model"]:
        raise ConfigError("rank needs a model path (--model or config)")
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    model = _load_model(cfg["model"])
    fr = ranking.score_features(model)
    rank_of = np.empty(model.hidN, dtype=int)
    rank_of[fr.order] = np.arange(model.hidN)
    ex.write_csv(
        [{"hidden_index": j, "score": float(fr.scores[j]), "rank": int(rank_of[j])}
         for j in range(model.hidN)],
        ["hidden_index", "score", "rank"],
        out / "ranking.csv",
    )
    if cfg["filters_dir"]:
        if not cfg["image_shape"]:
            raise ConfigError("filter dumps need image_shape [h, w]")
        ranking.write_filter_pgms(model, out / cfg["filters_dir"], tuple(cfg["image_shape"]))
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    print(f"ranked {model.hidN} units -> {out / 'ranking.csv'}")
    return 0


def cmd_prune_curve(args):
    defaults = {
        "model": None, "train_data": None, "test_data": None,
        "preprocess": [{"op": "unit_scale"}], "step": 10,
        "probe": {}, "master_seed": 0,
    }
    cfg = effective_config(defaults, args)
    if args.model:
        cfg["model"] = args.model
    if not cfg["model"]:
        raise ConfigError("prune-curve needs a model path (--model or config)")
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    model = _load_model(cfg["model"])
    train_ds = _require_labels(_load_prepared(cfg, "train_data"), "prune-curve train data")
    test_ds = _require_labels(_load_prepared(cfg, "test_data"), "prune-curve test data")
    probe_cfg = _probe_config(cfg["probe"], seed=ex.derive_seed(cfg["master_seed"], "probe"))
    rows = ex.run_prune_curve(model, train_ds, test_ds, cfg["step"], probe_cfg)
    ex.write_csv(rows, ["direction", "kept_units", "accuracy"], out / "prune_curve.csv")
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    for direction in ("drop_lowest", "drop_highest"):
        area = ex.curve_area(rows, direction)
        print(f"{direction}: area under accuracy curve = {area:.2f}")
    return 0


def cmd_xor(args):
    defaults = {"hidden": 10, "seeds": 50, "epochs": 2000,
                "learning_rate": 0.5, "master_seed": 0}
    cfg = effective_config(defaults, args)
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    report = ex.run_xor(
        hidden=cfg["hidden"], seeds=cfg["seeds"], epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"], master_seed=cfg["master_seed"],
    )
    for row in report.rows:
        if row["hidden_index"] == 0 and row["seed_index"] > 0:
            print()
        flag = "consistent" if row["consistent"] else "INCONSISTENT"
        print(f"{row['score']:8.3f}  h{row['hidden_index'] + 1:<3d} {row['signs']:<18s}"
              f" {row['rule']:<16s} {flag}")
    print()
    print(f"mean score of consistent rules:   {report.mean_consistent_score:.3f}")
    print(f"mean score of inconsistent rules: {report.mean_inconsistent_score:.3f}")
    print(f"seeds with a consistent top rule: {report.top_rule_consistent_fraction:.0%}")
    ex.write_csv(report.rows,
                 ["seed_index", "hidden_index", "score", "signs", "rule", "consistent"],
                 out / "xor_rules.csv")
    ex.write_json({
        "config": report.config,
        "mean_consistent_score": report.mean_consistent_score,
        "mean_inconsistent_score": report.mean_inconsistent_score,
        "top_rule_consistent_fraction": report.top_rule_consistent_fraction,
    }, out / "xor_report.json")
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    return 0


def _transfer_inputs(cfg):
    source = _load_prepared(cfg, "source_data")
    target = _require_labels(_load_prepared(cfg, "target_data"), "transfer target data")
    if source.n_dims != target.n_dims:
        if source.dims and target.dims:
            target = resize_nearest(target, source.dims)
        else:
            raise DataError(
                f"source has {source.n_dims} dims, target {target.n_dims}, "
                "and no image shapes to resize by"
            )
    source_model = None
    if cfg.get("source_model"):
        source_model = _load_model(cfg["source_model"])
        if source_model.visN != source.n_dims:
            raise DataError("source model does not match source data dims")
    return source, target, source_model


def cmd_transfer(args):
    defaults = {
        "source_data": None, "target_data": None, "source_model": None,
        "preprocess": [{"op": "unit_scale"}],
        "source_hidden": 100, "rbm_hidden": [100],
        "k_grid": [50], "m_grid": [50], "theta_grid": [0.0, 1.0],
        "repeat": 10, "split_fractions": [0.7, 0.15, 0.15],
        "source_train": {}, "target_train": {}, "probe": {},
        "master_seed": 0,
    }
    cfg = effective_config(defaults, args)
    if cfg["repeat"] < 1 or not cfg["k_grid"] or not cfg["m_grid"] or not cfg["theta_grid"]:
        raise ConfigError("repeat must be >= 1 and all grids non-empty")
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    source, target, source_model = _transfer_inputs(cfg)
    report = ex.run_transfer(
        source, target,
        source_hidden=cfg["source_hidden"], rbm_hidden=cfg["rbm_hidden"],
        k_grid=cfg["k_grid"], m_grid=cfg["m_grid"], theta_grid=cfg["theta_grid"],
        repeat=cfg["repeat"], master_seed=cfg["master_seed"],
        source_train=_train_config(cfg["source_train"]),
        target_train=_train_config(cfg["target_train"]),
        probe_cfg=_probe_config(cfg["probe"]),
        split_fractions=tuple(cfg["split_fractions"]),
        source_model=source_model,
    )
    ex.write_json(report, out / "transfer_report.json")
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    for row in report["rows"]:
        ci = row["test_ci95"]
        ci_text = f" +- {100 * ci:.2f}" if ci is not None else ""
        print(f"{row['row']:<16s} test accuracy {100 * row['test_mean']:6.2f}%{ci_text}")
    return 0


def cmd_sweep(args):
    defaults = {
        "source_data": None, "target_data": None, "source_model": None,
        "preprocess": [{"op": "unit_scale"}],
        "source_hidden": 100, "k_grid": [10, 20, 40], "m_grid": [10, 20, 40],
        "theta": 1.0, "repeat": 3, "split_fractions": [0.7, 0.15, 0.15],
        "source_train": {}, "target_train": {}, "probe": {},
        "master_seed": 0,
    }
    cfg = effective_config(defaults, args)
    if not cfg["k_grid"] or not cfg["m_grid"]:
        raise ConfigError("sweep grids must be non-empty")
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    source, target, source_model = _transfer_inputs(cfg)
    rows = ex.run_sweep(
        source, target,
        source_hidden=cfg["source_hidden"], k_grid=cfg["k_grid"], m_grid=cfg["m_grid"],
        theta=cfg["theta"], repeat=cfg["repeat"], master_seed=cfg["master_seed"],
        source_train=_train_config(cfg["source_train"]),
        target_train=_train_config(cfg["target_train"]),
        probe_cfg=_probe_config(cfg["probe"]),
        split_fractions=tuple(cfg["split_fractions"]),
        source_model=source_model,
    )
    ex.write_csv(rows, ["k", "m", "mean_accuracy"], out / "sweep.csv")
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    print(f"{len(rows)} sweep cells -> {out / 'sweep.csv'}")
    return 0


def cmd_probe(args):
    defaults = {
        "data": None, "model": None, "preprocess": [{"op": "unit_scale"}],
        "repeat": 5, "split_fractions": [0.7, 0.15, 0.15],
        "probe": {}, "master_seed": 0,
    }
    cfg = effective_config(defaults, args)
    out = out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = _require_labels(_load_prepared(cfg, "data"), "probe data")
    model = _load_model(cfg["model"]) if cfg.get("model") else None
    tr, _, te = split(ds, tuple(cfg["split_fractions"]), ex.derive_seed(cfg["master_seed"], "split"))
    if model is not None:
        train_x, test_x = rbm.hidden_probs(model, tr.samples), rbm.hidden_probs(model, te.samples)
    else:
        train_x, test_x = tr.samples, te.samples
    accs = []
    for rep in range(cfg["repeat"]):
        p_cfg = _probe_config(cfg["probe"], seed=ex.derive_seed(cfg["master_seed"], "probe", rep))
        sm = probe.train_softmax(train_x, tr.labels, p_cfg)
        accs.append(probe.accuracy(probe.predict(sm, test_x), te.labels))
    if len(accs) >= 2:
        mean, ci = probe.mean_ci95(accs)
    else:
        mean, ci = accs[0], None
    ex.write_json({
        "config": cfg, "per_seed_accuracies": accs,
        "mean": mean, "ci95_half_width": ci,
    }, out / "probe_report.json")
    ex.write_manifest(out / "manifest.json", cfg, cfg["master_seed"], time.perf_counter() - t0)
    print(f"probe accuracy {100 * mean:.2f}%" + (f" +- {100 * ci:.2f}" if ci is not None else ""))
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rbmtransfer",
        description="RBM training, feature ranking, pruning and adaptive transfer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "train": (cmd_train, "train an RBM and save it as JSON"),
        "rank": (cmd_rank, "score and rank a model's hidden units"),
        "prune-curve": (cmd_prune_curve, "probe accuracy while pruning units by score"),
        "xor": (cmd_xor, "XOR rule-extraction demonstration"),
        "transfer": (cmd_transfer, "transfer comparison with baselines"),
        "sweep": (cmd_sweep, "accuracy over a (k, m) transfer grid"),
        "probe": (cmd_probe, "softmax probe on a dataset (optionally via a model)"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (dotted key, JSON value)")
        p.add_argument("--out", help="output directory (default $RBMTRANSFER_OUT or .)")
        p.add_argument("--seed", type=int, help="master seed override")
        if name in ("rank", "prune-curve"):
            p.add_argument("--model", help="model JSON path")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
