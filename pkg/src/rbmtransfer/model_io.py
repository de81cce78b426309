"""Versioned JSON model files.

Numbers are serialized with Python's shortest round-trip float repr, so
save -> load -> save is byte-identical for finite parameters. Transferred
models embed their frozen block; loading never needs the source model.
"""

import json

import numpy as np

from .rbm import Rbm
from .transfer import TargetRbm, TransferSpec

FORMAT_VERSION = 1


def _vec(a):
    return [float(x) for x in np.asarray(a).ravel(order="C")]


def rbm_to_dict(rbm):
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "rbm",
        "visible_type": rbm.visible_type,
        "visN": rbm.visN,
        "hidN": rbm.hidN,
        "W": _vec(rbm.W),  # row-major, visN rows of hidN
        "b_vis": _vec(rbm.b_vis),
        "b_hid": _vec(rbm.b_hid),
    }


def rbm_from_dict(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    visN, hidN = int(doc["visN"]), int(doc["hidN"])
    return Rbm(
        W=np.array(doc["W"], dtype=np.float64).reshape(visN, hidN),
        b_vis=np.array(doc["b_vis"], dtype=np.float64),
        b_hid=np.array(doc["b_hid"], dtype=np.float64),
        visible_type=doc["visible_type"],
    )


def target_to_dict(t):
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "target_rbm",
        "visible_type": t.visible_type,
        "visN": t.visN,
        "k": t.k,
        "m": t.m,
        "spec": {
            "W_t": _vec(t.spec.W_t),
            "b_t": _vec(t.spec.b_t),
            "theta": float(t.spec.theta),
            "source_indices": [int(i) for i in t.spec.source_indices],
        },
        "U": _vec(t.U),
        "b_u": _vec(t.b_u),
        "b_vis": _vec(t.b_vis),
    }


def target_from_dict(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    visN, k, m = int(doc["visN"]), int(doc["k"]), int(doc["m"])
    spec = TransferSpec(
        W_t=np.array(doc["spec"]["W_t"], dtype=np.float64).reshape(visN, k),
        b_t=np.array(doc["spec"]["b_t"], dtype=np.float64),
        theta=float(doc["spec"]["theta"]),
        source_indices=np.array(doc["spec"]["source_indices"], dtype=np.int64),
    )
    return TargetRbm(
        spec=spec,
        U=np.array(doc["U"], dtype=np.float64).reshape(visN, m),
        b_u=np.array(doc["b_u"], dtype=np.float64),
        b_vis=np.array(doc["b_vis"], dtype=np.float64),
        visible_type=doc["visible_type"],
    )


def save_model(model, path):
    """Write an Rbm or TargetRbm as versioned JSON."""
    if isinstance(model, Rbm):
        doc = rbm_to_dict(model)
    elif isinstance(model, TargetRbm):
        doc = target_to_dict(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "w", encoding="ascii") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_model(path):
    """Load a model file written by save_model."""
    with open(path, "r", encoding="ascii") as f:
        doc = json.load(f)
    kind = doc.get("model_kind")
    if kind == "rbm":
        return rbm_from_dict(doc)
    if kind == "target_rbm":
        return target_from_dict(doc)
    raise ValueError(f"unknown model_kind {kind!r}")
