"""Versioned JSON checkpoints.

Parameters are stored as flat row-major lists. Python's float repr is the
shortest string that parses back to the same double, so a save/load round
trip is bit-exact.
"""

import json

import numpy as np

from .baseline import ConstantSsModel
from .data import Normalizer
from .model import NnssModel
from .net import DenseLayer, EncoderNet, GeneratorNet
from .schurparam import SchurFactors

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _layers_to_json(mlp):
    return [
        {
            "in": l.in_width,
            "out": l.out_width,
            "activation": l.activation,
            "weight": l.weight.ravel().tolist(),
            "bias": l.bias.tolist(),
        }
        for l in mlp.layers
    ]


def _layers_from_json(items):
    return [
        DenseLayer(np.array(d["weight"], dtype=float).reshape(d["out"], d["in"]),
                   np.array(d["bias"], dtype=float), d["activation"])
        for d in items
    ]


def to_dict(model, normalizer=None, config=None, seed=None):
    d = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "dims": {"n": model.n, "m": model.m, "r": model.r},
        "gamma": model.gamma,
        "eps_tilde": model.eps_tilde,
        "encoder": _layers_to_json(model.encoder),
    }
    if model.kind == "nnss":
        d["generator"] = _layers_to_json(model.generator)
    else:
        d["matrices"] = {k: getattr(model, k).ravel().tolist() for k in ("W", "V", "B", "C")}
    d["normalizer"] = normalizer.to_dict() if normalizer is not None else None
    d["seed"] = seed
    d["config"] = config.to_dict() if config is not None else None
    return d


def from_dict(d):
    """Return ``(model, normalizer, config dict, seed)``."""
    if d.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {d.get('format_version')!r}")
    n, m, r = d["dims"]["n"], d["dims"]["m"], d["dims"]["r"]
    enc = EncoderNet(_layers_from_json(d["encoder"]))
    if d["kind"] == "nnss":
        model = NnssModel(enc, GeneratorNet(_layers_from_json(d["generator"])), n, m, r,
                          d["eps_tilde"], d["gamma"])
    elif d["kind"] == "baseline":
        mats = d["matrices"]
        f = SchurFactors(np.reshape(mats["W"], (2 * n, 2 * n)), np.reshape(mats["V"], (n, n)),
                         d["eps_tilde"], d["gamma"])
        model = ConstantSsModel(f, np.reshape(mats["B"], (n, r)), np.reshape(mats["C"], (m, n)), enc)
    else:
        raise CheckpointError(f"unknown model kind {d['kind']!r}")
    norm = Normalizer.from_dict(d["normalizer"]) if d.get("normalizer") else None
    return model, norm, d.get("config"), d.get("seed")


def save(path, model, normalizer=None, config=None, seed=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_dict(model, normalizer, config, seed), fh, indent=1)
        fh.write("\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
