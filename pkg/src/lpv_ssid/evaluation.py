"""Simulation-mode evaluation, RMSE metrics, order/seed sweeps and exports.

Results CSV columns: ``order,seed,split,channel,rmse`` where ``channel`` is a
1-based output index or ``avg`` for the channel mean. Prediction CSV columns:
``k,y1..ym,yhat1..yhatm``.
"""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import infer
from .net import ShapeMismatch

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class EvalReport:
    per_channel: dict = field(default_factory=dict)  # split -> array of channel RMSEs
    rmse: dict = field(default_factory=dict)  # split -> channel-averaged RMSE
    radius_min: float = float("nan")
    radius_max: float = float("nan")
    seed: int = None
    order: int = None
    error: str = None


def rmse(measured, predicted):
    """Per-channel RMSE over time and its mean across channels."""
    y = np.asarray(measured, dtype=float)
    yh = np.asarray(predicted, dtype=float)
    if y.ndim == 1:
        y, yh = y[:, None], yh.reshape(-1, 1) if yh.ndim == 1 else yh
    if y.shape != yh.shape:
        raise ShapeMismatch(f"measured {y.shape} vs predicted {yh.shape}")
    per = np.sqrt(np.mean((y - yh) ** 2, axis=0))
    return per, float(per.mean())


def simulate_split(model, series, audit=True):
    """Encode the first output once, then roll freely over the whole split."""
    if series.K < 2:
        raise ValueError("a split needs more than one step")
    trace = infer(model, series.inputs, series.outputs[0], audit=audit)
    return trace.outputs, trace.spectral_radii


def simulate_and_report(model, splits, normalizer=None, denormalize=False, audit=True,
                        seed=None, order=None):
    """Simulation-mode report over named splits (normalized series).

    Returns ``(EvalReport, predictions)`` where ``predictions`` maps each split
    to ``(measured, predicted)`` in the units the RMSE was computed in.
    """
    if not isinstance(splits, dict):
        splits = {"test": splits}
    if denormalize and normalizer is None:
        raise ValueError("denormalize needs the normalizer")
    report = EvalReport(seed=seed, order=order if order is not None else model.n)
    preds = {}
    radii = []
    for name, s in splits.items():
        yhat, rad = simulate_split(model, s, audit)
        radii.extend(rad)
        y = s.outputs
        if denormalize:
            y, yhat = normalizer.invert_outputs(y), normalizer.invert_outputs(yhat)
        per, avg = rmse(y, yhat)
        report.per_channel[name] = per
        report.rmse[name] = avg
        preds[name] = (y, yhat)
    if radii:
        report.radius_min, report.radius_max = float(min(radii)), float(max(radii))
    return report, preds


def build_model(kind, order, m, r, config, init=None):
    from .baseline import ConstantSsModel
    from .model import NnssModel

    if kind == "nnss":
        return NnssModel.create(order, m, r, tuple(config.enc_hidden), tuple(config.gen_hidden),
                                config.activation, config.gamma, config.seed)
    if kind == "baseline":
        return ConstantSsModel.create(order, m, r, tuple(config.enc_hidden), config.gamma,
                                      config.seed, A_init=init)
    raise ValueError(f"unknown model kind {kind!r}")


def train_and_report(kind, order, seed, config, splits):
    """Fit one model on ``splits['train']`` and report on every split."""
    from dataclasses import replace

    from .train import fit, make_windows

    cfg = replace(config, order_n=order, seed=seed)
    tr = splits["train"]
    model = build_model(kind, order, tr.m, tr.r, cfg)
    windows = make_windows(tr.outputs, tr.inputs, cfg.L, cfg.stride)
    val = (splits["val"].outputs, splits["val"].inputs)
    model, train_report = fit(model, windows, val, cfg)
    report, _ = simulate_and_report(model, splits, seed=seed, order=order)
    return model, train_report, report


def _cell(args):
    kind, order, seed, config, splits = args
    try:
        return train_and_report(kind, order, seed, config, splits)[2]
    except Exception as exc:  # a failed cell must not end the sweep
        logger.warning("sweep cell order=%s seed=%s failed: %s", order, seed, exc)
        return EvalReport(seed=seed, order=order, error=f"{type(exc).__name__}: {exc}")


def worker_count():
    env = os.environ.get("LPV_SSID_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def sweep(orders, seeds, config, splits, kind="nnss", workers=None):
    """Train and evaluate every (order, seed) cell; reports sorted by that key."""
    jobs = [(kind, o, s, config, splits) for o in orders for s in seeds]
    workers = min(workers or worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_cell, jobs))
    else:
        reports = [_cell(j) for j in jobs]
    return sorted(reports, key=lambda r: (r.order, r.seed))


def results_rows(reports, splits=("test",), per_channel=False):
    for rep in reports:
        for split in splits:
            if rep.error is not None or split not in rep.rmse:
                yield [rep.order, rep.seed, split, "avg", "nan"]
                continue
            if per_channel:
                for i, v in enumerate(rep.per_channel[split], start=1):
                    yield [rep.order, rep.seed, split, i, repr(float(v))]
            yield [rep.order, rep.seed, split, "avg", repr(rep.rmse[split])]


def write_results_csv(path, reports, splits=("test",), per_channel=False):
    """One row per (order, seed, split); ``per_channel`` adds per-output rows."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "seed", "split", "channel", "rmse"])
        w.writerows(results_rows(reports, splits, per_channel))


def write_predictions_csv(path, measured, predicted):
    y = np.atleast_2d(np.asarray(measured).T).T
    yh = np.atleast_2d(np.asarray(predicted).T).T
    m = y.shape[1]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"y{i + 1}" for i in range(m)] + [f"yhat{i + 1}" for i in range(m)])
        for k in range(y.shape[0]):
            w.writerow([k] + ["%.17g" % v for v in y[k]] + ["%.17g" % v for v in yh[k]])


def plot_predictions(path, measured, predicted, sample_time=None, title=None):
    """Static SVG line chart of measured vs simulated output, one panel per channel."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    y = np.atleast_2d(np.asarray(measured).T).T
    yh = np.atleast_2d(np.asarray(predicted).T).T
    t = np.arange(y.shape[0]) * (sample_time or 1.0)
    fig, axes = plt.subplots(y.shape[1], 1, figsize=(8, 2.5 * y.shape[1]), squeeze=False, sharex=True)
    for i, ax in enumerate(axes[:, 0]):
        ax.plot(t, y[:, i], "k-", lw=1.0, label="measured")
        ax.plot(t, yh[:, i], "r--", lw=1.0, label="simulated")
        ax.set_ylabel(f"y{i + 1}")
    axes[0, 0].legend(loc="best")
    axes[-1, 0].set_xlabel("time [s]" if sample_time else "k")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
