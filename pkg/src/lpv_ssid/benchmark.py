"""Two-tank comparison of the NN-SS model against the constant-matrix baseline."""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint, data
from .evaluation import build_model, simulate_and_report
from .train import TrainConfig, fit, make_windows


@dataclass
class BenchmarkResult:
    test_rmse: dict  # kind -> list of per-seed test RMSE (normalized units)
    radius_max: dict  # kind -> largest audited spectral radius over all splits and seeds
    checkpoints: dict  # (kind, seed) -> checkpoint JSON text
    seconds: float
    gamma: float
    epochs_run: dict = field(default_factory=dict)  # (kind, seed) -> epochs

    def median(self, kind):
        return float(np.median(self.test_rmse[kind]))

    def improvement(self):
        """Relative reduction of the NN-SS median against the baseline median."""
        base = self.median("baseline")
        return (base - self.median("nnss")) / base


def two_tank_splits(steps=4000, data_seed=7, noise_std=0.01, fractions=(0.6, 0.2, 0.2)):
    raw = data.synth_two_tank(steps, noise_std=noise_std, seed=data_seed)
    parts = data.chrono_split(raw, fractions)
    norm = data.zscore_fit(parts[0])
    return {name: norm.apply(p) for name, p in zip(("train", "val", "test"), parts)}, norm


def run_one(kind, seed, config, splits, norm=None):
    """Train one model and return ``(model, EvalReport, TrainReport)``."""
    from dataclasses import replace

    cfg = replace(config, seed=seed)
    tr = splits["train"]
    model = build_model(kind, cfg.order_n, tr.m, tr.r, cfg)
    windows = make_windows(tr.outputs, tr.inputs, cfg.L, cfg.stride)
    model, train_report = fit(model, windows, (splits["val"].outputs, splits["val"].inputs), cfg)
    report, _ = simulate_and_report(model, splits, seed=seed, order=cfg.order_n)
    return model, report, train_report


def two_tank_benchmark(seeds=(1, 2, 3), config=None, steps=4000, data_seed=7, noise_std=0.01,
                       kinds=("nnss", "baseline"), log=None):
    """Train every kind for every seed on the same split and collect test RMSEs."""
    config = config or TrainConfig()
    splits, norm = two_tank_splits(steps, data_seed, noise_std)
    t0 = time.perf_counter()
    res = BenchmarkResult({k: [] for k in kinds}, {k: 0.0 for k in kinds}, {}, 0.0, config.gamma)
    for kind in kinds:
        for seed in seeds:
            model, rep, trep = run_one(kind, seed, config, splits, norm)
            res.test_rmse[kind].append(rep.rmse["test"])
            res.radius_max[kind] = max(res.radius_max[kind], rep.radius_max, max(trep.max_spectral_radius))
            res.epochs_run[(kind, seed)] = len(trep.val_rmse)
            res.checkpoints[(kind, seed)] = json.dumps(checkpoint.to_dict(model, norm, config, seed))
            if log:
                log(f"{kind} seed {seed}: test rmse {rep.rmse['test']:.6g}, "
                    f"epochs {len(trep.val_rmse)}, max radius {res.radius_max[kind]:.6g}")
    res.seconds = time.perf_counter() - t0
    return res
