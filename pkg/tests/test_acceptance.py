"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Criteria 5 and 6 train six models each on the two-tank benchmark and take
several minutes.
"""

import time

import numpy as np
import pytest

from lpv_ssid.benchmark import two_tank_benchmark
from lpv_ssid.checks import grad_check, stability_check
from lpv_ssid.evaluation import rmse
from lpv_ssid.model import infer
from lpv_ssid.schurparam import build_transition, fit_to_target, random_factors
from lpv_ssid.train import TrainConfig, make_windows, response_loss, state_loss
from oracles import response_loss_ref, rmse_ref, state_loss_ref, window_starts_ref
from rigs import HALF_W, rigged_baseline, rigged_nnss

GAMMA = 0.99
# two-tank protocol: L=80, s=2, batch 64, lr 1e-3, lambda 0.01, n=2
BENCH_CONFIG = TrainConfig(L=80, stride=2, batch_size=64, learning_rate=1e-3, lam=0.01, order_n=2,
                           epochs=200, patience=20, gamma=GAMMA)
BENCH_SEEDS = (1, 2, 3)
BENCH_LIMIT_S = 15 * 60


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return report


def test_criterion_1_stability(verdict):
    t0 = time.perf_counter()
    res = stability_check(10_000, ns=(1, 2, 3, 4, 5, 6), gammas=(0.5, 0.9, 1.0), eps_range=(-6.0, 2.0), seed=0)
    dt = time.perf_counter() - t0
    ok = res.violations == 0 and res.singular == 0 and dt < 30
    verdict(1, ok, f"{res.samples} draws, {res.violations} violations, {res.singular} singular, "
                   f"max radius/gamma {res.max_ratio:.6f}, {dt:.1f}s")


def test_criterion_2_gradients(verdict):
    t0 = time.perf_counter()
    errs = grad_check(20, seed=0, kind="nnss")
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-5 and dt < 60
    verdict(2, ok, f"20 configurations, max relative error {max(errs):.2e}, {dt:.1f}s")


def test_criterion_3_oracles(verdict):
    rng = np.random.default_rng(0)
    worst = {"response_loss": 0.0, "state_loss": 0.0, "rmse": 0.0}
    window_mismatch = 0
    for _ in range(1000):
        B, T, w = int(rng.integers(1, 5)), int(rng.integers(2, 12)), int(rng.integers(1, 4))
        norm = str(rng.choice(["printed", "natural"]))
        a, b = rng.standard_normal((B, T, w)), rng.standard_normal((B, T, w))
        worst["response_loss"] = max(worst["response_loss"],
                                     abs(response_loss(a, b, norm) - response_loss_ref(a.tolist(), b.tolist(), norm)))
        worst["state_loss"] = max(worst["state_loss"],
                                  abs(state_loss(a, b, norm) - state_loss_ref(a.tolist(), b.tolist(), norm)))
        per, avg = rmse(a[0], b[0])
        ref_per, ref_avg = rmse_ref(a[0].tolist(), b[0].tolist())
        worst["rmse"] = max(worst["rmse"], abs(avg - ref_avg), float(np.abs(per - ref_per).max()))
        K = int(rng.integers(1, 200))
        L, s = int(rng.integers(1, K + 1)), int(rng.integers(1, 12))
        got = [x.origin_index for x in make_windows(np.zeros((K, 1)), np.zeros((K, 1)), L, s)]
        window_mismatch += got != window_starts_ref(K, L, s)
    ok = max(worst.values()) < 1e-12 and window_mismatch == 0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(3, ok, f"1000 cases: {detail}, make_windows mismatches {window_mismatch}")


def test_criterion_4_fit_round_trip(verdict):
    worst = 0.0
    for s in np.random.SeedSequence(0).generate_state(20):
        r = np.random.default_rng(int(s))
        n = int(r.integers(1, 5))
        g = float(r.choice([0.5, 0.9, 0.99, 1.0]))
        A = build_transition(random_factors(r, n, g))
        _, res = fit_to_target(A, g, seed=int(s), max_iter=5000)
        worst = max(worst, res / np.linalg.norm(A))
    verdict(4, worst < 1e-3, f"20 targets, worst relative residual {worst:.2e}")


@pytest.fixture(scope="module")
def benchmark_runs():
    """The two-tank benchmark run twice with identical seeds."""
    return [two_tank_benchmark(BENCH_SEEDS, BENCH_CONFIG) for _ in range(2)]


def test_criterion_5_two_tank(verdict, benchmark_runs):
    res = benchmark_runs[0]
    nn, base = res.median("nnss"), res.median("baseline")
    radius = max(res.radius_max.values())
    ok = res.improvement() >= 0.20 and radius < GAMMA and res.seconds < BENCH_LIMIT_S
    verdict(5, ok, f"median test RMSE NN-SS {nn:.4f} vs baseline {base:.4f} "
                   f"({100 * res.improvement():.1f}% lower), max audited radius {radius:.4f}, "
                   f"{res.seconds / 60:.1f} min")


def test_criterion_6_determinism(verdict, benchmark_runs):
    a, b = benchmark_runs
    gap = max(abs(x - y) for k in a.test_rmse for x, y in zip(a.test_rmse[k], b.test_rmse[k]))
    same_ckpt = a.checkpoints == b.checkpoints
    ok = gap <= 1e-10 and same_ckpt and b.seconds < BENCH_LIMIT_S
    verdict(6, ok, f"max RMSE difference {gap:.1e}, checkpoints identical: {same_ckpt}, "
                   f"repeat took {b.seconds / 60:.1f} min")


def test_criterion_7_hand_recursion(verdict):
    u, y0 = [[1.0], [0.0], [0.0]], [1.0]
    out = {}
    for name, model in (("nnss", rigged_nnss(HALF_W, [[0.0]], [[1.0]], [[1.0]])),
                        ("baseline", rigged_baseline(HALF_W, [[0.0]], [[1.0]], [[1.0]]))):
        out[name] = infer(model, u, y0).outputs[:, 0].tolist()
    ok = all(v == [1.0, 1.5, 0.75] for v in out.values())
    verdict(7, ok, f"outputs {out}")
