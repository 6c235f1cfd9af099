"""Compare NN-SS against the constant-matrix baseline on synthetic two-tank data.

Usage: python3 scripts/two_tank_benchmark.py [--seeds 1,2,3] [--epochs 200]
"""

import argparse

from lpv_ssid.benchmark import two_tank_benchmark
from lpv_ssid.train import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--data-seed", type=int, default=7)
    args = p.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    res = two_tank_benchmark(seeds, TrainConfig(epochs=args.epochs), args.steps, args.data_seed,
                             log=lambda s: print(s, flush=True))
    for kind, vals in res.test_rmse.items():
        print(f"{kind:9s} test rmse per seed {[round(v, 5) for v in vals]}  median {res.median(kind):.5f}"
              f"  max radius {res.radius_max[kind]:.5f}")
    print(f"median improvement over baseline: {100 * res.improvement():.1f}%")
    print(f"elapsed: {res.seconds:.1f} s")


if __name__ == "__main__":
    main()
