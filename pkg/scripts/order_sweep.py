"""Sweep NN-SS model orders and seeds on synthetic two-tank data and write a results CSV.

Usage: python3 scripts/order_sweep.py --orders 1,2,3 --seeds 0,1,2 --epochs 50 --out sweep.csv
"""

import argparse

from lpv_ssid.benchmark import two_tank_splits
from lpv_ssid.evaluation import SPLITS, sweep, write_results_csv
from lpv_ssid.train import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--orders", default="1,2,3")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--model", choices=("nnss", "baseline"), default="nnss")
    p.add_argument("--out", default="sweep.csv")
    args = p.parse_args()
    orders = [int(x) for x in args.orders.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    splits, _ = two_tank_splits()
    reports = sweep(orders, seeds, TrainConfig(epochs=args.epochs), splits, kind=args.model)
    write_results_csv(args.out, reports, SPLITS, per_channel=False)
    for rep in reports:
        print(f"order {rep.order} seed {rep.seed}: " + (rep.error or f"test rmse {rep.rmse['test']:.5f}"))


if __name__ == "__main__":
    main()
