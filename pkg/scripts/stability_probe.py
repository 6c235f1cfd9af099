"""Histogram of spectral radius / gamma over random Schur factor draws.

Usage: python3 scripts/stability_probe.py --samples 10000 --out radii.svg
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lpv_ssid.numkernel import spectral_radius
from lpv_ssid.schurparam import build_transition, random_factors


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="radii.svg")
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    ratios = []
    for _ in range(args.samples):
        n, g = int(rng.integers(1, 7)), float(rng.choice([0.5, 0.9, 1.0]))
        ratios.append(spectral_radius(build_transition(random_factors(rng, n, g))).spectral_radius / g)
    ratios = np.array(ratios)
    print(f"max ratio {ratios.max():.6f}, violations {(ratios >= 1).sum()}")
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.hist(ratios, bins=50)
    ax.set_xlabel("spectral radius / gamma")
    fig.tight_layout()
    fig.savefig(args.out, format="svg")


if __name__ == "__main__":
    main()
