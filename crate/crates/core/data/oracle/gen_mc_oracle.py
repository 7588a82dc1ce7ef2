#!/usr/bin/env python3
"""Monte Carlo oracle for the asymptotic KS, CvM and AD null distributions.

Draws PATHS synthetic uniform empirical processes of size N (order statistics
generated from exponential spacings, so no sorting), computes sqrt(n)*D,
W^2 and A^2 for each, and writes the empirical CDF of every statistic on a
fixed grid of evaluation points.

    python3 gen_mc_oracle.py [--paths 1000000] [--n 20000] [--seed 20240917]

Output: mc_asymptotic_cdfs.csv next to this script.
"""
import argparse
import os

import numpy as np

GRIDS = {
    "ks": np.round(np.arange(0.30, 2.401, 0.05), 4),
    "cvm": np.round(np.concatenate([np.arange(0.01, 0.20, 0.01), np.arange(0.20, 1.201, 0.05)]), 4),
    "ad": np.round(np.concatenate([np.arange(0.10, 1.00, 0.05), np.arange(1.0, 6.01, 0.25)]), 4),
}


def statistics(u):
    """u: (paths, n) sorted uniforms -> (sqrt(n) D, W^2, A^2)."""
    n = u.shape[1]
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - u, axis=1)
    d_minus = np.max(u - (i - 1) / n, axis=1)
    ks = np.sqrt(n) * np.maximum(d_plus, d_minus)
    cvm = 1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2, axis=1)
    uc = np.clip(u, 1e-300, 1 - 1e-16)
    ad = -n - np.sum((2 * i - 1) * (np.log(uc) + np.log1p(-uc[:, ::-1])), axis=1) / n
    return ks, cvm, ad


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--chunk", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240917)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    counts = {k: np.zeros(len(g), dtype=np.int64) for k, g in GRIDS.items()}
    done = 0
    while done < args.paths:
        m = min(args.chunk, args.paths - done)
        e = rng.standard_exponential((m, args.n + 1))
        c = np.cumsum(e, axis=1)
        u = c[:, :-1] / c[:, -1:]
        for name, vals in zip(("ks", "cvm", "ad"), statistics(u)):
            counts[name] += np.sum(vals[:, None] <= GRIDS[name][None, :], axis=0)
        done += m

    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "mc_asymptotic_cdfs.csv")
    with open(out, "w") as f:
        f.write("statistic,x,empirical_cdf,paths,n\n")
        for name, grid in GRIDS.items():
            for x, c in zip(grid, counts[name]):
                f.write(f"{name},{x:.4f},{c / args.paths:.7f},{args.paths},{args.n}\n")


if __name__ == "__main__":
    main()
