"""How often does the 50-run log-log slope of std(logZ) for the geometric
program land in -0.5 +/- 0.15?

Without a resample statement the engine's logZ is the plain importance
estimate log(mean(1.5^(n-1))) with n ~ Geometric(0.5), so it can be simulated
directly with numpy. The weights have tail index log 2 / log 1.5 ~ 1.71, so the
error scales like N^(1/1.71 - 1) ~ N^-0.415.
"""

import argparse

import numpy as np


def log_z(rng, n, runs):
    draws = rng.geometric(0.5, size=(runs, n))
    return np.log(np.mean(1.5 ** (draws - 1), axis=1))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--experiments", type=int, default=400)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    sizes = np.array([1_000, 10_000, 100_000])
    slopes = []
    for _ in range(args.experiments):
        stds = [np.std(log_z(rng, n, args.runs), ddof=1) for n in sizes]
        slopes.append(np.polyfit(np.log(sizes), np.log(stds), 1)[0])
    slopes = np.array(slopes)
    inside = np.mean(np.abs(slopes + 0.5) <= 0.15)
    print(f"experiments {args.experiments}, runs {args.runs}")
    print(f"slope median {np.median(slopes):.3f}, 5%-95% "
          f"[{np.quantile(slopes, 0.05):.3f}, {np.quantile(slopes, 0.95):.3f}]")
    print(f"fraction within -0.5 +/- 0.15: {inside:.3f}")


if __name__ == "__main__":
    main()
