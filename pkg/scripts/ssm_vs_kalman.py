"""Compare SMC estimates for the state-space model with the Kalman filter."""

import argparse
import math
import time

import numpy as np

from pcfgppl import corpus_path
from pcfgppl.codegen import compile_file
from pcfgppl.oracles import SsmParams, kalman_filter
from pcfgppl.smc import SmcConfig, run_smc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", type=int, default=50_000)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=3000)
    args = ap.parse_args()
    c = compile_file(corpus_path("ssm"))
    data = c.checked.consts["data"][1]
    want_z, want_mean, _ = kalman_filter(SsmParams(), data)
    zs, means, secs = [], [], []
    for k in range(args.runs):
        t = time.perf_counter()
        r = run_smc(c.pcfg, SmcConfig(particles=args.particles, seed=args.seed + k))
        secs.append(time.perf_counter() - t)
        zs.append(r.log_z)
        means.append(float(np.dot(r.values(c.pcfg), r.weights)))
    for label, xs, want in (("logZ", zs, want_z), ("mean X_T", means, want_mean)):
        se = np.std(xs, ddof=1) / math.sqrt(args.runs)
        print(f"{label}: smc {np.mean(xs):.5f}  kalman {want:.5f}  "
              f"diff/SE {(np.mean(xs) - want) / se:+.2f}")
    print(f"seconds per run: mean {np.mean(secs):.2f}, max {np.max(secs):.2f}")


if __name__ == "__main__":
    main()
