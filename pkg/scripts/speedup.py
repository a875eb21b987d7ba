"""Propagation time of the birth-death model against the number of workers."""

import argparse
import os

from pcfgppl import corpus_path
from pcfgppl.codegen import compile_file
from pcfgppl.smc import SmcConfig, run_smc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", type=int, default=100_000)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--model", default="crbd_toy")
    args = ap.parse_args()
    prog = compile_file(corpus_path(args.model)).pcfg
    print(f"cpus available: {len(os.sched_getaffinity(0))}")
    base = None
    for t in args.threads:
        r = run_smc(prog, SmcConfig(particles=args.particles, seed=77, threads=t))
        p = r.timings["propagate"]
        base = base or p
        print(f"threads {t}: propagate {p:.2f} s, speedup {base / p:.2f}x, logZ {r.log_z:.4f}")


if __name__ == "__main__":
    main()
