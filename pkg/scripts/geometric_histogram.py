"""Posterior of the weighted geometric program next to its closed form."""

import argparse
import math

from pcfgppl import corpus_path
from pcfgppl.codegen import compile_file
from pcfgppl.oracles import weighted_geometric_pmf
from pcfgppl.smc import SmcConfig, run_smc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()
    prog = compile_file(corpus_path("geometric")).pcfg
    r = run_smc(prog, SmcConfig(particles=args.particles, seed=args.seed))
    pmf = {}
    for v, w in zip(r.values(prog), r.weights):
        pmf[v] = pmf.get(v, 0.0) + float(w)
    print(" n  smc      exact")
    for n in range(1, 11):
        print(f"{n:2d}  {pmf.get(n, 0.0):.4f}   {weighted_geometric_pmf(n):.4f}")
    print(f"logZ {r.log_z:.4f} (ln 2 = {math.log(2):.4f}), {r.timings['total']:.2f} s")


if __name__ == "__main__":
    main()
