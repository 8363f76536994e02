#!/usr/bin/env python3
"""Interpolation-error refinement study for both element families."""
import argparse
import sys

from ifelab.experiments import emit, interpolation_convergence
from ifelab.problems import get_example


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--example", default="ex1",
                    choices=["ex1", "ex2", "ex3", "ex4"])
    ap.add_argument("--beta-plus", type=float, default=10.0)
    ap.add_argument("--beta-minus", type=float, default=1000.0)
    ap.add_argument("--nmax", type=int, default=128)
    args = ap.parse_args(argv)
    prob = get_example(args.example, args.beta_plus, args.beta_minus)
    Ns = []
    n = 8
    while n <= args.nmax:
        Ns.append(n)
        n *= 2
    for kind in ("cr", "rq1"):
        print(emit(interpolation_convergence(prob, kind, Ns), "text"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
