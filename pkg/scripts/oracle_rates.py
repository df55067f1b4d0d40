"""Fitted relaxation rates of every dissipator from the two-molecule master equation."""

from __future__ import annotations

import argparse

import numpy as np

from pumpep.oracle import DISSIPATORS, analytic_cor_rates, isolated_params, verify_dissipator


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rates", type=float, nargs="*", default=list(np.logspace(-4, -2, 3)))
    ap.add_argument("--n-max", type=int, default=3)
    args = ap.parse_args()
    for name in DISSIPATORS:
        for rate in args.rates:
            print(verify_dissipator(isolated_params(name, rate), name, n_max=args.n_max).summary())
    print("\ncorrelation-to-energy-flow ratio by molecule count")
    for n in (2, 3, 10, 100, 10**6):
        print(f"  N={n:<8} {analytic_cor_rates(n, 1.0)[2]:.6f}")


if __name__ == "__main__":
    main()
