"""Closed-form stationary values against the exact linear solve.

Prints, for each D0, the closed-form and exact-solve triples side by side
and the relative gap in each component, for both source scalings.
"""

from __future__ import annotations

import argparse

import numpy as np

from pumpep.core import default_params, stationary_exact, stationary_closed_form


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma-cor", type=float, default=0.0)
    ap.add_argument("--d0", type=float, nargs="*", default=[-0.9, -0.5, -1 / 3, -0.1, -1e-2])
    args = ap.parse_args()
    for source in ("unscaled", "collective"):
        p = default_params(gamma_cor=args.gamma_cor, source=source)
        print(f"source = {source}")
        print(f"{'D0':>10} {'n closed':>12} {'n exact':>12} {'gap n':>9} {'gap phi':>9} {'gap s':>9}")
        for d0 in args.d0:
            q = p.with_d0(d0)
            a, b = stationary_closed_form(q, d0), stationary_exact(q, d0)
            gaps = [abs(x - y) / max(abs(x), abs(y)) for x, y in zip(a[:3], b[:3])]
            print(f"{d0:>10.4g} {a.n_st:>12.5e} {b.n_st:>12.5e} " + " ".join(f"{g:>9.2e}" for g in gaps))
        print()


if __name__ == "__main__":
    np.set_printoptions(precision=6)
    main()
