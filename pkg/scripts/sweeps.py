"""Write the standard sweeps as CSV plus SVG plots.

    python3 scripts/sweeps.py --outdir results/

Produces the stationary inversion against pump ratio (both source
scalings), tracked eigenvalues and the pair overlap over D0 for four
correlation rates, and the exceptional-point locus.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from pumpep.cli import atomic_write, csv_text
from pumpep.core import default_params
from pumpep.ep import LOCUS_HEADER, ep_locus, locate_ep
from pumpep.integrator import dst_curve
from pumpep.spectrum import SPECTRUM_HEADER, spectrum_rows, spectrum_sweep, track_branches
from pumpep.svgplot import line_plot

GAMMA_COR = (0.0, 1.5e-3, 5e-3, 1e-2)


def inversion_curve(outdir: Path, source: str) -> None:
    p = default_params(source=source)
    ratios = np.linspace(0, 2, 41)
    rows = dst_curve(p, ratios)
    atomic_write(outdir / f"dst_{source}.csv", csv_text(
        "pump_ratio,D_st,D_0,converged", [(r.pump_ratio, r.d_st, r.d0, r.converged) for r in rows]))
    atomic_write(outdir / f"dst_{source}.svg", line_plot(
        [("D_st", ratios, [r.d_st for r in rows]), ("D_0", ratios, [r.d0 for r in rows])],
        f"stationary inversion ({source} source)", "gamma_P / gamma_D", "D"))
    dev = max(abs(r.d_st - r.d0) for r in rows if r.pump_ratio < 1)
    print(f"inversion [{source}]: max |D_st - D_0| below ratio 1 = {dev:.4f}")


def spectra(outdir: Path, n_grid: int) -> None:
    p0 = default_params()
    grid = np.linspace(-1, 0, n_grid)
    for gc in GAMMA_COR:
        p = p0.updated(gamma_cor=gc)
        tracked = track_branches(spectrum_sweep(p, grid))
        tag = f"{gc:.1e}"
        atomic_write(outdir / f"spectrum_{tag}.csv", csv_text(SPECTRUM_HEADER, spectrum_rows(tracked)))
        d = tracked.d0
        atomic_write(outdir / f"re_{tag}.svg", line_plot(
            [(f"Re lambda{k}", d, tracked.branch(k).real) for k in (1, 2, 3)],
            f"decay rates, gamma_cor={gc:g}", "D0", "Re lambda / omega"))
        atomic_write(outdir / f"im_{tag}.svg", line_plot(
            [(f"Im lambda{k}", d, tracked.branch(k).imag) for k in (1, 2, 3)],
            f"frequencies, gamma_cor={gc:g}", "D0", "Im lambda / omega"))
        ov23 = [es.overlaps[1, 2] for es in tracked.sets]
        atomic_write(outdir / f"overlap_{tag}.svg", line_plot(
            [("|<h2,h3>|", d, ov23)], f"eigenvector overlap, gamma_cor={gc:g}", "D0", "overlap"))
        ep = locate_ep(p)
        print(f"spectrum gamma_cor={gc:g}: d0_ep={ep.d0_ep:.8e} overlap={ep.overlap_ep:.12f}")


def locus(outdir: Path) -> None:
    rows = ep_locus(default_params(), np.linspace(0, 1e-2, 21))
    atomic_write(outdir / "ep_locus.csv", csv_text(
        LOCUS_HEADER, [(r.gamma_cor, r.d0_ep, r.gamma_p_ep, r.overlap_ep, r.bracket_width) for r in rows]))
    atomic_write(outdir / "ep_locus.svg", line_plot(
        [("D0 at EP", [r.gamma_cor for r in rows], [r.d0_ep for r in rows])],
        "exceptional-point locus", "gamma_cor / omega", "D0_ep"))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--grid", type=int, default=2001, help="D0 points for the spectra")
    args = ap.parse_args()
    outdir = Path(args.outdir)
    t0 = time.perf_counter()
    spectra(outdir, args.grid)
    locus(outdir)
    for source in ("unscaled", "collective"):
        inversion_curve(outdir, source)
    print(f"wrote {outdir}/ in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
