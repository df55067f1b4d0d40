"""Exceptional-point location in the field-free inversion D0."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pumpep.core import ModelParams, pump_from_d0
from pumpep.errors import NoEPError
from pumpep.spectrum import (
    PumpMode,
    build_stability_matrix,
    characteristic_coeffs,
    eigen_set,
    normalized_discriminant,
    spectrum_sweep,
    track_branches,
)

OVERLAP_GATE = 0.999
DEFAULT_SEARCH = (-1 + 1e-6, -1e-6)


def discriminant_at(p: ModelParams, d0: float, pump_mode: PumpMode = "coupled") -> float:
    """Scale-free discriminant of the characteristic cubic; only its sign matters."""
    return normalized_discriminant(characteristic_coeffs(build_stability_matrix(p, d0, pump_mode)))


@dataclass(frozen=True)
class EPResult:
    d0_ep: float
    gamma_p_ep: float
    lambda_ep: complex
    overlap_ep: float
    bracket_width: float
    mode: str
    splitting: float
    bracket: tuple[float, float]
    all_brackets: tuple[tuple[float, float], ...] = field(default=())

    @property
    def is_ep(self) -> bool:
        return self.overlap_ep >= OVERLAP_GATE

    @property
    def status(self) -> str:
        return "ep" if self.is_ep else "diabolic-suspect"


def locate_ep(
    p: ModelParams,
    search: tuple[float, float] = DEFAULT_SEARCH,
    pump_mode: PumpMode = "coupled",
    n_scan: int = 2001,
    tol: float = 1e-12,
) -> EPResult:
    """Find where a complex-conjugate eigenvalue pair collapses onto the real axis.

    A coarse scan looks for discriminant sign changes from negative (pair
    present) to positive (three real roots) with increasing D0; the one at the
    largest D0 is bisected down to ``tol``. The coalescing eigenvectors'
    overlap is reported; below :data:`OVERLAP_GATE` the result is flagged
    ``diabolic-suspect`` rather than an exceptional point.
    """
    lo, hi = map(float, search)
    if not -1.0 <= lo < hi < 1.0:
        raise ValueError(f"search interval must satisfy -1 <= lo < hi < 1, got {search!r}")
    grid = np.linspace(lo, hi, n_scan)
    disc = np.array([discriminant_at(p, d, pump_mode) for d in grid])
    brackets = [
        (float(grid[i]), float(grid[i + 1]))
        for i in range(n_scan - 1)
        if disc[i] < 0 < disc[i + 1] or (disc[i] < 0 and disc[i + 1] == 0)
    ]
    if not brackets:
        raise NoEPError(lo, hi)
    a, b = brackets[-1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if discriminant_at(p, mid, pump_mode) < 0:
            a = mid
        else:
            b = mid
    d_ep = 0.5 * (a + b)
    es = eigen_set(build_stability_matrix(p, d_ep, pump_mode))
    i, j = es.closest_pair()
    gp = pump_from_d0(p, d_ep) if pump_mode == "coupled" else p.gamma_P
    return EPResult(
        d0_ep=d_ep,
        gamma_p_ep=gp,
        lambda_ep=complex(0.5 * (es.lambdas[i] + es.lambdas[j])),
        overlap_ep=float(es.overlaps[i, j]),
        bracket_width=b - a,
        mode=pump_mode,
        splitting=float(abs(es.lambdas[i] - es.lambdas[j])),
        bracket=(a, b),
        all_brackets=tuple(brackets),
    )


@dataclass(frozen=True)
class LocusRow:
    gamma_cor: float
    d0_ep: float
    gamma_p_ep: float
    overlap_ep: float
    bracket_width: float
    status: str  # "ep", "diabolic-suspect" or "no-ep"


LOCUS_HEADER = "gamma_cor,d0_ep,gamma_p_ep,overlap_ep,bracket_width"


def ep_locus(
    p: ModelParams,
    gamma_cor_grid: Sequence[float],
    search: tuple[float, float] = DEFAULT_SEARCH,
    pump_mode: PumpMode = "coupled",
    n_scan: int = 2001,
) -> list[LocusRow]:
    rows = []
    for gc in gamma_cor_grid:
        if gc < 0:
            raise ValueError(f"gamma_cor must be >= 0, got {gc!r}")
        try:
            r = locate_ep(p.updated(gamma_cor=float(gc)), search, pump_mode, n_scan)
        except NoEPError:
            nan = float("nan")
            rows.append(LocusRow(float(gc), nan, nan, nan, nan, "no-ep"))
            continue
        rows.append(LocusRow(float(gc), r.d0_ep, r.gamma_p_ep, r.overlap_ep, r.bracket_width, r.status))
    return rows


@dataclass(frozen=True)
class SplittingRow:
    d0: float
    dim: float
    dre: float
    ambiguous: bool


SPLITTING_HEADER = "d0,dim,dre"


def splitting_curve(
    p: ModelParams, d0_grid: Sequence[float], pump_mode: PumpMode = "coupled"
) -> list[SplittingRow]:
    """|Im| and |Re| separation of tracked branches 2 and 3 along ``d0_grid``.

    A row is marked ambiguous when the branch assignment entering it tied.
    """
    tracked = track_branches(spectrum_sweep(p, d0_grid, pump_mode))
    flags = [False, *tracked.ambiguous]
    rows = []
    for es, amb in zip(tracked.sets, flags):
        l2, l3 = es.lambdas[1], es.lambdas[2]
        rows.append(SplittingRow(es.d0, abs(l2.imag - l3.imag), abs(l2.real - l3.real), amb))
    return rows
