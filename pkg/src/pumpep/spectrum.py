"""Linear stability of the (n, phi, s) subsystem at frozen inversion.

The 3x3 linearization matrix is solved through its characteristic cubic;
eigenvectors come from cross products of rows of M - lambda*I.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from pumpep.core import ModelParams, gamma_sigma, pump_from_d0
from pumpep.errors import DomainError, RankDeficiencyError

PumpMode = Literal["coupled", "frozen"]


@dataclass(frozen=True)
class StabilityMatrix:
    entries: np.ndarray
    params: ModelParams
    d0: float
    pump_mode: str = "coupled"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def build_stability_matrix(p: ModelParams, d0: float, pump_mode: PumpMode = "coupled") -> StabilityMatrix:
    """Linearization over (dn, dphi, ds) at field-free inversion ``d0``.

    In ``coupled`` mode the pump rate is re-derived from ``d0`` (so the
    transverse rate follows the pump); ``frozen`` keeps the rates of ``p``.
    """
    if not -1.0 <= d0 < 1.0:
        raise DomainError(f"d0 must lie in [-1, 1), got {d0!r}")
    if pump_mode == "coupled":
        p = p.updated(gamma_P=pump_from_d0(p, d0))
    elif pump_mode != "frozen":
        raise ValueError(f"unknown pump_mode {pump_mode!r}")
    gs = gamma_sigma(p)
    g = p.collective_coupling
    m = np.array(
        [
            [-2 * p.gamma_a, 2 * g, 0.0],
            [g * d0, -(gs + p.gamma_a + p.gamma_cor / 4), (p.n_mol - 1) / p.sqrt_n * p.omega_R],
            [0.0, 2 * g * d0, -(2 * gs + p.gamma_cor)],
        ]
    )
    return StabilityMatrix(m, p, float(d0), pump_mode)


def characteristic_coeffs(M) -> tuple[float, float, float]:
    """(c2, c1, c0) with det(lambda*I - M) = lambda^3 + c2 lambda^2 + c1 lambda + c0."""
    a = np.asarray(getattr(M, "entries", M), dtype=float)
    trace = a[0, 0] + a[1, 1] + a[2, 2]
    minors = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    return float(-trace), float(minors), float(-det)


def cubic_discriminant(c) -> float:
    c2, c1, c0 = c
    return 18 * c2 * c1 * c0 - 4 * c2**3 * c0 + c2**2 * c1**2 - 4 * c1**3 - 27 * c0**2


def coeff_scale(c) -> float:
    """Root magnitude scale: max(|c2|, |c1|^(1/2), |c0|^(1/3))."""
    c2, c1, c0 = c
    return max(abs(c2), math.sqrt(abs(c1)), abs(c0) ** (1 / 3))


def normalized_discriminant(c) -> float:
    """Discriminant of the cubic with roots divided by :func:`coeff_scale`."""
    s = coeff_scale(c)
    if s == 0:
        return 0.0
    c2, c1, c0 = c
    return cubic_discriminant((c2 / s, c1 / s**2, c0 / s**3))


def _newton_polish(c, z):
    c2, c1, c0 = c
    f = ((z + c2) * z + c1) * z + c0
    df = (3 * z + 2 * c2) * z + c1
    if df == 0:
        return z
    z_new = z - f / df
    f_new = ((z_new + c2) * z_new + c1) * z_new + c0
    return z_new if abs(f_new) < abs(f) else z


def _quadratic_roots(b, c):
    """Roots of x^2 + b x + c without cancellation."""
    disc = b * b - 4 * c
    if isinstance(disc, complex) or disc < 0:
        sq = cmath.sqrt(disc)
        q = -0.5 * (b + (sq if (b.conjugate() * sq).real >= 0 else -sq))
    else:
        sq = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(sq, b))
    if q == 0:
        return complex(0.0), complex(0.0)
    r1, r2 = q, c / q
    if isinstance(b, float) and isinstance(c, float) and disc < 0:
        # conjugate pair: enforce exact symmetry
        re = -b / 2
        im = abs(complex(r1).imag)
        return complex(re, im), complex(re, -im)
    return complex(r1), complex(r2)


def cubic_roots(c) -> list[complex]:
    """Roots of the monic cubic lambda^3 + c2 lambda^2 + c1 lambda + c0.

    Trigonometric form for three real roots, Cardano with sign-stable choice
    for one real root followed by deflation otherwise. Each root gets one
    Newton correction on the original cubic.
    """
    c2, c1, c0 = (float(v) for v in c)
    shift = c2 / 3
    p = c1 - c2 * c2 / 3
    q = 2 * c2**3 / 27 - c2 * c1 / 3 + c0
    scale = coeff_scale((c2, c1, c0))
    if scale == 0:
        return [0j, 0j, 0j]
    disc = cubic_discriminant((c2, c1, c0))
    tiny = 1e-14 * scale
    if abs(p) <= tiny**2 and abs(q) <= tiny**3:
        roots = [complex(-shift)] * 3
    elif disc > 0 and p < 0:
        m = 2 * math.sqrt(-p / 3)
        arg = 3 * q / (p * m)
        arg = max(-1.0, min(1.0, arg))
        theta = math.acos(arg) / 3
        roots = [complex(m * math.cos(theta - 2 * math.pi * k / 3) - shift) for k in range(3)]
    else:
        # one real root of the depressed cubic t^3 + p t + q
        h = q * q / 4 + p**3 / 27
        sq = math.sqrt(max(h, 0.0))
        a = -math.copysign(math.pow(abs(q) / 2 + sq, 1 / 3), q)
        t1 = a - p / (3 * a) if a != 0 else 0.0
        r = _newton_polish((c2, c1, c0), t1 - shift).real
        # deflate: (x - r)(x^2 + b x + cc)
        b = c2 + r
        cc = -c0 / r if abs(r) > 0.5 * scale and r != 0 else c1 + r * b
        roots = [complex(r), *_quadratic_roots(b, cc)]
    roots = [_newton_polish((c2, c1, c0), z) for z in roots]
    # conjugation closure for the real-coefficient cubic
    real_roots = [z for z in roots if z.imag == 0]
    cplx = [z for z in roots if z.imag != 0]
    if len(cplx) == 2:
        re = 0.5 * (cplx[0].real + cplx[1].real)
        im = 0.5 * (abs(cplx[0].imag) + abs(cplx[1].imag))
        cplx = [complex(re, im), complex(re, -im)]
    elif len(cplx) == 1:
        real_roots.append(complex(cplx[0].real))
        cplx = []
    return real_roots + cplx


def _fix_phase(h: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(h)))
    h = h / np.linalg.norm(h)
    return h * (abs(h[k]) / h[k])


def eigenvector_for(M, lam: complex) -> np.ndarray:
    """Unit null vector of M - lam*I, largest component made real-positive."""
    a = np.asarray(getattr(M, "entries", M), dtype=complex)
    norm_m = float(np.linalg.norm(a.real, 2)) or 1.0
    A = a - lam * np.eye(3)
    crosses = [np.cross(A[i], A[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    best = max(crosses, key=lambda v: float(np.linalg.norm(v)))
    if np.linalg.norm(best) > 1e-14 * norm_m**2:
        h = _fix_phase(best)
    else:
        h = _inverse_iteration(A, norm_m)
    if np.linalg.norm(a @ h - lam * h) > 1e-10 * norm_m:
        raise RankDeficiencyError(f"no eigenvector found for lambda={lam!r}")
    return h


def _inverse_iteration(A: np.ndarray, norm_m: float) -> np.ndarray:
    shifted = A + 1e-10 * norm_m * np.eye(3)
    x = np.ones(3, dtype=complex) / math.sqrt(3)
    try:
        for _ in range(3):
            x = np.linalg.solve(shifted, x)
            x /= np.linalg.norm(x)
    except np.linalg.LinAlgError:
        # shifted matrix singular: a null vector is any right singular vector with zero value
        _, _, vh = np.linalg.svd(A)
        x = vh[-1].conj()
    return _fix_phase(x)


def overlap_matrix(vectors: np.ndarray) -> np.ndarray:
    """|<h_i, h_j>| / (|h_i| |h_j|) for the columns of ``vectors``."""
    v = np.asarray(vectors)
    norms = np.linalg.norm(v, axis=0)
    g = np.abs(v.conj().T @ v) / np.outer(norms, norms)
    np.fill_diagonal(g, 1.0)
    return np.minimum(g, 1.0)


@dataclass(frozen=True)
class EigenSet:
    d0: float
    lambdas: np.ndarray
    vectors: np.ndarray  # column j pairs with lambdas[j]
    overlaps: np.ndarray
    discriminant: float
    defect_gap: float
    matrix: StabilityMatrix

    def permuted(self, perm: Sequence[int]) -> "EigenSet":
        perm = list(perm)
        return EigenSet(
            self.d0,
            self.lambdas[perm],
            self.vectors[:, perm],
            self.overlaps[np.ix_(perm, perm)],
            self.discriminant,
            self.defect_gap,
            self.matrix,
        )

    def closest_pair(self) -> tuple[int, int]:
        pairs = [(0, 1), (0, 2), (1, 2)]
        return min(pairs, key=lambda ij: abs(self.lambdas[ij[0]] - self.lambdas[ij[1]]))


def _canonical_order(lams: Sequence[complex]) -> list[int]:
    # real roots first (ascending real part), then the pair with +Im before -Im
    return sorted(range(3), key=lambda k: (lams[k].imag != 0, -lams[k].imag, lams[k].real))


def eigen_set(M: StabilityMatrix) -> EigenSet:
    c = characteristic_coeffs(M)
    roots = cubic_roots(c)
    order = _canonical_order(roots)
    lams = np.array([roots[k] for k in order], dtype=complex)
    vecs = np.column_stack([eigenvector_for(M, lam) for lam in lams])
    gap = min(abs(lams[i] - lams[j]) for i, j in ((0, 1), (0, 2), (1, 2)))
    return EigenSet(M.d0, lams, vecs, overlap_matrix(vecs), cubic_discriminant(c), float(gap), M)


def spectrum_at(p: ModelParams, d0: float, pump_mode: PumpMode = "coupled") -> EigenSet:
    return eigen_set(build_stability_matrix(p, d0, pump_mode))


def spectrum_sweep(p: ModelParams, d0_grid: Sequence[float], pump_mode: PumpMode = "coupled") -> list[EigenSet]:
    return [spectrum_at(p, float(d), pump_mode) for d in d0_grid]


@dataclass(frozen=True)
class TrackedSweep:
    sets: list[EigenSet]  # permuted so index k is branch k+1
    ambiguous: list[bool]  # ambiguous[i] refers to the interval (i, i+1)

    def branch(self, k: int) -> np.ndarray:
        """Eigenvalues of branch ``k`` (1-based) along the grid."""
        return np.array([es.lambdas[k - 1] for es in self.sets])

    @property
    def d0(self) -> np.ndarray:
        return np.array([es.d0 for es in self.sets])


_PERMS = list(itertools.permutations(range(3)))


def track_branches(sweep: Sequence[EigenSet], tie_tol: float = 1e-12) -> TrackedSweep:
    """Label eigenvalues 1..3 continuously along the sweep.

    The first set keeps its canonical order (real root first, then the
    conjugate pair with +Im as branch 2). Each following set takes the
    permutation minimizing total complex distance to its predecessor;
    intervals where the best two permutations differ by at most ``tie_tol``
    are flagged.
    """
    if not sweep:
        return TrackedSweep([], [])
    out = [sweep[0]]
    ambiguous = []
    for es in sweep[1:]:
        prev = out[-1].lambdas
        costs = sorted(
            (sum(abs(es.lambdas[perm[k]] - prev[k]) for k in range(3)), i)
            for i, perm in enumerate(_PERMS)
        )
        best_cost, best = costs[0]
        tied = costs[1][0] - best_cost <= tie_tol
        ambiguous.append(bool(tied))
        out.append(es.permuted(_PERMS[best]))
    return TrackedSweep(out, ambiguous)


def classify_roots(lams: Sequence[complex], rel_tol: float = 1e-8) -> str:
    """'three-real' or 'one-real-pair' by the imaginary parts of the roots."""
    scale = max(abs(z) for z in lams) or 1.0
    n_complex = sum(abs(z.imag) > rel_tol * scale for z in lams)
    return "three-real" if n_complex == 0 else "one-real-pair"


SPECTRUM_HEADER = "d0,re1,im1,re2,im2,re3,im3,ov12,ov13,ov23,disc"


def spectrum_rows(tracked: TrackedSweep) -> list[list[float]]:
    rows = []
    for es in tracked.sets:
        lam, ov = es.lambdas, es.overlaps
        rows.append(
            [
                es.d0,
                lam[0].real, lam[0].imag,
                lam[1].real, lam[1].imag,
                lam[2].real, lam[2].imag,
                ov[0, 1], ov[0, 2], ov[1, 2],
                es.discriminant,
            ]
        )
    return rows
