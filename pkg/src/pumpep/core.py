"""Model parameters, the four mean-field equations and their stationary points.

All rates are dimensionless multiples of the transition frequency omega and
time is measured in units of 1/omega.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

from pumpep.errors import DegeneratePumpError, DomainError, SingularSystemError


SOURCE_MODES = ("unscaled", "collective")


@dataclass(frozen=True)
class ModelParams:
    gamma_a: float = 5e-5
    gamma_ph: float = 5e-4
    gamma_D: float = 2e-5
    gamma_P: float = 1e-5
    gamma_cor: float = 0.0
    omega_R: float = 1e-5
    n_mol: int = 1_000_000
    # spontaneous term in dphi/dt: "unscaled" (Omega_R/2)(D+1),
    # "collective" (Omega_R/(2 sqrt N))(D+1)
    source: str = "unscaled"

    def __post_init__(self):
        if self.source not in SOURCE_MODES:
            raise DomainError(f"source must be one of {SOURCE_MODES}, got {self.source!r}")
        for f in fields(self):
            if f.name == "source":
                continue
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise DomainError(f"{f.name} must be finite, got {v!r}")
            if f.name != "n_mol" and v < 0:
                raise DomainError(f"{f.name} must be >= 0, got {v!r}")
        if int(self.n_mol) != self.n_mol or self.n_mol < 2:
            raise DomainError(f"n_mol must be an integer >= 2, got {self.n_mol!r}")
        object.__setattr__(self, "n_mol", int(self.n_mol))

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n_mol)

    @property
    def source_coeff(self) -> float:
        """Coefficient multiplying (D + 1) in dphi/dt."""
        half = self.omega_R / 2
        return half if self.source == "unscaled" else half / self.sqrt_n

    @property
    def collective_coupling(self) -> float:
        """sqrt(N) * Omega_R."""
        return self.sqrt_n * self.omega_R

    def with_d0(self, d0: float) -> "ModelParams":
        """Copy with the pump rate chosen so the field-free inversion equals ``d0``."""
        return replace(self, gamma_P=pump_from_d0(self, d0))

    def updated(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_config(self) -> dict[str, float | int]:
        return {_FIELD_TO_KEY[k]: v for k, v in asdict(self).items()}


# config-file keys are lower case
_KEY_TO_FIELD = {
    "gamma_a": "gamma_a",
    "gamma_ph": "gamma_ph",
    "gamma_d": "gamma_D",
    "gamma_p": "gamma_P",
    "gamma_cor": "gamma_cor",
    "omega_r": "omega_R",
    "n_mol": "n_mol",
    "source": "source",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}


def default_params(**overrides) -> ModelParams:
    """The reference parameter set; the pump defaults to gamma_D / 2 (D0 = -1/3)."""
    return ModelParams(**overrides)


def parse_config(text: str) -> dict[str, float | int]:
    """Parse flat ``key = value`` lines into ModelParams field overrides.

    Blank lines and ``#`` comments are ignored. The value ``paper-defaults``
    for the key ``preset`` is accepted and carries no overrides.
    """
    out: dict[str, float | int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key == "preset":
            if value != "paper-defaults":
                raise ValueError(f"line {lineno}: unknown preset {value!r}")
            continue
        if key not in _KEY_TO_FIELD:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        field = _KEY_TO_FIELD[key]
        if field == "source":
            out[field] = value
        elif field == "n_mol":
            num = float(value)
            if num != int(num):
                raise ValueError(f"line {lineno}: n_mol must be an integer")
            out[field] = int(num)
        else:
            out[field] = float(value)
    return out


def load_config(path: str | Path, base: ModelParams | None = None) -> ModelParams:
    overrides = parse_config(Path(path).read_text())
    return replace(base or default_params(), **overrides)


def format_config(p: ModelParams) -> str:
    return "".join(f"{k} = {v if isinstance(v, str) else repr(v)}\n" for k, v in p.to_config().items())


@dataclass(frozen=True)
class DerivedRates:
    gamma_sigma: float
    d0: float


def derive_rates(p: ModelParams) -> DerivedRates:
    total = p.gamma_P + p.gamma_D
    if total == 0:
        raise DegeneratePumpError("gamma_P + gamma_D must be positive to define D0")
    return DerivedRates(
        gamma_sigma=p.gamma_ph + p.gamma_P / 2 + p.gamma_D / 2,
        d0=(p.gamma_P - p.gamma_D) / total,
    )


def gamma_sigma(p: ModelParams) -> float:
    return p.gamma_ph + p.gamma_P / 2 + p.gamma_D / 2


def pump_from_d0(p: ModelParams, d0: float) -> float:
    """Pump rate giving field-free inversion ``d0`` at the decay rate of ``p``."""
    if not -1.0 <= d0 < 1.0:
        raise DomainError(f"d0 must lie in [-1, 1), got {d0!r}")
    return p.gamma_D * (1 + d0) / (1 - d0)


class MeanFieldState(NamedTuple):
    n: float
    d: float
    phi: float
    s: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, x) -> "MeanFieldState":
        return cls(*(float(v) for v in x))


def _rhs_values(p: ModelParams, gs: float, n, d, phi, s):
    g = p.collective_coupling
    cross = (p.n_mol - 1) / p.sqrt_n * p.omega_R
    dn = -2 * p.gamma_a * n + 2 * g * phi
    dd = p.gamma_P * (1 - d) - p.gamma_D * (1 + d) - 4 * g * phi
    dphi = (
        -(gs + p.gamma_a + p.gamma_cor / 4) * phi
        + p.source_coeff * (d + 1)
        + g * n * d
        + cross * s
    )
    ds = -(2 * gs + p.gamma_cor) * s + 2 * g * phi * d
    return dn, dd, dphi, ds


def mean_field_rhs(p: ModelParams, x) -> MeanFieldState:
    """Time derivative (dn/dt, dD/dt, dphi/dt, ds/dt) of the mean-field system."""
    n, d, phi, s = x
    return MeanFieldState(*_rhs_values(p, gamma_sigma(p), n, d, phi, s))


def rhs_array(p: ModelParams):
    """Return ``f(t, y) -> ndarray`` for the integrator, with constants hoisted."""
    gs = gamma_sigma(p)
    g = p.collective_coupling
    cross = (p.n_mol - 1) / p.sqrt_n * p.omega_R
    ga, gP, gD, src_coef = p.gamma_a, p.gamma_P, p.gamma_D, p.source_coeff
    phi_decay = gs + ga + p.gamma_cor / 4
    s_decay = 2 * gs + p.gamma_cor

    def f(t, y):
        n, d, phi, s = y
        return np.array(
            (
                -2 * ga * n + 2 * g * phi,
                gP * (1 - d) - gD * (1 + d) - 4 * g * phi,
                -phi_decay * phi + src_coef * (d + 1) + g * n * d + cross * s,
                -s_decay * s + 2 * g * phi * d,
            )
        )

    return f


def rhs_jacobian(p: ModelParams, x) -> np.ndarray:
    """Analytic 4x4 Jacobian of the mean-field right-hand side."""
    n, d, phi, s = x
    gs = gamma_sigma(p)
    g = p.collective_coupling
    cross = (p.n_mol - 1) / p.sqrt_n * p.omega_R
    return np.array(
        [
            [-2 * p.gamma_a, 0.0, 2 * g, 0.0],
            [0.0, -(p.gamma_P + p.gamma_D), -4 * g, 0.0],
            [g * d, p.source_coeff + g * n, -(gs + p.gamma_a + p.gamma_cor / 4), cross],
            [0.0, 2 * g * phi, 2 * g * d, -(2 * gs + p.gamma_cor)],
        ]
    )


def residual_norm(p: ModelParams, x) -> float:
    return math.hypot(*mean_field_rhs(p, x))


class StationaryTriple(NamedTuple):
    n_st: float
    phi_st: float
    s_st: float
    source: Literal["closed-form", "exact-solve"]


def _resolve_d0(p: ModelParams, d0: float | None) -> float:
    return derive_rates(p).d0 if d0 is None else float(d0)


def stationary_closed_form(p: ModelParams, d0: float | None = None) -> StationaryTriple:
    """Closed-form stationary (n, phi, s) at inversion ``d0``.

    The molecule count in these formulas is read as ``n_mol``. Kept for
    auditing only: the values do not zero the model equations, and
    :func:`stationary_exact` is the ground truth.
    """
    d0 = _resolve_d0(p, d0)
    if d0 == 0:
        raise ZeroDivisionError("closed-form stationary values divide by D0; D0 = 0 is excluded")
    gs = gamma_sigma(p)
    N = p.n_mol
    den = p.gamma_cor + 2 * gs + 2 * p.gamma_a
    n_st = -(1 + d0) * (p.gamma_cor + 2 * gs) / (2 * N * d0 * den)
    phi_st = -p.gamma_a * (1 + d0) * (p.gamma_cor + 2 * gs) / (
        2 * d0 * N**1.5 * p.omega_R * den
    )
    s_st = -(1 + d0) * gs / (N * den)
    return StationaryTriple(n_st, phi_st, s_st, "closed-form")


def stationary_matrix(p: ModelParams, d0: float) -> np.ndarray:
    """Linear part of the n, phi, s equations at frozen inversion ``d0``."""
    gs = gamma_sigma(p)
    g = p.collective_coupling
    return np.array(
        [
            [-2 * p.gamma_a, 2 * g, 0.0],
            [g * d0, -(gs + p.gamma_a + p.gamma_cor / 4), (p.n_mol - 1) / p.sqrt_n * p.omega_R],
            [0.0, 2 * g * d0, -(2 * gs + p.gamma_cor)],
        ]
    )


def stationary_exact(p: ModelParams, d0: float | None = None) -> StationaryTriple:
    """Solve dn/dt = dphi/dt = ds/dt = 0 at D = d0, keeping the spontaneous source.

    Uses elimination along the forced relations phi = gamma_a n / (sqrt(N) Omega_R)
    and s = 2 gamma_a d0 n / (2 gamma_sigma + gamma_cor), which leaves one
    scalar equation for n. Falls back to a dense solve when Omega_R = 0.
    """
    d0 = _resolve_d0(p, d0)
    source = p.source_coeff * (1 + d0)
    if source == 0:
        return StationaryTriple(0.0, 0.0, 0.0, "exact-solve")
    gs = gamma_sigma(p)
    g = p.collective_coupling
    s_decay = 2 * gs + p.gamma_cor
    phi_decay = gs + p.gamma_a + p.gamma_cor / 4
    cross = (p.n_mol - 1) / p.sqrt_n * p.omega_R
    if g == 0 or s_decay == 0:
        A = stationary_matrix(p, d0)
        if abs(np.linalg.det(A)) <= 1e-300:
            raise SingularSystemError(d0)
        n, phi, s = np.linalg.solve(A, [0.0, -source, 0.0])
        return StationaryTriple(float(n), float(phi), float(s), "exact-solve")
    phi_per_n = p.gamma_a / g
    s_per_n = 2 * p.gamma_a * d0 / s_decay
    # dphi/dt = 0  ->  coef * n + source = 0
    coef = -phi_decay * phi_per_n + g * d0 + cross * s_per_n
    if coef == 0 or abs(coef) <= 1e-14 * (phi_decay * phi_per_n + abs(g * d0) + abs(cross * s_per_n)):
        raise SingularSystemError(d0)
    n = -source / coef
    return StationaryTriple(n, phi_per_n * n, s_per_n * n, "exact-solve")


def stationary_residuals(p: ModelParams, triple, d0: float | None = None) -> tuple[float, float, float]:
    """Right-hand sides of the n, phi and s equations at (triple, D = d0)."""
    d0 = _resolve_d0(p, d0)
    dn, _, dphi, ds = mean_field_rhs(p, (triple[0], d0, triple[1], triple[2]))
    return dn, dphi, ds
