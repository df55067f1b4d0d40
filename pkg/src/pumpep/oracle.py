"""Exact density-matrix dynamics for two molecules in a truncated cavity.

Used to check the relaxation rates that each dissipator contributes to the
mean-field equations. Basis ordering is molecule 1 (g, e) x molecule 2 (g, e)
x Fock (0..n_max); the Hamiltonian is taken in the frame rotating at the
common resonance frequency, leaving only the coupling term.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from pumpep.core import ModelParams
from pumpep.errors import OracleMismatch, PositivityError

N_MOL = 2
DISSIPATORS = ("cavity", "dephasing", "decay", "pump", "correlation")
_ALIASES = {"cav": "cavity", "ph": "dephasing", "d": "decay", "p": "pump", "cor": "correlation"}


def canonical_dissipator(name: str) -> str:
    name = name.lower()
    name = _ALIASES.get(name, name)
    if name not in DISSIPATORS:
        raise ValueError(f"unknown dissipator {name!r}; expected one of {DISSIPATORS}")
    return name


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int = 3

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def dim(self) -> int:
        return 4 * (self.n_max + 1)


@dataclass(frozen=True)
class OperatorSet:
    a: np.ndarray
    sigma: tuple[np.ndarray, np.ndarray]
    D: tuple[np.ndarray, np.ndarray]
    H_rot: np.ndarray

    @property
    def adag(self) -> np.ndarray:
        return self.a.conj().T


def build_operators(space: HilbertSpace, omega_R: float) -> OperatorSet:
    nf = space.n_max + 1
    a_f = np.diag(np.sqrt(np.arange(1, nf)), 1).astype(complex)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    i2, i_f = np.eye(2), np.eye(nf)
    a = np.kron(np.kron(i2, i2), a_f)
    s1 = np.kron(np.kron(sm, i2), i_f)
    s2 = np.kron(np.kron(i2, sm), i_f)
    d1 = s1.conj().T @ s1 - s1 @ s1.conj().T
    d2 = s2.conj().T @ s2 - s2 @ s2.conj().T
    adag = a.conj().T
    H = omega_R * sum(adag @ s + a @ s.conj().T for s in (s1, s2))
    return OperatorSet(a, (s1, s2), (d1, d2), H)


@dataclass(frozen=True)
class DissipatorSpec:
    which: frozenset = field(default_factory=frozenset)
    rates: dict = field(default_factory=dict)

    @classmethod
    def from_params(cls, p: ModelParams, which: Iterable[str]) -> "DissipatorSpec":
        names = frozenset(canonical_dissipator(w) for w in which)
        lookup = {
            "cavity": p.gamma_a,
            "dephasing": p.gamma_ph,
            "decay": p.gamma_D,
            "pump": p.gamma_P,
            "correlation": p.gamma_cor,
        }
        return cls(names, {k: lookup[k] for k in names})


def _lindblad_term(c: np.ndarray, rate: float) -> np.ndarray:
    """rate * (c rho c^+ - {c^+ c, rho}/2) on row-major vec(rho)."""
    dim = c.shape[0]
    eye = np.eye(dim)
    cdc = c.conj().T @ c
    return rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))


def _correlation_term(ops: OperatorSet, gamma_cor: float) -> np.ndarray:
    # literal form: gamma_cor/(4N) sum_{i<j} [(Di-Dj) rho (Di-Dj) - (1-DiDj) rho - rho (1-DiDj)]
    d1, d2 = ops.D
    dim = d1.shape[0]
    eye = np.eye(dim)
    diff = d1 - d2
    q = eye - d1 @ d2
    pref = gamma_cor / (4 * N_MOL)
    return pref * (np.kron(diff, diff.T) - np.kron(q, eye) - np.kron(eye, q.T))


@dataclass(frozen=True)
class Liouvillian:
    matrix: np.ndarray
    space: HilbertSpace
    ops: OperatorSet
    spec: DissipatorSpec
    has_hamiltonian: bool


def build_liouvillian(
    space: HilbertSpace,
    ops: OperatorSet,
    p: ModelParams,
    spec: DissipatorSpec,
    hamiltonian: bool = True,
) -> Liouvillian:
    """Generator of the master equation acting on row-major vec(rho).

    Coefficients are chosen so that the operator averages relax as in the
    mean-field equations: cavity 2*gamma_a on a, dephasing gamma_ph/2 on each
    D_j, decay gamma_D on each sigma_j, pump gamma_P on each sigma_j^+. The
    correlation term is assembled literally from the (D_i - D_j) form.
    """
    dim = space.dim
    if ops.a.shape != (dim, dim):
        raise ValueError("operator set does not match the Hilbert space")
    eye = np.eye(dim)
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    use_h = hamiltonian and p.omega_R != 0
    if use_h:
        H = ops.H_rot
        L += -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    rates = spec.rates
    if "cavity" in spec.which:
        L += _lindblad_term(ops.a, 2 * rates["cavity"])
    for j in range(N_MOL):
        if "dephasing" in spec.which:
            L += _lindblad_term(ops.D[j], rates["dephasing"] / 2)
        if "decay" in spec.which:
            L += _lindblad_term(ops.sigma[j], rates["decay"])
        if "pump" in spec.which:
            L += _lindblad_term(ops.sigma[j].conj().T, rates["pump"])
    if "correlation" in spec.which:
        L += _correlation_term(ops, rates["correlation"])
    return Liouvillian(L, space, ops, spec, use_h)


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12, pos_tol: float = 1e-10) -> None:
        r = self.rho
        if np.max(np.abs(r - r.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if self.min_eigenvalue() < -pos_tol:
            raise ValueError("density matrix is not positive semidefinite")

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


def basis_state(space: HilbertSpace, mol1: str, mol2: str, photons: int) -> np.ndarray:
    idx = {"g": 0, "e": 1}
    if not 0 <= photons <= space.n_max:
        raise ValueError("photon number outside the truncated space")
    nf = space.n_max + 1
    v = np.zeros(space.dim, dtype=complex)
    v[(idx[mol1] * 2 + idx[mol2]) * nf + photons] = 1.0
    return v


def pure_state(psi: np.ndarray) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def evolve(L: Liouvillian, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """rho(t) = exp(L t) rho0 via scaling-and-squaring of the generator."""
    dim = L.space.dim
    if rho0.rho.shape != (dim, dim):
        raise ValueError("initial state does not match the Hilbert space")
    if L.has_hamiltonian:
        nf = L.space.n_max + 1
        top = np.real(np.diag(rho0.rho))[nf - 1 :: nf].sum()
        if top > 1e-12:
            warnings.warn("initial state populates the top Fock level; truncation may distort dynamics")
    if t == 0:
        return DensityMatrix(rho0.rho.copy())
    vec = expm(L.matrix * t) @ rho0.rho.reshape(-1)
    out = DensityMatrix(vec.reshape(dim, dim))
    lam = out.min_eigenvalue()
    if lam < -1e-8:
        raise PositivityError(f"min eigenvalue {lam:.3e} at t={t!r}; dissipator assembly is broken")
    return out


def evolve_series(L: Liouvillian, rho0: DensityMatrix, times: Sequence[float]) -> list[DensityMatrix]:
    return [evolve(L, rho0, float(t)) for t in times]


OBSERVABLES = ("n", "D", "phi", "s", "sigma1dag_sigma2", "adag_sigma1")


def expectation(rho: DensityMatrix, ops: OperatorSet, which: str):
    """Scaled mean-field observable (n, D, phi, s) or a raw operator average."""
    r = rho.rho
    N = N_MOL
    s1, s2 = ops.sigma
    adag = ops.adag

    def avg(op):
        return complex(np.trace(r @ op))

    if which == "n":
        return avg(adag @ ops.a).real / N
    if which == "D":
        return sum(avg(d).real for d in ops.D) / N
    if which == "phi":
        ssum = s1 + s2
        val = 1j / (2 * N**1.5) * avg(ops.a @ ssum.conj().T - adag @ ssum)
        return val.real
    if which == "s":
        tot = avg(s1.conj().T @ s2) + avg(s2.conj().T @ s1)
        return (tot / (N * (N - 1))).real
    if which == "sigma1dag_sigma2":
        return avg(s1.conj().T @ s2)
    if which == "adag_sigma1":
        return avg(adag @ s1)
    raise ValueError(f"unknown observable {which!r}")


@dataclass(frozen=True)
class DecayFit:
    rate: float
    residual: float
    exponential: bool


def fit_decay_rate(times: Sequence[float], values: Sequence) -> DecayFit:
    """Negated least-squares slope of log|value| against time.

    ``residual`` is the RMS deviation of log|value| from the line; the series
    is flagged non-exponential when it exceeds 1e-6 of the log dynamic range.
    """
    t = np.asarray(times, dtype=float)
    v = np.abs(np.asarray(values))
    if t.size < 10:
        raise ValueError("need at least 10 samples")
    if np.any(v <= 0):
        raise ValueError("values must be bounded away from zero")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t + intercept)) ** 2)))
    span = float(np.ptp(y))
    exponential = resid <= 1e-6 * span if span > 0 else resid <= 1e-12
    if not exponential:
        warnings.warn(f"series is not a clean exponential (rms log residual {resid:.3e})")
    return DecayFit(float(-slope) + 0.0, resid, exponential)


def analytic_cor_rates(n_mol: float, gamma_cor: float) -> tuple[float, float, float]:
    """(energy-flow rate, correlation rate, their ratio) added by the correlation
    dissipator for ``n_mol`` molecules."""
    if n_mol < 2:
        raise ValueError("n_mol must be >= 2")
    return gamma_cor * (n_mol - 1) / (2 * n_mol), gamma_cor, 2 * n_mol / (n_mol - 1)


@dataclass(frozen=True)
class RateCheck:
    dissipator: str
    observable: str
    fitted_rate: float
    analytic_rate: float

    @property
    def rel_err(self) -> float:
        return abs(self.fitted_rate - self.analytic_rate) / abs(self.analytic_rate)


REPORT_HEADER = "dissipator,observable,fitted_rate,analytic_rate,rel_err"


def _coherent_photon_state(space: HilbertSpace) -> DensityMatrix:
    # (|g,1> + |e,0>)/sqrt(2) on molecule 1, molecule 2 in g
    return pure_state(basis_state(space, "g", "g", 1) + basis_state(space, "e", "g", 0))


def _symmetric_state(space: HilbertSpace) -> DensityMatrix:
    return pure_state(basis_state(space, "e", "g", 0) + basis_state(space, "g", "e", 0))


def _expected_rates(name: str, rate: float) -> list[tuple[str, float]]:
    return {
        "cavity": [("n", 2 * rate), ("adag_sigma1", rate)],
        "dephasing": [("adag_sigma1", rate), ("sigma1dag_sigma2", 2 * rate)],
        "decay": [("adag_sigma1", rate / 2), ("sigma1dag_sigma2", rate), ("1+D", rate)],
        "pump": [("adag_sigma1", rate / 2), ("sigma1dag_sigma2", rate), ("1-D", rate)],
        "correlation": [("adag_sigma1", rate / 4), ("sigma1dag_sigma2", rate)],
    }[name]


_RATE_FIELD = {
    "cavity": "gamma_a",
    "dephasing": "gamma_ph",
    "decay": "gamma_D",
    "pump": "gamma_P",
    "correlation": "gamma_cor",
}


@dataclass
class VerificationReport:
    dissipator: str
    rate: float
    n_max: int
    checks: list[RateCheck]
    tolerance: float = 5e-3

    @property
    def ratio(self) -> RateCheck | None:
        """Correlation-to-energy-flow rate ratio, when both were measured."""
        by_obs = {c.observable: c for c in self.checks}
        if "sigma1dag_sigma2" in by_obs and "adag_sigma1" in by_obs:
            s, f = by_obs["sigma1dag_sigma2"], by_obs["adag_sigma1"]
            return RateCheck(
                self.dissipator, "ratio_s_over_phi",
                s.fitted_rate / f.fitted_rate, s.analytic_rate / f.analytic_rate,
            )
        return None

    def rows(self) -> list[RateCheck]:
        extra = self.ratio
        return self.checks + ([extra] if extra else [])

    @property
    def passed(self) -> bool:
        return all(c.rel_err <= self.tolerance for c in self.rows())

    def summary(self) -> str:
        lines = [f"dissipator {self.dissipator} at rate {self.rate:g} (n_max={self.n_max})"]
        for c in self.rows():
            mark = "ok" if c.rel_err <= self.tolerance else "MISMATCH"
            lines.append(
                f"  {c.observable:<18} fitted {c.fitted_rate:.8e}  analytic {c.analytic_rate:.8e}"
                f"  rel_err {c.rel_err:.2e}  {mark}"
            )
        return "\n".join(lines)


def verify_dissipator(
    p: ModelParams,
    which: str,
    n_max: int = 3,
    n_samples: int = 50,
    tolerance: float = 5e-3,
    strict: bool = False,
) -> VerificationReport:
    """Fit the relaxation rate of each observable the dissipator acts on.

    Only the named dissipator is active and the coupling Hamiltonian is off.
    Each fit spans [0, 2/analytic rate]. With ``strict`` an
    :class:`OracleMismatch` is raised when any relative error exceeds
    ``tolerance``.
    """
    name = canonical_dissipator(which)
    rate = getattr(p, _RATE_FIELD[name])
    if rate <= 0:
        raise ValueError(f"rate for {name} must be positive to be verified")
    space = HilbertSpace(n_max)
    ops = build_operators(space, 0.0)
    L = build_liouvillian(space, ops, p, DissipatorSpec.from_params(p, [name]), hamiltonian=False)

    checks = []
    for obs, expected in _expected_rates(name, rate):
        if obs == "n":
            rho0 = pure_state(basis_state(space, "g", "g", 1))
        elif obs == "adag_sigma1":
            rho0 = _coherent_photon_state(space)
        elif obs == "sigma1dag_sigma2":
            rho0 = _symmetric_state(space)
        elif obs == "1+D":
            rho0 = pure_state(basis_state(space, "e", "e", 0))
        else:  # 1-D
            rho0 = pure_state(basis_state(space, "g", "g", 0))
        times = np.linspace(0.0, 2.0 / expected, n_samples)
        # propagate with a single step generator to keep cost linear in samples
        step = expm(L.matrix * (times[1] - times[0]))
        vec = rho0.rho.reshape(-1)
        values = []
        for _ in times:
            rho = DensityMatrix(vec.reshape(space.dim, space.dim))
            if obs == "1+D":
                values.append(1 + expectation(rho, ops, "D"))
            elif obs == "1-D":
                values.append(1 - expectation(rho, ops, "D"))
            else:
                values.append(expectation(rho, ops, obs))
            vec = step @ vec
        fit = fit_decay_rate(times, values)
        checks.append(RateCheck(name, obs, fit.rate, expected))
    report = VerificationReport(name, rate, n_max, checks, tolerance)
    if strict and not report.passed:
        raise OracleMismatch(report.summary())
    return report


def isolated_params(which: str, rate: float) -> ModelParams:
    """Parameters with only the named rate non-zero and no coupling."""
    name = canonical_dissipator(which)
    zero = dict(gamma_a=0.0, gamma_ph=0.0, gamma_D=0.0, gamma_P=0.0, gamma_cor=0.0, omega_R=0.0)
    zero[_RATE_FIELD[name]] = rate
    return ModelParams(n_mol=N_MOL, **zero)


def product_populations(rho: DensityMatrix) -> np.ndarray:
    return np.real(np.diag(rho.rho)).copy()


def commutator_check(ops: OperatorSet, space: HilbertSpace) -> float:
    """max |[a, a^+] - 1| on Fock levels below the cutoff."""
    comm = ops.a @ ops.adag - ops.adag @ ops.a
    nf = space.n_max + 1
    keep = [i for i in range(space.dim) if i % nf != nf - 1]
    sub = comm[np.ix_(keep, keep)]
    return float(np.max(np.abs(sub - np.eye(len(keep)))))

