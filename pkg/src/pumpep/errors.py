"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the range where an operation is defined."""


class DegeneratePumpError(DomainError):
    """gamma_P + gamma_D == 0, so the field-free inversion is undefined."""


class SingularSystemError(ArithmeticError):
    def __init__(self, d0: float, message: str = ""):
        self.d0 = d0
        super().__init__(message or f"stationary system is singular at D0={d0!r}")


class StepUnderflowError(RuntimeError):
    def __init__(self, t: float, h: float):
        self.t = t
        self.h = h
        super().__init__(f"step size {h:.3e} underflowed at t={t:.6e}")


class RankDeficiencyError(ArithmeticError):
    """M - lambda*I has rank below 2; no unique eigenvector direction."""


class NoEPError(RuntimeError):
    def __init__(self, lo: float, hi: float):
        self.interval = (lo, hi)
        super().__init__(f"no exceptional point (discriminant sign change) in [{lo!r}, {hi!r}]")


class PositivityError(ArithmeticError):
    """Evolved density matrix acquired a clearly negative eigenvalue."""


class OracleMismatch(AssertionError):
    """A fitted relaxation rate disagrees with its analytic value."""
