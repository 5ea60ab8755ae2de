"""Exception hierarchy for the numerical core"""

__all__ = [
    'DomainError',
    'PoleError',
    'ModeIndexError',
    'CFLError',
    'NumericalError',
    'OverflowRangeError',
    'BracketError',
    'GridTooShortError',
    'StiffnessError',
    'QuadratureError',
    'EmptyProjectorError',
    'EigenSolverError',
    'NonFiniteError',
    'FitError',
    'CheckFailed',
]


class DomainError(ValueError):
    """Input outside the domain of an operation"""


class PoleError(DomainError):
    """Gamma function evaluated at a nonpositive integer"""


class ModeIndexError(DomainError, IndexError):
    """Angular index j with |j| > ell"""


class CFLError(DomainError):
    """Courant number outside (0, 1)"""


class NumericalError(RuntimeError):
    """A numerical method failed to deliver its result"""


class OverflowRangeError(NumericalError):
    """Argument beyond the representable range of a special function"""


class BracketError(NumericalError):
    """Root or extremum could not be bracketed"""


class GridTooShortError(NumericalError):
    """Asymptotic matching tolerance unreachable on the allowed domain"""


class StiffnessError(NumericalError):
    """ODE stepper gave up"""


class QuadratureError(NumericalError):
    """Quadrature did not converge.

    Attributes:
        panels: panel count of the last attempt
        delta: change between the last two refinements
    """

    def __init__(self, message: str, panels: int = 0, delta: float = float("nan")):
        super().__init__(f"{message} (panels={panels}, last refinement delta={delta:.3e})")
        self.panels = panels
        self.delta = delta


class EmptyProjectorError(NumericalError):
    """No sampled eigenvalue lies in the requested interval"""


class EigenSolverError(NumericalError):
    """Dense eigensolver failed or returned a poor residual"""


class NonFiniteError(NumericalError):
    """Time stepping produced NaN or inf.

    Attributes:
        step: index of the offending step
        time: simulation time at that step
    """

    def __init__(self, message: str, step: int, time: float):
        super().__init__(f"{message} at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


class FitError(NumericalError):
    """Decay fit impossible: too few samples or nonpositive envelope"""


class CheckFailed(NumericalError):
    """A verification check did not meet its tolerance"""
