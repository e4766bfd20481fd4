"""Exception types shared across the package."""


class ImpulseError(Exception):
    """Base class for all package errors."""


class DomainError(ImpulseError, ValueError):
    """An argument lies outside the domain of the function."""


class ExtrapolationError(DomainError):
    """A tabulated function was queried beyond its grid."""


class NumericError(ImpulseError, ArithmeticError):
    """A numerical routine produced non-finite values or failed to converge."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ShapeError(ImpulseError, ValueError):
    """Array dimensions do not agree with the state space."""


class ErgodicityError(ImpulseError):
    """The Doeblin coefficient is not below one, so the chain is not uniformly ergodic."""

    def __init__(self, message, coefficient=None):
        super().__init__(message)
        self.coefficient = coefficient


class ConvergenceError(NumericError):
    """An iteration hit its cap before meeting the stopping rule."""

    def __init__(self, message, last_span=None, iterations=None):
        super().__init__(message, achieved=last_span)
        self.last_span = last_span
        self.iterations = iterations


class StrategyError(ImpulseError, ValueError):
    """A stationary strategy does not satisfy psi(D^c) in D."""


class DegenerateTieError(StrategyError):
    """Strategy extraction hit a tie that would shift into the intervention region."""

    def __init__(self, message, cycle=()):
        super().__init__(message)
        self.cycle = tuple(cycle)


class SizeError(ImpulseError, ValueError):
    """A combinatorial guard was exceeded."""


class ScenarioError(ImpulseError):
    """A scenario file failed to parse or violates a modelling assumption.

    ``diagnostics`` holds one dict per problem with keys ``code``,
    ``assumption`` (e.g. ``"A2"`` or ``None``), ``location`` and ``message``.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = [f"[{d.get('assumption') or d['code']}] {d['location']}: {d['message']}"
                 for d in self.diagnostics]
        super().__init__("; ".join(lines) if lines else "invalid scenario")
