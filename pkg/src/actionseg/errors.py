"""Exception types shared across the package."""


class ActionSegError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ActionSegError, ValueError):
    """Invalid or inconsistent configuration values."""


class CorpusError(ActionSegError, ValueError):
    """Malformed corpus file or inconsistent corpus contents."""


class GrammarError(ActionSegError, ValueError):
    """Malformed grammar file or invalid automaton."""


class LengthEstimationError(ActionSegError, RuntimeError):
    """Length estimation did not converge within its iteration budget.

    Carries the best iterate seen so far and its projected-gradient norm.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class TrainingDivergedError(ActionSegError, RuntimeError):
    """Training loss became non-finite; carries the last finite network."""

    def __init__(self, message, net=None, trace=None):
        super().__init__(message)
        self.net = net
        self.trace = trace if trace is not None else []


class InfeasibleDecodeError(ActionSegError, RuntimeError):
    """No segmentation satisfies the grammar/stride/length constraints."""


class OracleGuardError(ActionSegError, ValueError):
    """Brute-force oracle invoked on an instance exceeding its size guard."""
