"""Exception hierarchy shared by all pgmlab modules.

Two broad classes matter for the CLI exit codes: ``ValidationError`` for
structurally bad inputs (exit 2) and ``NumericError`` for computations that
fail on valid inputs (exit 3).
"""


class PgmlabError(Exception):
    """Base class for all pgmlab errors."""


class ValidationError(PgmlabError):
    """Malformed model, dataset, or query (wrong shape, unknown node, ...)."""


class NumericError(PgmlabError):
    """A computation failed on structurally valid input."""


class ImpossibleEvidenceError(NumericError):
    """Observed evidence has probability zero under the model."""


class SingularMatrixError(NumericError):
    """A linear solve or inversion hit a (numerically) singular matrix."""


class NotPositiveDefiniteError(NumericError):
    """A matrix required to be positive definite is not."""


class ConvergenceError(NumericError):
    """An iterative routine ran out of iterations.

    The best iterate found so far is attached as ``last``.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class InseparableError(PgmlabError):
    """No separating set exists (the query nodes are adjacent)."""
