"""Exception hierarchy shared by the library and the CLI.

Each class maps to one CLI exit code so that scripted callers can
dispatch on failure class without parsing messages.
"""


class SlopeforgeError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class FormatError(SlopeforgeError):
    """Malformed input document (PWA text, matrix text, graph text, TSV)."""

    exit_code = 2


class PreconditionError(SlopeforgeError):
    """An operation was called outside its stated domain."""

    exit_code = 3


class BudgetExceeded(SlopeforgeError):
    """A configured node/point/iteration budget was exhausted."""

    exit_code = 4


class NonConvergence(SlopeforgeError):
    """An iterative procedure did not reach its tolerance."""

    exit_code = 4


class VerificationError(SlopeforgeError):
    """A numeric identity check came out above tolerance."""

    exit_code = 5
