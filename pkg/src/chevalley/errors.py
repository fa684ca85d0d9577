"""Exception hierarchy shared by all modules, with CLI exit codes."""


class ChevalleyError(Exception):
    """Base class; exit_code drives the CLI process status."""

    exit_code = 1


class UsageError(ChevalleyError, ValueError):
    """Caller broke a precondition (bad dimensions, bad index, bad config)."""

    exit_code = 2


class CapabilityError(ChevalleyError):
    """Request is outside what the toolkit supports (type, size, missing data)."""

    exit_code = 2


class IntegrityError(ChevalleyError):
    """Cached or shipped data failed its hash / consistency check."""

    exit_code = 3


class ConvergenceError(ChevalleyError):
    """An iterative solve did not converge within its budget."""

    exit_code = 4


class CheckFailure(ChevalleyError):
    """A verification that should hold mathematically did not; carries a witness."""

    exit_code = 1

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
