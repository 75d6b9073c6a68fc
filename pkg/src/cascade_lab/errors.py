"""Exception hierarchy shared by every module.

The CLI maps these to exit codes: input/domain refusals exit 2, resource
caps exit 3, failed ``--assert`` checks exit 4.
"""


class CascadeError(Exception):
    exit_code = 1


class InputError(CascadeError, ValueError):
    exit_code = 2


class DomainError(CascadeError, ValueError):
    """A law or parameter lies outside the region where an operation is defined."""

    exit_code = 2

    def __init__(self, message, classification=None):
        super().__init__(message)
        self.classification = classification


class DivergenceError(DomainError):
    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class ResourceError(CascadeError):
    exit_code = 3


class AcceptanceFailure(CascadeError):
    exit_code = 4
