"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (shape mismatch, bad weights, bad file)."""


class UnsupportedError(InputError):
    """The operation is not defined for the given shape."""


class CheckFailed(RuntimeError):
    """A verification step could not be asserted; carries the diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
