"""Error type shared by every module.

Failures carry a short machine-readable ``code`` (for example
``"EMPTY_CENTERS"``) so callers and the CLI can branch on the failure kind
without parsing messages.
"""


class ClusteringError(ValueError):
    """Raised for invalid input or an infeasible request."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class NormalizationWarning(UserWarning):
    """A group of objective values could not be normalized cleanly."""
