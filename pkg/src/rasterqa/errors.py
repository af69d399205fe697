"""Exception hierarchy shared across the toolkit.

Every failure class callers are expected to branch on gets its own type;
everything else raises plain ValueError at the point of misuse.
"""


class RasterQAError(Exception):
    """Base class for all toolkit-specific errors."""


class StructuralError(RasterQAError):
    """Shape/dimension mismatch between rasters that must share a frame."""


class DomainError(RasterQAError):
    """An argument is outside its mathematical domain (gsd <= 0, even window, ...)."""


class PlanParseError(RasterQAError):
    """Plan document could not be parsed.

    Carries a machine-readable ``code`` and the 1-based ``line`` where the
    problem was found (0 when it applies to the document as a whole).
    """

    def __init__(self, code: str, message: str, line: int = 0):
        super().__init__(f"{code} (line {line}): {message}" if line else f"{code}: {message}")
        self.code = code
        self.line = line


class PlanValidationError(RasterQAError):
    """Plan is structurally well formed but not executable as written."""

    def __init__(self, issues):
        super().__init__("; ".join(i.message for i in issues))
        self.issues = list(issues)


class ExecutionError(RasterQAError):
    """A plan step failed while running (backend fault, empty average, ...)."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class UnparseableGenerationError(RasterQAError):
    """Model output did not contain a parsable plan; keeps the raw text for logs."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class CompletionError(RasterQAError):
    """Transport-level failure talking to the completion endpoint."""


class MockLookupError(CompletionError):
    """No canned response registered for the requested key."""


class DegenerateStatisticError(RasterQAError):
    """The statistic is undefined on this input (zero variance, zero median)."""


class StoreError(RasterQAError):
    """Backend store manifest or file problem (missing entry, bad dimensions)."""
