"""Exception hierarchy shared by the solvers, verifier and CLI."""


class TilqError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(TilqError, ValueError):
    """Malformed numeric input: wrong shape, non-finite entries, unmet preconditions."""


class UnsupportedStructureError(TilqError):
    """The problem's coefficient structure is outside what a solver handles."""


class FeasibilityError(TilqError):
    """An operation needs a feasible solution but got an infeasible one."""


class UnsupportedNoiseError(TilqError):
    """Exact enumeration was requested for a noise model without finite support."""


class ResourceLimitError(TilqError):
    """Exhaustive enumeration would exceed the configured step cap."""


class ProblemParseError(TilqError):
    """A problem document does not follow the file schema.

    ``path`` is a JSONPath-like pointer to the offending element.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class ProblemValidationError(TilqError):
    """A parsed problem violates one or more structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = "" if len(self.violations) <= 10 else f" (+{len(self.violations) - 10} more)"
        super().__init__(f"{len(self.violations)} violation(s): {lines}{more}")
