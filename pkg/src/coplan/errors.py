"""Exception types shared across the package."""


class CoplanError(Exception):
    """Base class for all package-specific errors."""


class ModelError(CoplanError):
    """A model element is malformed or unknown (bad action, predicate, arity)."""


class ParseError(CoplanError):
    """Syntax or semantic error in a domain/problem text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})" if line else message)


class PreconditionError(CoplanError):
    """An action was applied in a state that does not satisfy its preconditions."""

    def __init__(self, action_uid: str, missing):
        self.action_uid = action_uid
        self.missing = tuple(missing)
        atoms = ", ".join(str(a) for a in self.missing)
        super().__init__(f"action {action_uid} is not applicable; missing: {atoms}")


class ValidationError(CoplanError):
    """Invalid configuration or input data."""


class TurnError(CoplanError):
    """An action was submitted out of turn or on a finished session."""


class DigestMismatchError(CoplanError):
    """A session log does not replay to the recorded state digests."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"{message} (log line {line})")


class BudgetExhaustedError(CoplanError):
    """A search-based computation ran out of its node or time budget."""
