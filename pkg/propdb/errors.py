"""Exception hierarchy for propdb."""

from __future__ import annotations


class PropDBError(Exception):
    """Base exception for all propdb errors."""

    pass


class DataError(PropDBError):
    """Raised when a schema, data file or in-memory instance is invalid."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        """Initialize with location details.

        Args:
            message: Error message.
            source: File or relation the error was found in.
            line: 1-based line number within the source, if known.
        """
        location = ""
        if source is not None:
            location = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(f"{location}{message}")
        self.source = source
        self.line = line


class QueryError(PropDBError):
    """Raised when a query is malformed or does not fit the schema."""

    def __init__(self, message: str, position: int | None = None):
        """Initialize with the offending position.

        Args:
            message: Error message.
            position: 0-based character offset in the query text, if known.
        """
        suffix = f" (at offset {position})" if position is not None else ""
        super().__init__(f"{message}{suffix}")
        self.position = position


class AllDeterministicError(QueryError):
    """Raised when a query has no probabilistic atom to separate on."""

    pass


class DissociationError(PropDBError):
    """Raised for invalid, mismatched or unsafe dissociations."""

    pass


class PlanError(PropDBError):
    """Raised when a plan does not fit its query or cannot be built."""

    pass


class OracleError(PropDBError):
    """Raised when an oracle is called with invalid arguments."""

    pass


class OracleInfeasibleError(OracleError):
    """Raised when exact inference exceeds the configured variable limit."""

    def __init__(self, message: str, variables: int = 0, limit: int = 0):
        """Initialize with the size that was rejected.

        Args:
            message: Error message.
            variables: Number of variables in the rejected component.
            limit: Configured variable limit.
        """
        super().__init__(message)
        self.variables = variables
        self.limit = limit


class MetricsError(PropDBError):
    """Raised for rankings that cannot be scored."""

    pass


class UsageError(PropDBError):
    """Raised when a command-line configuration is invalid."""

    pass
