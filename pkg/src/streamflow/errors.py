"""Exception hierarchy shared by every layer of the engine."""
from __future__ import annotations


class StreamflowError(Exception):
    """Base class for all engine errors."""


# timeline / values

class TimestampError(StreamflowError, ValueError):
    """A timestamp could not be parsed, or carries sub-millisecond precision."""


class EmptyInterval(StreamflowError, ValueError):
    pass


class ValueModelError(StreamflowError, TypeError):
    """A document value falls outside the JSON-compatible value model."""


# stream identity

class InvalidName(StreamflowError, ValueError):
    pass


class DuplicateMetaKey(StreamflowError, ValueError):
    pass


# channels

class ChannelError(StreamflowError):
    pass


class StreamExists(ChannelError):
    pass


class UnknownStream(ChannelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DuplicateTimestamp(ChannelError):
    pass


class TimestampOutsideCover(ChannelError):
    pass


class NotComputed(ChannelError):
    """Raised when reading a range that is not (fully) in the stream's ledger."""

    def __init__(self, stream_id, missing):
        self.stream_id = stream_id
        self.missing = missing
        super().__init__(f"{stream_id}: not computed over {missing}")


class Unsupported(ChannelError):
    pass


class UnknownChannel(ChannelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# tools

class ToolError(StreamflowError):
    pass


class UnknownTool(ToolError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class VersionUnsatisfied(ToolError):
    pass


class ArityMismatch(ToolError):
    pass


class ParameterInvalid(ToolError, ValueError):
    pass


class SourceNotComputed(ToolError):
    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"source {index}: {cause}")


class SplitKeyMissing(ToolError):
    pass


class InvalidInput(ToolError):
    """A source document does not have the shape the tool expects."""


class ToolContractError(ToolError):
    """A tool produced output violating the execution postconditions."""


class ExternalResourceUnavailable(ToolError):
    pass


class ParseFailure(ToolError):
    def __init__(self, locus, message):
        self.locus = locus
        super().__init__(f"{locus}: {message}")


# plates / workflows

class UnknownPlate(StreamflowError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownTag(StreamflowError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class CycleDetected(StreamflowError):
    def __init__(self, members):
        self.members = tuple(members)
        super().__init__("cycle detected among: " + ", ".join(map(str, self.members)))


class SchemaViolation(StreamflowError, ValueError):
    def __init__(self, path, message=""):
        self.path = path
        super().__init__(f"{path}: {message}" if message else path)


class UnsupportedSchemaVersion(StreamflowError, ValueError):
    pass


class InvalidWorkflow(StreamflowError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UpstreamFailed(StreamflowError):
    pass


class DefinitionSyntaxError(StreamflowError, ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = path, line, column
        super().__init__(f"{path}:{line}:{column}: {message}")
