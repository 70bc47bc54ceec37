"""Exception types shared across the pipeline."""


class CommitGenError(Exception):
    """Base class for every error raised by this package."""


class DataError(CommitGenError):
    """Input data could not be used (maps to CLI exit code 3)."""


class ConfigError(CommitGenError):
    """Bad configuration (maps to CLI exit code 2)."""


class ConfigMismatch(ConfigError):
    """A checkpoint or index does not match the vocabulary/config in use."""


class MissingArtifact(CommitGenError):
    """A prerequisite artifact is absent (maps to CLI exit code 4)."""

    def __init__(self, name, path=None):
        self.name = name
        self.path = path
        msg = name if path is None else f"{name} ({path})"
        super().__init__(msg)


# diff parsing
class MalformedDiff(DataError):
    pass


class BadHunkHeader(DataError):
    def __init__(self, line_index, line):
        self.line_index = line_index
        self.line = line
        super().__init__(f"unparseable hunk header at line {line_index}: {line!r}")


# java parsing / paths
class LexError(DataError):
    def __init__(self, line, column, char):
        self.line = line
        self.column = column
        super().__init__(f"illegal character {char!r} at {line}:{column}")


class UnbalancedBraces(DataError):
    pass


class NoEnclosingFunction(DataError):
    pass


class LeafNotInTree(DataError):
    pass


class EmptyContext(DataError):
    pass


# preprocessing
class SchemaError(DataError):
    def __init__(self, line, field):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: {field}")


class EmptyAfterNormalization(DataError):
    pass


class TooFewProjects(DataError):
    pass


# models
class EmptyTrainingSet(DataError):
    pass


class EmptyIndex(DataError):
    pass


class EmptyMessage(DataError):
    pass


# metrics
class EmptyReference(DataError):
    pass


class EmptySequence(DataError):
    pass


# autodiff
class ShapeMismatch(ValueError, CommitGenError):
    def __init__(self, op, a, b):
        self.shapes = (tuple(a), tuple(b))
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")


class NonFiniteDetected(FloatingPointError, CommitGenError):
    pass
