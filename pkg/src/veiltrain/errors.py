"""Exception types raised across the package."""


class VeiltrainError(Exception):
    """Base class for all package errors."""


class MagnitudeOverflow(VeiltrainError):
    """A real value does not fit the representable fixed-point range."""


class SessionMismatch(VeiltrainError):
    """Shares from different sessions were combined."""


class PartyMismatch(VeiltrainError):
    """Shares from the same party were combined as if they were a full sharing."""


class TripleReuse(VeiltrainError):
    """A multiplication triple was consumed twice."""


class RoundDesync(VeiltrainError):
    """Peers disagree on the current round counter."""


class ConfigMismatch(VeiltrainError):
    """The two computing parties loaded different public configs."""

    def __init__(self, key, mine=None, theirs=None):
        self.key = key
        self.mine = mine
        self.theirs = theirs
        detail = f" (mine={mine!r}, peer={theirs!r})" if mine is not None else ""
        super().__init__(f"config mismatch on key {key!r}{detail}")


class ConnectTimeout(VeiltrainError):
    """A peer was unreachable within the configured deadline."""


class Exhausted(VeiltrainError):
    """The parties requested more correlated randomness than was provisioned."""


class ParseError(VeiltrainError):
    """A CSV or config file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelDomainError(VeiltrainError):
    """A label outside {0, 1} was encountered."""

    def __init__(self, value, line=None):
        self.line = line
        at = f" at line {line}" if line is not None else ""
        super().__init__(f"label value {value!r}{at} is not in {{0, 1}}")


class PlanInvalid(VeiltrainError):
    """A partition plan is inconsistent with the dataset shape."""


class DimensionMismatch(VeiltrainError):
    """Model and data dimensions disagree."""


class VerticalUnsupported(VeiltrainError):
    """The federated baseline only supports horizontally partitioned data."""


class NonFinite(VeiltrainError):
    """Training diverged to non-finite values."""
