"""Exception hierarchy shared by every layer of the package."""


class DistQMLError(Exception):
    """Base class for all package errors."""


class CapacityError(DistQMLError):
    """Requested more qubits than the dense simulator can hold."""


class QubitIndexError(DistQMLError, IndexError):
    """A qubit reference does not address the state it is applied to."""


class ArgumentError(DistQMLError, ValueError):
    """Malformed arguments: overlapping operands, out-of-range inputs, ..."""


class LocalityViolation(DistQMLError):
    """A multi-qubit gate was requested across two or more devices."""


class ResourceError(DistQMLError):
    """A GHZ resource was reused, malformed, or placed on the wrong devices."""


class PreconditionError(DistQMLError):
    """The quantum state does not satisfy an operation's precondition."""


class VerificationError(DistQMLError):
    """A result failed an exactness check (e.g. non-deterministic sum)."""


class DegenerateInputError(DistQMLError):
    """Post-selection would succeed with (numerically) zero probability."""


class DatasetParseError(DistQMLError):
    """A dataset file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
