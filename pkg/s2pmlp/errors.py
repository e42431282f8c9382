"""Exception hierarchy for the two-party stack.

Every error derives from S2PError and from the builtin it refines, so callers
can catch either.
"""
from typing import Optional


class S2PError(Exception):
    """Base class for all errors raised by s2pmlp"""


class DimensionError(S2PError, ValueError):
    """Matrix shapes do not conform"""


class UnsupportedDimensionError(DimensionError):
    """Shape is valid in general but too small for the requested construction"""


class NonFiniteError(S2PError, ValueError):
    """A matrix contains NaN or Inf where finite entries are required"""


class UsageError(S2PError, ValueError):
    """Invalid call: bad parameters, unknown protocol, empty dataset"""


class ProtocolAbortError(S2PError, RuntimeError):
    """Session cannot make progress (closed or timed-out channel)"""


class TamperDetectedError(S2PError):
    """Result verification rejected the shares of a protocol instance"""

    def __init__(self, protocol: str, party: str, round_index: int):
        self.protocol = protocol
        self.party = party
        self.round_index = round_index
        super().__init__(
            f"verification rejected {protocol} at {party} in round {round_index}"
        )


class SingularInputError(S2PError, ArithmeticError):
    """Reciprocal of a (near) zero reconstructed value"""


class ExpRangeError(S2PError, OverflowError):
    """Share magnitude outside the range of the local exponential"""


class FormatError(S2PError, ValueError):
    """Malformed dataset file"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class ReportWriteError(S2PError, OSError):
    """Report or model file could not be written"""
