"""Exception hierarchy shared across the codec stack.

Decode-side failures are deliberately fine-grained so that callers (and the
CLI exit-code table) can distinguish a wrong key or corrupted stegotext from
genuine ambiguity.
"""


class StegError(Exception):
    """Base class for all liststeg errors."""


class InvalidDistributionError(StegError):
    """Raw probability vector cannot be quantized (all zero / negative)."""


class StreamExhaustedError(StegError):
    """Keyed random stream ran out of counter space (2^64 blocks)."""


class DesyncError(StegError):
    """Decoder state diverged: the observed token maps to no candidate.

    Typical causes: wrong key, mismatched model, corrupted stegotext.
    """


class TruncatedStegotextError(StegError):
    """Stegotext ended before the full message could be recovered."""


class SuffixMatchError(StegError):
    """No surviving candidate carries the expected validation suffix."""


class AmbiguousDecodeError(StegError):
    """Suffix-matching candidates disagree on the payload prefix.

    This is a correctness violation whose probability is bounded by
    ``collision_bound``; it is counted, never silently resolved.
    """


class UndefinedUtilizationError(StegError):
    """Utilization is undefined because the trace carries zero information."""


class TokenBudgetError(StegError):
    """Encoder hit the max-token cap before the message was fully embedded."""

    def __init__(self, message: str, tokens_emitted: int, bits_embedded: int):
        super().__init__(message)
        self.tokens_emitted = tokens_emitted
        self.bits_embedded = bits_embedded


class TransportError(StegError):
    """Distribution-server connection or I/O failure."""


class ModelProtocolError(StegError):
    """Distribution server answered with an error object or malformed data."""
