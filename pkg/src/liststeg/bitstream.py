"""Bit-level message values: immutable bit strings and the shared secret key.

Bit positions are 1-based throughout (bit 1 is the most significant), so a
bit string of length L is addressed by indices 1..L.  Equal-length bit
strings compare lexicographically, which coincides with comparing their
big-endian integer values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Union

_BitsInput = Union[str, Iterable[int]]


class BitString:
    """An immutable sequence of bits with 1-based, MSB-first indexing."""

    __slots__ = ("_length", "_value")

    def __init__(self, bits: _BitsInput = ""):
        if isinstance(bits, str):
            if bits and set(bits) - {"0", "1"}:
                raise ValueError(f"not a bit string: {bits!r}")
            self._length = len(bits)
            self._value = int(bits, 2) if bits else 0
        else:
            value = 0
            length = 0
            for b in bits:
                if b not in (0, 1):
                    raise ValueError(f"bit must be 0 or 1, got {b!r}")
                value = (value << 1) | b
                length += 1
            self._length = length
            self._value = value

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        """Big-endian interpretation: value is the numeric value of the bits."""
        if length < 0:
            raise ValueError("length must be >= 0")
        if value < 0 or value >> length:
            raise ValueError(f"value {value} does not fit in {length} bits")
        out = cls.__new__(cls)
        out._length = length
        out._value = value
        return out

    @property
    def length(self) -> int:
        return self._length

    def __len__(self) -> int:
        return self._length

    def bit(self, i: int) -> int:
        """Bit at 1-based position i (1 = most significant)."""
        if not 1 <= i <= self._length:
            raise IndexError(f"bit index {i} out of range [1, {self._length}]")
        return (self._value >> (self._length - i)) & 1

    def prefix(self, k: int) -> "BitString":
        """First k bits."""
        if not 0 <= k <= self._length:
            raise IndexError(f"prefix length {k} out of range [0, {self._length}]")
        return BitString.from_int(self._value >> (self._length - k), k)

    def slice(self, i: int, j: int) -> "BitString":
        """Bits i..j inclusive, 1-based.  Empty when j == i - 1."""
        if not (1 <= i <= j + 1 and j <= self._length):
            raise IndexError(
                f"slice [{i}, {j}] out of range for length {self._length}"
            )
        width = j - i + 1
        return BitString.from_int((self._value >> (self._length - j)) & ((1 << width) - 1), width)

    def concat(self, other: "BitString") -> "BitString":
        return BitString.from_int(
            (self._value << other._length) | other._value,
            self._length + other._length,
        )

    def __add__(self, other: "BitString") -> "BitString":
        return self.concat(other)

    def to_int(self) -> int:
        return self._value

    def to01(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    def __iter__(self) -> Iterator[int]:
        for i in range(1, self._length + 1):
            yield self.bit(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._length == other._length and self._value == other._value

    def __hash__(self) -> int:
        return hash((self._length, self._value))

    def __lt__(self, other: "BitString") -> bool:
        # Lexicographic order; for equal lengths this is numeric order.
        if self._length == other._length:
            return self._value < other._value
        n = min(self._length, other._length)
        a = self._value >> (self._length - n)
        b = other._value >> (other._length - n)
        if a != b:
            return a < b
        return self._length < other._length

    def __le__(self, other: "BitString") -> bool:
        return self == other or self < other

    def __repr__(self) -> str:
        if self._length <= 64:
            return f"BitString({self.to01()!r})"
        return f"BitString(<{self._length} bits>)"

    def pack(self) -> bytes:
        """Serialize: 8-byte big-endian bit count, then bits packed MSB-first
        with zero padding in the final byte."""
        nbytes = (self._length + 7) // 8
        pad = nbytes * 8 - self._length
        body = (self._value << pad).to_bytes(nbytes, "big") if nbytes else b""
        return self._length.to_bytes(8, "big") + body

    @classmethod
    def unpack(cls, data: bytes) -> "BitString":
        if len(data) < 8:
            raise ValueError("truncated bit string: missing length header")
        length = int.from_bytes(data[:8], "big")
        nbytes = (length + 7) // 8
        if len(data) != 8 + nbytes:
            raise ValueError(
                f"bit string payload is {len(data) - 8} bytes, expected {nbytes}"
            )
        pad = nbytes * 8 - length
        value = int.from_bytes(data[8:], "big") >> pad if nbytes else 0
        return cls.from_int(value, length)


EMPTY = BitString()


def concat(a: BitString, b: BitString) -> BitString:
    return a.concat(b)


def prefix(m: BitString, k: int) -> BitString:
    return m.prefix(k)


def slice_bits(m: BitString, i: int, j: int) -> BitString:
    return m.slice(i, j)


KEY_BYTES = 32


@dataclass(frozen=True)
class SecretKey:
    """256-bit shared key.  Equality is bitwise."""

    data: bytes

    def __post_init__(self):
        if not isinstance(self.data, bytes) or len(self.data) != KEY_BYTES:
            raise ValueError(f"key must be exactly {KEY_BYTES} bytes")

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        text = text.strip()
        if len(text) != 2 * KEY_BYTES:
            raise ValueError(f"key must be {2 * KEY_BYTES} hex characters")
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.data.hex()

    def __repr__(self) -> str:  # never leak key material in logs
        return "SecretKey(<redacted>)"
