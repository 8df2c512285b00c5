"""Keyed deterministic random streams shared by encoder and decoder.

Construction: AES-256 in counter mode over an all-zero plaintext.  The
16-byte initial counter block is

    [ domain label : 1 byte ][ zeros : 7 bytes ][ block index : 8 bytes BE ]

so streams with different domain labels never share counter blocks.  The
SAMPLING domain feeds candidate sampling; the SUFFIX domain yields the
validation suffix.  Output values are pinned by test vectors shipped in the
repository (tests/vectors/), so independent implementations interoperate.

The stream is consumed at bit granularity: ``next_u64`` is exactly
``next_bits(64)`` interpreted big-endian.  No floating point is ever
produced; uniform reals are represented by their raw 64-bit numerators.
"""

from __future__ import annotations

import enum

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .bitstream import EMPTY, BitString, SecretKey
from .errors import StreamExhaustedError

_BLOCK = 16
_MAX_BLOCKS = 1 << 64  # counter field width; beyond this the label byte would be disturbed
_CHUNK = 1 << 16

_zeros = bytearray(_CHUNK)


def _zero_view(n: int) -> memoryview:
    global _zeros
    if len(_zeros) < n:
        _zeros = bytearray(n)
    return memoryview(_zeros)[:n]


class Domain(enum.IntEnum):
    SAMPLING = 0
    SUFFIX = 1


class PrgStream:
    """Single-owner, forward-only keyed random stream.

    Output is a pure function of (key, domain, position): two independently
    constructed streams with the same parameters yield identical bits.
    """

    def __init__(self, key: SecretKey, domain: int):
        initial = bytes([int(domain)]) + bytes(15)
        self._enc = Cipher(algorithms.AES(key.data), modes.CTR(initial)).encryptor()
        self._domain = int(domain)
        self._bit_pos = 0
        self._byte_buf = b""
        self._byte_off = 0
        self._bit_buf = 0   # pending sub-byte bits, MSB-aligned in an int
        self._bit_cnt = 0
        self._generated = 0
        self._scratch = bytearray()

    @property
    def domain(self) -> int:
        return self._domain

    @property
    def position(self) -> int:
        """Total bits consumed so far."""
        return self._bit_pos

    def _take_bytes(self, n: int) -> bytes:
        """Next n raw keystream bytes (sub-byte bit state is the caller's)."""
        out = bytearray(n)
        filled = 0
        avail = len(self._byte_buf) - self._byte_off
        if avail:
            take = min(avail, n)
            out[:take] = self._byte_buf[self._byte_off : self._byte_off + take]
            self._byte_off += take
            filled = take
        remaining = n - filled
        if remaining:
            if remaining >= _CHUNK:
                buf = bytearray(remaining + _BLOCK)
                self._enc.update_into(_zero_view(remaining), buf)
                out[filled:] = buf[:remaining]
                self._note_generated(remaining)
            else:
                buf = bytearray(_CHUNK + _BLOCK)
                self._enc.update_into(_zero_view(_CHUNK), buf)
                self._note_generated(_CHUNK)
                self._byte_buf = bytes(buf[:_CHUNK])
                self._byte_off = remaining
                out[filled:] = self._byte_buf[:remaining]
        return bytes(out)

    def _note_generated(self, nbytes: int) -> None:
        self._generated += nbytes
        if self._generated > _MAX_BLOCKS * _BLOCK:
            raise StreamExhaustedError("keyed stream exhausted its counter space")

    def next_bits(self, k: int) -> BitString:
        """Next k bits of the stream as a BitString."""
        if k < 0:
            raise ValueError("bit count must be >= 0")
        if k == 0:
            return EMPTY
        value = 0
        taken = 0
        if self._bit_cnt:
            take = min(self._bit_cnt, k)
            value = self._bit_buf >> (self._bit_cnt - take)
            self._bit_buf &= (1 << (self._bit_cnt - take)) - 1
            self._bit_cnt -= take
            taken = take
        need = k - taken
        if need:
            nbytes = (need + 7) // 8
            chunk = int.from_bytes(self._take_bytes(nbytes), "big")
            extra = nbytes * 8 - need
            value = (value << need) | (chunk >> extra)
            self._bit_buf = chunk & ((1 << extra) - 1)
            self._bit_cnt = extra
        self._bit_pos += k
        return BitString.from_int(value, k)

    def next_u64(self) -> int:
        """Next 64 stream bits as a big-endian unsigned integer."""
        if self._bit_cnt == 0:
            self._bit_pos += 64
            return int.from_bytes(self._take_bytes(8), "big")
        return self.next_bits(64).to_int()

    def next_u64_array(self, count: int) -> np.ndarray:
        """Next ``count`` consecutive u64 values as a numpy array.

        Bulk form of ``next_u64``; the stream advances by 64 * count bits.
        """
        if count < 0:
            raise ValueError("count must be >= 0")
        if count == 0:
            return np.empty(0, dtype=np.uint64)
        if self._bit_cnt == 0 and self._byte_off == len(self._byte_buf):
            # hot path: bit-aligned, no buffered keystream; one cipher call
            # into reused scratch, one byteswapping copy out
            n = 8 * count
            if len(self._scratch) < n + _BLOCK:
                self._scratch = bytearray(n + _BLOCK)
            self._enc.update_into(_zero_view(n), self._scratch)
            self._note_generated(n)
            self._bit_pos += 64 * count
            return np.frombuffer(self._scratch, dtype=">u8", count=count).astype(np.uint64)
        if self._bit_cnt == 0:
            raw = self._take_bytes(8 * count)
            self._bit_pos += 64 * count
            return np.frombuffer(raw, dtype=">u8").astype(np.uint64)
        return np.array([self.next_u64() for _ in range(count)], dtype=np.uint64)
