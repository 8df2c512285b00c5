from pathlib import Path

import numpy as np
import pytest

from liststeg import BitString, Domain, PrgStream, SecretKey

K0 = SecretKey(bytes(range(32)))
VECTORS = Path(__file__).parent / "vectors" / "prg_k0.txt"


def load_vectors() -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    domain = None
    for line in VECTORS.read_text().splitlines():
        line = line.strip()
        if line.startswith("# domain="):
            domain = int(line.split("=", 1)[1])
            out[domain] = []
        elif line and not line.startswith("#"):
            out[domain].append(int(line, 16))
    return out


def test_pinned_vectors():
    vectors = load_vectors()
    assert set(vectors) == {0, 1}
    for domain, expected in vectors.items():
        s = PrgStream(K0, domain)
        got = [s.next_u64() for _ in expected]
        assert got == expected


def test_two_streams_identical():
    a = PrgStream(K0, Domain.SAMPLING)
    b = PrgStream(K0, Domain.SAMPLING)
    for _ in range(100):
        assert a.next_u64() == b.next_u64()


def test_domains_differ():
    a = PrgStream(K0, Domain.SAMPLING).next_u64()
    b = PrgStream(K0, Domain.SUFFIX).next_u64()
    assert a != b


def test_next_bits_zero():
    s = PrgStream(K0, Domain.SAMPLING)
    assert s.next_bits(0) == BitString("")
    assert s.position == 0


def test_next_bits_64_equals_next_u64():
    a = PrgStream(K0, Domain.SAMPLING)
    b = PrgStream(K0, Domain.SAMPLING)
    assert a.next_bits(64).to_int() == b.next_u64()


def test_bit_granularity_consistency():
    # the stream is a pure function of position, not of read partitioning
    a = PrgStream(K0, Domain.SUFFIX)
    b = PrgStream(K0, Domain.SUFFIX)
    left = a.next_bits(3) + a.next_bits(13) + a.next_bits(48)
    right = b.next_bits(64)
    assert left == right
    assert a.position == b.position == 64


def test_unaligned_u64_matches_bits():
    a = PrgStream(K0, Domain.SAMPLING)
    b = PrgStream(K0, Domain.SAMPLING)
    a.next_bits(5)
    b.next_bits(5)
    assert a.next_u64() == b.next_bits(64).to_int()


def test_u64_array_matches_scalar():
    a = PrgStream(K0, Domain.SAMPLING)
    b = PrgStream(K0, Domain.SAMPLING)
    arr = a.next_u64_array(1000)
    assert arr.dtype == np.uint64
    assert [int(v) for v in arr] == [b.next_u64() for _ in range(1000)]
    assert a.position == b.position


def test_suffix_derivation_shared():
    sender = PrgStream(K0, Domain.SUFFIX).next_bits(88)
    receiver = PrgStream(K0, Domain.SUFFIX).next_bits(88)
    assert sender == receiver


def test_monobit_sanity():
    bits = PrgStream(K0, Domain.SAMPLING).next_bits(1_000_000)
    ones = bin(bits.to_int()).count("1")
    assert 0.498 <= ones / 1_000_000 <= 0.502


def test_keys_differ():
    other = SecretKey(bytes(31) + b"\x01")
    assert PrgStream(K0, 0).next_u64() != PrgStream(other, 0).next_u64()


def test_negative_counts_rejected():
    s = PrgStream(K0, 0)
    with pytest.raises(ValueError):
        s.next_bits(-1)
    with pytest.raises(ValueError):
        s.next_u64_array(-1)
