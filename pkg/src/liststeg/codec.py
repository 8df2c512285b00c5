"""Candidate-list steganographic codec: map, filter, expand, match.

Encoding keeps a bounded list of payload-prefix hypotheses, all of the same
bit length l, in strictly ascending order.  Each step draws one token
sample per candidate from the model's quantized distribution (two keyed
u64 randoms per sample), emits the sample owned by the true prefix, drops
every candidate whose sample differs, and then re-doubles the list
(appending 0/1 to every member, order preserved) until it again exceeds
half the cap 2^N.  A keyed pseudorandom validation suffix appended to the
payload lets the decoder pick the unique surviving candidate at the end.

The decoder replays the identical sample stream, filters by the observed
token instead, and therefore reconstructs the identical list evolution.

Performance notes: list sizes reach 2^20+, so the engine never materializes
candidate bit strings.  The encoder tracks only the true prefix's rank in
the (implicitly ordered) list.  The decoder keeps per-step survivor masks
plus, for each candidate, the bits that fall inside the suffix window;
full bit strings are rebuilt from the mask history only for the few
candidates that match the suffix.  The explicit :class:`CandidateList`
realizes the same semantics at small scale and backs the tests.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Callable, Optional, Sequence

import mpmath
import numpy as np

from .alias import AliasTable, build as build_alias
from .bitstream import BitString, SecretKey
from .dist import GRID, ModelSource, QuantizedDistribution
from .errors import (
    AmbiguousDecodeError,
    DesyncError,
    StegError,
    SuffixMatchError,
    TokenBudgetError,
    TruncatedStegotextError,
)
from .prg import Domain, PrgStream

MAX_LIST_CAP_LOG2 = 26

_C32 = np.uint64(32)
_M32 = np.uint64(0xFFFFFFFF)
_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class CodecParams:
    """Shared session parameters.  The list cap is 2**list_cap_log2."""

    list_cap_log2: int
    suffix_bits: int
    security_bits: int
    key: SecretKey

    def __post_init__(self):
        if not 1 <= self.list_cap_log2 <= MAX_LIST_CAP_LOG2:
            raise ValueError(
                f"list_cap_log2 must be in [1, {MAX_LIST_CAP_LOG2}]"
            )
        if self.suffix_bits < 0:
            raise ValueError("suffix_bits must be >= 0")
        if self.security_bits < 0:
            raise ValueError("security_bits must be >= 0")


@dataclass(frozen=True)
class StegoTrace:
    """Encoder output: emitted tokens plus capacity bookkeeping."""

    tokens: tuple[int, ...]
    per_step_weight: tuple[int, ...]   # chosen token's grid weight, in [1, 2^32]
    cnt: int
    tokens_for_suffix: int
    n_all: int

    def __post_init__(self):
        if not (len(self.tokens) == len(self.per_step_weight) == self.cnt == self.n_all):
            raise ValueError("inconsistent trace lengths")
        if any(not 1 <= w <= GRID for w in self.per_step_weight):
            raise ValueError("per-step weights must lie in [1, 2^32]")


@dataclass(frozen=True)
class StepEvent:
    """Per-step instrumentation passed to encode/decode observers."""

    step: int
    list_size_before: int
    list_size_after: int
    token: int
    token_weight: int
    expansions: int
    prefix_len_after: int


def suffix_length(security_bits: int, token_estimate: int, list_cap_log2: int) -> int:
    """Validation-suffix length that keeps wrong-candidate survival negligible.

    Computed as ceil(L * log2(e) + n * log2(1 + sqrt(L / 2^N))) for security
    level L, suffix-phase token count n and list cap 2^N, evaluated at
    120-bit precision so the ceiling is never off by one.
    """
    if security_bits < 0 or token_estimate < 0 or list_cap_log2 < 0:
        raise ValueError("arguments must be non-negative")
    with mpmath.workprec(120):
        lam = mpmath.mpf(security_bits)
        term = lam * mpmath.log(mpmath.e, 2)
        delta = mpmath.sqrt(lam / mpmath.mpf(2) ** list_cap_log2)
        term += token_estimate * mpmath.log(1 + delta, 2)
        return int(mpmath.ceil(term))


def collision_bound(suffix_bits: int, security_bits: int, list_cap_log2: int,
                    tokens: int) -> float:
    """Upper bound on a wrong candidate surviving suffix matching:
    2^-b / (1 + sqrt(L / 2^N))^n."""
    if min(suffix_bits, security_bits, list_cap_log2, tokens) < 0:
        raise ValueError("arguments must be non-negative")
    with mpmath.workprec(120):
        delta = mpmath.sqrt(mpmath.mpf(security_bits) / mpmath.mpf(2) ** list_cap_log2)
        return float(mpmath.mpf(2) ** (-suffix_bits) / (1 + delta) ** tokens)


class CandidateList:
    """Explicit, small-scale candidate list: equal-length members in strictly
    ascending order.  The production engine tracks the same state implicitly;
    this class is the reference realization used by tests and suffix matching.
    """

    __slots__ = ("bit_length", "members")

    def __init__(self, bit_length: int, members: Sequence[BitString]):
        if not members:
            raise ValueError("candidate list must be non-empty")
        for m in members:
            if m.length != bit_length:
                raise ValueError("all members must share the common bit length")
        for a, b in zip(members, members[1:]):
            if not a < b:
                raise ValueError("members must be strictly ascending")
        self.bit_length = bit_length
        self.members = tuple(members)

    @classmethod
    def full(cls, bit_length: int) -> "CandidateList":
        """All 2^bit_length strings, ascending.  Small scales only."""
        if bit_length > 24:
            raise ValueError("explicit list too large; use the codec engine")
        return cls(bit_length, [
            BitString.from_int(v, bit_length) for v in range(1 << bit_length)
        ])

    def __len__(self) -> int:
        return len(self.members)

    def expand(self) -> "CandidateList":
        """Append both bit values to every member; m|0 precedes m|1."""
        doubled = []
        for m in self.members:
            v = m.to_int() << 1
            doubled.append(BitString.from_int(v, m.length + 1))
            doubled.append(BitString.from_int(v | 1, m.length + 1))
        return CandidateList(self.bit_length + 1, doubled)

    def filter_by(self, keep: Sequence[bool]) -> "CandidateList":
        if len(keep) != len(self.members):
            raise ValueError("mask length mismatch")
        kept = [m for m, k in zip(self.members, keep) if k]
        return CandidateList(self.bit_length, kept)


def _arbitrate(matches: Sequence[BitString], payload_len: int) -> BitString:
    """Reduce suffix-matching candidates to the unique payload prefix."""
    if not matches:
        raise SuffixMatchError("no candidate carries the expected suffix")
    first = matches[0].prefix(payload_len)
    for m in matches[1:]:
        if m.prefix(payload_len) != first:
            raise AmbiguousDecodeError(
                f"{len(matches)} suffix matches disagree on the payload prefix"
            )
    return first


def match_suffix(members: CandidateList, payload_len: int, suf: BitString) -> BitString:
    """Select members whose bits payload_len+1 .. payload_len+|suf| equal the
    validation suffix and return their common payload prefix."""
    if members.bit_length < payload_len + suf.length:
        raise ValueError("members are shorter than payload plus suffix")
    lo, hi = payload_len + 1, payload_len + suf.length
    matches = [m for m in members.members if m.slice(lo, hi) == suf]
    return _arbitrate(matches, payload_len)


def _cached_table(d: QuantizedDistribution) -> AliasTable:
    table = d._alias_cache
    if table is None:
        table = build_alias(d)
        d._alias_cache = table
    return table


class _StepKernel:
    """Reusable buffers for one session's vectorized sampling and filtering."""

    def __init__(self, cap: int):
        self.cap = cap
        self.r1 = np.empty(cap, dtype=np.uint64)
        self.lo = np.empty(cap, dtype=np.uint64)
        self.thr = np.empty(cap, dtype=np.uint64)
        self.x = np.empty(cap, dtype=np.intp)
        self.cond = np.empty(cap, dtype=np.bool_)
        self.mask = np.empty(cap, dtype=np.bool_)
        self.tmp = np.empty(cap, dtype=np.bool_)

    def draw(self, stream: PrgStream, table: AliasTable, size: int) -> None:
        """Consume 2*size u64s; fill slot ids and primary/alias choices."""
        pairs = stream.next_u64_array(2 * size).reshape(size, 2)
        r2 = pairs[:, 1]
        x = self.x[:size]
        if table._shift is not None:
            np.right_shift(pairs[:, 0], table._shift, out=pairs[:, 0])
            np.copyto(x, pairs[:, 0], casting="unsafe")
        else:
            r1 = self.r1[:size]
            lo = self.lo[:size]
            np.copyto(r1, pairs[:, 0])
            v = np.uint64(table.vocab_size)
            np.bitwise_and(r1, _M32, out=lo)
            np.multiply(lo, v, out=lo)
            np.right_shift(lo, _C32, out=lo)
            np.right_shift(r1, _C32, out=r1)
            np.multiply(r1, v, out=r1)
            np.add(r1, lo, out=r1)
            np.right_shift(r1, _C32, out=r1)
            np.copyto(x, r1, casting="unsafe")
        # slot ids are < |V| by construction; clip mode skips bounds checks
        thr = self.thr[:size]
        np.take(table.thresholds, x, out=thr, mode="clip")
        cond = self.cond[:size]
        np.less(r2, thr, out=cond)

    def token_at(self, table: AliasTable, index: int) -> int:
        xi = int(self.x[index])
        if self.cond[index]:
            return int(table.primary[xi])
        return int(table.alias[xi])

    def filter_mask(self, table: AliasTable, token: int, size: int) -> int:
        """mask[i] = (sample i == token); returns the survivor count."""
        x = self.x[:size]
        cond = self.cond[:size]
        mask = self.mask[:size]
        tmp = self.tmp[:size]
        np.take(table.primary == token, x, out=mask, mode="clip")
        np.logical_and(mask, cond, out=mask)
        np.take(table.alias == token, x, out=tmp, mode="clip")
        np.logical_not(cond, out=cond)
        np.logical_and(tmp, cond, out=tmp)
        np.logical_or(mask, tmp, out=mask)
        return int(np.count_nonzero(mask))


def encode(params: CodecParams, model: ModelSource, payload: BitString, *,
           max_tokens: Optional[int] = None,
           observer: Optional[Callable[[StepEvent], None]] = None) -> StegoTrace:
    """Embed payload into a token sequence drawn from the model.

    The loop runs while the committed prefix length l has not yet passed
    payload + suffix; within a step, expansion repeats while the list size
    is at most half the cap, advancing l by one bit each time.
    """
    if payload.length < 1:
        raise ValueError("payload must contain at least one bit")
    n_exp = params.list_cap_log2
    b = params.suffix_bits
    if payload.length + b < n_exp:
        raise ValueError(
            f"payload+suffix is {payload.length + b} bits; must be at least "
            f"list_cap_log2={n_exp} so the initial prefix is defined"
        )
    suf = PrgStream(params.key, Domain.SUFFIX).next_bits(b)
    m = payload + suf
    stream = PrgStream(params.key, Domain.SAMPLING)
    cap = 1 << n_exp
    half = cap >> 1
    kernel = _StepKernel(cap)

    size = cap
    true_idx = m.prefix(n_exp).to_int()
    l = n_exp
    tokens: list[int] = []
    weights: list[int] = []
    n_suffix = 0
    while l <= m.length:
        if max_tokens is not None and len(tokens) >= max_tokens:
            raise TokenBudgetError(
                f"token budget {max_tokens} exhausted with prefix length "
                f"{l} of {m.length} committed",
                tokens_emitted=len(tokens), bits_embedded=l,
            )
        if l > payload.length:
            n_suffix += 1
        d = model.next_distribution()
        table = _cached_table(d)
        kernel.draw(stream, table, size)
        s_star = kernel.token_at(table, true_idx)
        tokens.append(s_star)
        weights.append(d.weight(s_star))
        model.append_history(s_star)
        new_size = kernel.filter_mask(table, s_star, size)
        assert kernel.mask[true_idx], "true prefix must survive its own token"
        new_idx = int(np.count_nonzero(kernel.mask[:true_idx]))
        size_before = size
        size = new_size
        expansions = 0
        true_idx = new_idx
        while size <= half:
            bit = m.bit(l + 1) if l + 1 <= m.length else 0
            true_idx = (true_idx << 1) | bit
            size <<= 1
            l += 1
            expansions += 1
        if observer is not None:
            observer(StepEvent(
                step=len(tokens), list_size_before=size_before,
                list_size_after=new_size, token=s_star,
                token_weight=weights[-1], expansions=expansions,
                prefix_len_after=l,
            ))
    return StegoTrace(tuple(tokens), tuple(weights), len(tokens), n_suffix, len(tokens))


class _WindowTails:
    """Per-candidate bits falling inside the suffix window.

    Kept as one 1-D uint64 array per 64-bit lane (lane 0 least significant).
    Allocation is deferred until the window actually opens, so for long
    payloads the maintenance cost is confined to the final suffix-embedding
    steps instead of every step.
    """

    def __init__(self, size: int, suffix_bits: int, n_exp: int, payload_len: int):
        self.suffix_bits = suffix_bits
        self.lanes = (suffix_bits + 63) // 64
        self.filled = 0
        self.values: Optional[list[np.ndarray]] = None
        self._size = size
        if self.lanes and payload_len < n_exp:
            # initial members already carry window bits payload_len+1..n_exp
            end = min(n_exp, payload_len + suffix_bits)
            overlap = end - payload_len
            first = np.arange(size, dtype=np.uint64) >> np.uint64(n_exp - end)
            first &= np.uint64((1 << overlap) - 1)
            self.values = [first] + [np.zeros(size, dtype=np.uint64)
                                     for _ in range(self.lanes - 1)]
            self.filled = overlap

    @property
    def active(self) -> bool:
        return self.values is not None

    def compress(self, mask: np.ndarray) -> None:
        if self.values is None:
            self._size = int(np.count_nonzero(mask))
            return
        surv = np.flatnonzero(mask)
        self.values = [np.take(lane, surv) for lane in self.values]
        self._size = len(surv)

    def expand(self, in_window: bool) -> None:
        if self.values is None:
            if not (in_window and self.lanes):
                self._size *= 2
                return
            self.values = [np.zeros(self._size, dtype=np.uint64)
                           for _ in range(self.lanes)]
        doubled = [np.repeat(lane, 2) for lane in self.values]
        if in_window:
            for lane in range(self.lanes - 1, 0, -1):
                doubled[lane] <<= np.uint64(1)
                doubled[lane] |= doubled[lane - 1] >> np.uint64(63)
            doubled[0] <<= np.uint64(1)
            doubled[0][1::2] |= np.uint64(1)
            self.filled += 1
        self.values = doubled
        self._size *= 2

    def match(self, suf: BitString) -> np.ndarray:
        if self.values is None:
            return np.ones(self._size, dtype=np.bool_)
        value = suf.to_int()
        mask = None
        for lane in range(self.lanes):
            lane_val = np.uint64((value >> (64 * lane)) & _U64_MASK)
            eq = self.values[lane] == lane_val
            mask = eq if mask is None else (mask & eq)
        return mask


_BYTE_POPCOUNT = np.unpackbits(
    np.arange(256, dtype=np.uint8)[:, None], axis=1
).sum(axis=1).astype(np.int64)


def _survivor_positions(packed: bytes, ranks: np.ndarray) -> np.ndarray:
    """Original positions of the rank-th set bits of a packed mask."""
    u8 = np.frombuffer(packed, dtype=np.uint8)
    cum = np.cumsum(_BYTE_POPCOUNT[u8])
    out = np.empty(len(ranks), dtype=np.int64)
    for j, rank in enumerate(ranks):
        target = int(rank) + 1
        byte_i = int(np.searchsorted(cum, target))
        within = target - (int(cum[byte_i - 1]) if byte_i else 0)
        val = int(u8[byte_i])
        seen = 0
        for bit in range(8):
            if val & (0x80 >> bit):
                seen += 1
                if seen == within:
                    out[j] = byte_i * 8 + bit
                    break
        else:
            raise AssertionError("survivor rank exceeds mask population")
    return out


def _reconstruct(history: list, n_exp: int, final_l: int,
                 indices: np.ndarray) -> list[BitString]:
    """Rebuild full candidate bit strings by walking the survivor-mask
    history backwards from final list positions."""
    idx = indices.astype(np.int64, copy=True)
    reversed_bits: list[np.ndarray] = []
    for packed, _size_before, expansions in reversed(history):
        for _ in range(expansions):
            reversed_bits.append((idx & 1).astype(np.uint8))
            idx >>= 1
        idx = _survivor_positions(packed, idx)
    out = []
    for j in range(len(indices)):
        v = int(idx[j])
        for bits in reversed(reversed_bits):
            v = (v << 1) | int(bits[j])
        out.append(BitString.from_int(v, final_l))
    return out


def decode(params: CodecParams, model: ModelSource,
           tokens: Sequence[int], payload_len: int, *,
           observer: Optional[Callable[[StepEvent], None]] = None) -> BitString:
    """Recover the payload from a stegotext token sequence.

    Mirrors the encoder: replays the keyed sample stream, filters by each
    observed token, expands identically, then suffix-matches the surviving
    candidates.  Extra trailing tokens beyond the message are ignored.
    """
    if payload_len < 1:
        raise ValueError("payload_len must be >= 1")
    token_list = [int(t) for t in tokens]
    if not token_list:
        raise ValueError("stegotext must contain at least one token")
    n_exp = params.list_cap_log2
    b = params.suffix_bits
    if payload_len + b < n_exp:
        raise ValueError(
            f"payload+suffix is {payload_len + b} bits; must be at least "
            f"list_cap_log2={n_exp}"
        )
    suf = PrgStream(params.key, Domain.SUFFIX).next_bits(b)
    stream = PrgStream(params.key, Domain.SAMPLING)
    cap = 1 << n_exp
    half = cap >> 1
    kernel = _StepKernel(cap)
    target = payload_len + b

    size = cap
    l = n_exp
    tails = _WindowTails(cap, b, n_exp, payload_len)
    history: list[list] = []
    consumed = 0
    while l <= target:
        if consumed >= len(token_list):
            raise TruncatedStegotextError(
                f"stegotext ended after {consumed} tokens with prefix length "
                f"{l} of {target} recovered"
            )
        s_obs = token_list[consumed]
        if not 0 <= s_obs < model.vocab_size:
            raise DesyncError(f"token id {s_obs} outside model vocabulary")
        d = model.next_distribution()
        table = _cached_table(d)
        kernel.draw(stream, table, size)
        new_size = kernel.filter_mask(table, s_obs, size)
        if new_size == 0:
            raise DesyncError(
                f"no candidate maps to token {s_obs} at step {consumed + 1}: "
                "wrong key, wrong model, or corrupted stegotext"
            )
        mask = kernel.mask[:size]
        record = [np.packbits(mask).tobytes(), size, 0]
        history.append(record)
        tails.compress(mask)
        model.append_history(s_obs)
        consumed += 1
        size_before = size
        size = new_size
        expansions = 0
        while size <= half:
            in_window = payload_len <= l < payload_len + b
            tails.expand(in_window)
            size <<= 1
            l += 1
            expansions += 1
        record[2] = expansions
        if observer is not None:
            observer(StepEvent(
                step=consumed, list_size_before=size_before,
                list_size_after=new_size, token=s_obs,
                token_weight=int(d.weight(s_obs)), expansions=expansions,
                prefix_len_after=l,
            ))

    match_mask = tails.match(suf)
    match_idx = np.flatnonzero(match_mask)
    if match_idx.size == 0:
        raise SuffixMatchError(
            "no surviving candidate carries the validation suffix"
        )
    members = _reconstruct(history, n_exp, l, match_idx)
    return _arbitrate(members, payload_len)


def encode_auto(key: SecretKey, list_cap_log2: int, security_bits: int,
                model: ModelSource, payload: BitString, *,
                max_tokens: Optional[int] = None,
                max_rounds: int = 8) -> tuple[CodecParams, StegoTrace]:
    """Two-pass encoding: size the suffix from a deterministic dry run.

    Starts from the zero-token formula value and re-runs until the suffix
    length covers the tokens the suffix itself consumed.  Convergence is
    accelerated by projecting the fixed point from the measured
    tokens-per-suffix-bit rate, so low-entropy channels settle in two or
    three rounds instead of creeping.  Each round spawns a fresh model; the
    converged round's trace is returned, so the caller pays one extra
    encode in the common case.  Channels whose per-token entropy is below
    the per-token suffix penalty have no fixed point and raise.
    """
    base = suffix_length(security_bits, 0, list_cap_log2)
    penalty = math.log2(1.0 + math.sqrt(security_bits / float(1 << list_cap_log2)))
    b = base
    for _ in range(max_rounds):
        params = CodecParams(list_cap_log2, b, security_bits, key)
        attempt = model.spawn()
        try:
            trace = encode(params, attempt, payload, max_tokens=max_tokens)
        finally:
            attempt.close()
        required = suffix_length(security_bits, trace.tokens_for_suffix, list_cap_log2)
        if required <= b:
            return params, trace
        projected = required
        if b > 0:
            rate = trace.tokens_for_suffix / b  # suffix tokens per suffix bit
            if penalty * rate < 0.95:
                projected = math.ceil(base / (1.0 - penalty * rate))
        b = max(required, projected)
    raise StegError(
        "suffix sizing did not converge; the model's per-token entropy is "
        "too low for this list cap - raise list_cap_log2 or set suffix_bits "
        "explicitly"
    )


STEGOTEXT_MAGIC = b"LSTG"
STEGOTEXT_VERSION = 1


def write_stegotext(fp: BinaryIO, tokens: Sequence[int]) -> None:
    """Binary stegotext: magic, 1-byte version, u64 count, u32 token ids,
    all big-endian."""
    fp.write(STEGOTEXT_MAGIC)
    fp.write(bytes([STEGOTEXT_VERSION]))
    fp.write(struct.pack(">Q", len(tokens)))
    for t in tokens:
        fp.write(struct.pack(">I", t))


def read_stegotext(fp: BinaryIO) -> list[int]:
    magic = fp.read(4)
    if magic != STEGOTEXT_MAGIC:
        raise ValueError(f"bad stegotext magic {magic!r}")
    version = fp.read(1)
    if version != bytes([STEGOTEXT_VERSION]):
        raise ValueError(f"unsupported stegotext version {version!r}")
    (count,) = struct.unpack(">Q", fp.read(8))
    body = fp.read(4 * count)
    if len(body) != 4 * count:
        raise ValueError("stegotext file truncated")
    return list(struct.unpack(f">{count}I", body)) if count else []
