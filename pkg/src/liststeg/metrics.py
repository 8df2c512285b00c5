"""Capacity and correctness instrumentation.

Information content is computed from the quantized weights the codec
actually consumed, never from raw model floats, so every number here is
self-consistent with the encoding run it describes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import mpmath
import numpy as np

from .bitstream import BitString
from .codec import CodecParams, StegoTrace, suffix_length
from .dist import GRID, QuantizedDistribution
from .errors import UndefinedUtilizationError


def information_content(trace: Union[StegoTrace, Sequence[int]]) -> float:
    """Total self-information of a trace in bits: sum of -log2(w_i / 2^32)."""
    weights = trace.per_step_weight if isinstance(trace, StegoTrace) else trace
    if len(weights) == 0:
        return 0.0
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 1):
        raise ValueError("per-step weights must be >= 1")
    return float((32.0 - np.log2(w)).sum())


def utilization(trace: Union[StegoTrace, Sequence[int]], payload_len: int) -> float:
    """Embedded payload bits per bit of stegotext information."""
    if payload_len == 0:
        return 0.0
    info = information_content(trace)
    if info <= 0.0:
        raise UndefinedUtilizationError("trace carries zero information")
    return payload_len / info


def utilization_bound(security_bits: int, list_cap_log2: int, n_all: int,
                      info_bits: float, payload_len: int,
                      overhead_bits: int) -> float:
    """Theoretical lower bound on utilization, clamped to [0, 1]:

        (1 - K / |payload|) * (1 - n_all * sqrt(L / 2^N) / (ln 2 * I))
    """
    if info_bits <= 0:
        raise ValueError("info_bits must be positive")
    if payload_len <= 0:
        raise ValueError("payload_len must be positive")
    # each factor is clamped before multiplying: a negative factor means the
    # bound is vacuous, not that two deficits cancel out
    first = max(0.0, 1.0 - overhead_bits / payload_len)
    delta = math.sqrt(security_bits / float(1 << list_cap_log2))
    second = max(0.0, 1.0 - n_all * delta / (math.log(2.0) * info_bits))
    return min(1.0, first * second)


def success_rate(sent: BitString, received: BitString) -> float:
    """Fraction of matching bit positions between two equal-length strings."""
    if sent.length != received.length:
        raise ValueError(
            f"length mismatch: {sent.length} vs {received.length}"
        )
    if sent.length == 0:
        return 1.0
    differing = bin(sent.to_int() ^ received.to_int()).count("1")
    return 1.0 - differing / sent.length


def chi_square_gof(observed: Sequence[int],
                   expected: Union[QuantizedDistribution, Sequence[int]],
                   min_expected: float = 5.0) -> tuple[float, float]:
    """Pearson goodness-of-fit of observed counts against grid weights.

    Tokens whose expected count falls below ``min_expected`` are pooled
    into a single category.  Returns (statistic, upper-tail p-value); the
    p-value uses the regularized incomplete gamma function evaluated to
    1e-10 precision.
    """
    obs = np.asarray(observed, dtype=np.float64)
    weights = expected.weights if isinstance(expected, QuantizedDistribution) else np.asarray(expected, dtype=np.uint64)
    if obs.shape != (len(weights),):
        raise ValueError("observed and expected lengths differ")
    total = float(obs.sum())
    if total <= 0:
        raise ValueError("observed counts must sum to a positive number")
    p = np.asarray(weights, dtype=np.float64) / float(GRID)
    if np.any((p == 0) & (obs > 0)):
        raise ValueError("observed mass on a zero-probability token")

    support = p > 0
    exp_counts = total * p[support]
    obs_counts = obs[support]
    big = exp_counts >= min_expected
    cells_obs = list(obs_counts[big])
    cells_exp = list(exp_counts[big])
    if np.any(~big):
        cells_obs.append(float(obs_counts[~big].sum()))
        cells_exp.append(float(exp_counts[~big].sum()))
    if len(cells_obs) < 2:
        raise ValueError("fewer than two categories after pooling")

    stat = float(sum((o - e) ** 2 / e for o, e in zip(cells_obs, cells_exp)))
    dof = len(cells_obs) - 1
    with mpmath.workdps(30):
        pvalue = float(mpmath.gammainc(dof / 2, stat / 2, mpmath.inf,
                                       regularized=True))
    return stat, min(1.0, max(0.0, pvalue))


@dataclass(frozen=True)
class CapacityReport:
    """Capacity summary of one encoding session."""

    total_information: float      # I, bits
    entropy_per_token: float      # I / n_all, bits per token
    embedded_bits: int            # payload length, suffix excluded
    tokens: int                   # n_all
    utilization: float            # embedded / I
    utilization_lower_bound: float
    overhead_bits: int            # suffix-minimum minus the free initial prefix

    def to_text(self) -> str:
        lines = [
            f"total_information = {self.total_information:.6f}",
            f"entropy_per_token = {self.entropy_per_token:.6f}",
            f"embedded_bits = {self.embedded_bits}",
            f"tokens = {self.tokens}",
            f"utilization = {self.utilization:.6f}",
            f"utilization_lower_bound = {self.utilization_lower_bound:.6f}",
            f"overhead_bits = {self.overhead_bits}",
        ]
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "total_information": self.total_information,
            "entropy_per_token": self.entropy_per_token,
            "embedded_bits": self.embedded_bits,
            "tokens": self.tokens,
            "utilization": self.utilization,
            "utilization_lower_bound": self.utilization_lower_bound,
            "overhead_bits": self.overhead_bits,
        }, indent=2)


def build_report(trace: StegoTrace, payload_len: int,
                 params: CodecParams) -> CapacityReport:
    info = information_content(trace)
    overhead = max(0, suffix_length(params.security_bits, trace.tokens_for_suffix,
                                    params.list_cap_log2) - params.list_cap_log2)
    bound = utilization_bound(params.security_bits, params.list_cap_log2,
                              trace.n_all, info, payload_len, overhead)
    return CapacityReport(
        total_information=info,
        entropy_per_token=info / trace.n_all,
        embedded_bits=payload_len,
        tokens=trace.n_all,
        utilization=utilization(trace, payload_len),
        utilization_lower_bound=bound,
        overhead_bits=overhead,
    )
