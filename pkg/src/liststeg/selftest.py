"""Built-in statistical sanity checks, runnable at two scales.

``quick`` finishes in well under a minute and is meant as an install check;
``full`` runs the 10^5/10^6-sample suites.  All checks are deterministic
given the seed.  The individual routines are reused by the acceptance test
suite at its own scales.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .alias import build as build_alias
from .bitstream import BitString, SecretKey
from .codec import collision_bound, decode, encode_auto, suffix_length
from .dist import (
    GRID,
    MarkovModel,
    PeakedModel,
    QuantizedDistribution,
    UniformModel,
    quantize,
)
from .metrics import build_report, chi_square_gof
from .prg import Domain, PrgStream

FULL_U64 = 1 << 64


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_grid_weights(rng: np.random.Generator, vocab: int) -> np.ndarray:
    """Random integer weights summing to exactly 2^32."""
    cuts = np.sort(rng.integers(0, GRID + 1, size=vocab - 1))
    edges = np.concatenate(([0], cuts, [GRID]))
    return np.diff(edges).astype(np.uint64)


def random_payload(rng: np.random.Generator, nbits: int) -> BitString:
    value = 0
    for _ in range((nbits + 62) // 63):
        value = (value << 63) | int(rng.integers(0, 1 << 63))
    return BitString.from_int(value & ((1 << nbits) - 1), nbits)


def random_key(rng: np.random.Generator) -> SecretKey:
    return SecretKey(rng.integers(0, 256, 32, dtype=np.uint8).tobytes())


def alias_exact_mass_trials(trials: int, rng: np.random.Generator) -> int:
    """Number of (distribution, token) exact-mass identity violations."""
    violations = 0
    for _ in range(trials):
        vocab = int(rng.integers(2, 65))
        d = QuantizedDistribution(random_grid_weights(rng, vocab))
        table = build_alias(d)
        for s in range(vocab):
            if table.exact_token_mass(s) != vocab * (int(d.weights[s]) << 32):
                violations += 1
    return violations


PINNED_TV_DISTRIBUTIONS = (
    [0.7, 0.2, 0.1],
    [1] * 16,
    [0.5, 0.3, 0.2],
)


def alias_tv_distances(samples: int, rng: np.random.Generator) -> list[float]:
    """Empirical total-variation distance per pinned distribution."""
    out = []
    for raw in PINNED_TV_DISTRIBUTIONS:
        d = quantize(raw)
        table = build_alias(d)
        counts = np.zeros(d.vocab_size, dtype=np.int64)
        remaining = samples
        while remaining:
            batch = min(remaining, 1 << 20)
            randoms = rng.integers(0, FULL_U64, size=2 * batch,
                                   dtype=np.uint64, endpoint=False)
            counts += np.bincount(table.sample_batch(randoms), minlength=d.vocab_size)
            remaining -= batch
        target = np.asarray(d.weights, dtype=np.float64) / GRID
        out.append(float(0.5 * np.abs(counts / samples - target).sum()))
    return out


def single_step_tokens(d: QuantizedDistribution, list_cap_log2: int,
                       count: int, rng: np.random.Generator) -> np.ndarray:
    """First emitted token of ``count`` independent encodes.

    Each encode uses a fresh random key and a uniformly random initial
    payload prefix; the emitted token is the candidate's sample from the
    full 2|M|-value keyed batch, exactly as the encoder's first step."""
    table = build_alias(d)
    cap = 1 << list_cap_log2
    tokens = np.empty(count, dtype=np.int64)
    for i in range(count):
        key = random_key(rng)
        idx = int(rng.integers(0, cap))
        stream = PrgStream(key, Domain.SAMPLING)
        samples = table.sample_batch(stream.next_u64_array(2 * cap))
        tokens[i] = int(samples[idx])
    return tokens


def chi_square_rejections(d: QuantizedDistribution, tokens: np.ndarray,
                          per_trial: int, level: float = 0.001) -> tuple[int, int]:
    """Split tokens into trials and count chi-square rejections at level."""
    trials = len(tokens) // per_trial
    rejections = 0
    for t in range(trials):
        chunk = tokens[t * per_trial:(t + 1) * per_trial]
        counts = np.bincount(chunk, minlength=d.vocab_size)
        _, p = chi_square_gof(counts, d)
        if p < level:
            rejections += 1
    return rejections, trials


GAME_DISTRIBUTIONS = (
    [0.7, 0.2, 0.1],
    [1, 1, 1, 1],
    [0.9, 0.05, 0.05],
)


def _check_alias(scale: str, rng) -> list[CheckResult]:
    trials = 1000 if scale == "full" else 100
    violations = alias_exact_mass_trials(trials, rng)
    results = [CheckResult(
        f"alias exact-mass identity ({trials} random distributions)",
        violations == 0, f"{violations} violations",
    )]
    samples = 1_000_000 if scale == "full" else 100_000
    budget = 5e-3 if scale == "full" else 1e-2
    tvs = alias_tv_distances(samples, rng)
    results.append(CheckResult(
        f"alias empirical TV ({samples} draws x {len(tvs)} distributions)",
        all(tv < budget for tv in tvs),
        "max TV " + format(max(tvs), ".2e"),
    ))
    return results


def _check_distribution_preservation(scale: str, rng) -> list[CheckResult]:
    results = []
    if scale == "full":
        encodes, per_trial, allowed = 100_000, 100, 3
    else:
        encodes, per_trial, allowed = 20_000, 0, 0  # single pooled test
    for raw in GAME_DISTRIBUTIONS:
        d = quantize(raw)
        tokens = single_step_tokens(d, 8, encodes, rng)
        if per_trial:
            rejections, trials = chi_square_rejections(d, tokens, per_trial)
            results.append(CheckResult(
                f"stego single-step token distribution == model ({raw})",
                rejections <= allowed,
                f"{rejections}/{trials} trials rejected at the 0.001 level",
            ))
        else:
            counts = np.bincount(tokens, minlength=d.vocab_size)
            _, p = chi_square_gof(counts, d)
            results.append(CheckResult(
                f"stego single-step token distribution == model ({raw})",
                p > 1e-6, f"pooled p={p:.4g} over {encodes} encodes",
            ))
    return results


def _check_round_trips(scale: str, rng) -> list[CheckResult]:
    if scale == "full":
        n_exp, lengths = 16, (8, 64, 256, 1024, 4096)
    else:
        n_exp, lengths = 10, (8, 64, 256)
    models = [
        ("uniform16", lambda: UniformModel(16)),
        ("uniform2", lambda: UniformModel(2)),
        ("markov3", lambda: MarkovModel([[7, 2, 1], [2, 6, 2], [3, 3, 14]], [5, 3, 2])),
        ("peaked", lambda: PeakedModel(3, eps_log2=-4)),
    ]
    failures = []
    bound_failures = []
    runs = 0
    for name, factory in models:
        for nbits in lengths:
            if name in ("uniform2", "peaked") and nbits > 1024:
                continue
            payload = random_payload(rng, nbits)
            key = random_key(rng)
            try:
                params, trace = encode_auto(key, n_exp, 24, factory(), payload)
                got = decode(params, factory(), trace.tokens, nbits)
            except Exception as e:  # any failure is a finding here
                failures.append(f"{name}/{nbits}: {type(e).__name__}")
                continue
            runs += 1
            if got != payload:
                failures.append(f"{name}/{nbits}: wrong payload")
                continue
            report = build_report(trace, nbits, params)
            # the bound formula ignores whole-token granularity (up to one
            # token's capacity goes unused at the end of a run), so grant
            # exactly that much grace: R must reach bound * (1 - i_max / I)
            # where i_max is the largest single-step information
            i_max = 32.0 - math.log2(min(trace.per_step_weight))
            grace = 1.0 - i_max / report.total_information
            if report.utilization < report.utilization_lower_bound * grace:
                bound_failures.append(
                    f"{name}/{nbits}: R={report.utilization:.4f} < "
                    f"bound={report.utilization_lower_bound:.4f} "
                    f"even with one-token grace"
                )
    results = [CheckResult(
        f"round trips across models ({runs} runs)",
        not failures, "; ".join(failures) or "all recovered exactly",
    )]
    results.append(CheckResult(
        "utilization within one-token granularity of the lower bound",
        not bound_failures, "; ".join(bound_failures) or "bound held on every run",
    ))
    return results


def _check_bounds(scale: str, rng) -> list[CheckResult]:
    ok_pin = suffix_length(60, 100, 20) == 88
    ok_cap = all(
        collision_bound(20, lam, 20, n) <= 2.0 ** -20 + 1e-18
        for lam in (0, 40, 60) for n in (0, 15, 300)
    )
    ok_mono = suffix_length(60, 1000, 20) > suffix_length(60, 100, 20)
    return [
        CheckResult("suffix length formula pins 88 at (60, 100, 20)", ok_pin),
        CheckResult("collision bound never exceeds 2^-b", ok_cap),
        CheckResult("suffix length increases with suffix tokens", ok_mono),
    ]


def _check_prg(scale: str, rng) -> list[CheckResult]:
    key = SecretKey(bytes(range(32)))
    nbits = 1_000_000
    bits = PrgStream(key, Domain.SAMPLING).next_bits(nbits)
    frac = bin(bits.to_int()).count("1") / nbits
    sep = PrgStream(key, Domain.SAMPLING).next_u64() != PrgStream(key, Domain.SUFFIX).next_u64()
    return [
        CheckResult("keyed stream monobit fraction in [0.498, 0.502]",
                    0.498 <= frac <= 0.502, f"ones fraction {frac:.6f}"),
        CheckResult("sampling and suffix domains are separated", sep),
    ]


def run_selftest(scale: str = "quick", seed: int = 0,
                 report: Optional[Callable[[CheckResult], None]] = None) -> list[CheckResult]:
    if scale not in ("quick", "full"):
        raise ValueError("scale must be 'quick' or 'full'")
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []
    for check in (_check_prg, _check_bounds, _check_alias,
                  _check_distribution_preservation, _check_round_trips):
        for r in check(scale, rng):
            results.append(r)
            if report is not None:
                report(r)
    return results
