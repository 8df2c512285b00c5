import numpy as np
import pytest

from liststeg import GRID, AliasTable, QuantizedDistribution, build_alias, quantize

FULL = 1 << 64


def naive_sample(table: AliasTable, r1: int, r2: int) -> int:
    """Independent scalar re-implementation of one draw, in exact integers."""
    x = (table.vocab_size * r1) >> 64
    if r2 < table.exact_threshold(x):
        return int(table.primary[x])
    return int(table.alias[x])


def random_grid_weights(rng, vocab):
    """Random integer weights summing to exactly 2^32."""
    cuts = np.sort(rng.integers(0, GRID + 1, size=vocab - 1))
    edges = np.concatenate(([0], cuts, [GRID]))
    return np.diff(edges).astype(np.uint64)


def assert_exact_mass(table: AliasTable, d: QuantizedDistribution):
    for s in range(d.vocab_size):
        assert table.exact_token_mass(s) == d.vocab_size * (int(d.weights[s]) << 32)


class TestBuild:
    def test_uniform_four_all_full_slots(self):
        t = build_alias(quantize([1, 1, 1, 1]))
        for i in range(4):
            assert t.exact_threshold(i) == FULL
            assert int(t.primary[i]) == int(t.alias[i]) == i

    def test_half_quarter_quarter_layout(self):
        # hand-evaluated pairing for weights [2^31, 2^30, 2^30]
        d = quantize([0.5, 0.25, 0.25])
        t = build_alias(d)
        assert_exact_mass(t, d)
        assert [int(v) for v in t.primary] == [1, 2, 0]
        assert [int(v) for v in t.alias] == [0, 0, 0]
        assert t.exact_threshold(0) == (3 * (1 << 30)) << 32
        assert t.exact_threshold(1) == (3 * (1 << 30)) << 32
        assert t.exact_threshold(2) == FULL

    def test_extreme_weights(self):
        d = QuantizedDistribution(np.array([GRID - 2, 1, 1], dtype=np.uint64))
        t = build_alias(d)
        assert_exact_mass(t, d)

    def test_zero_weight_token(self):
        d = QuantizedDistribution(np.array([GRID, 0], dtype=np.uint64))
        t = build_alias(d)
        assert_exact_mass(t, d)
        samples = t.sample_batch(np.random.default_rng(0).integers(
            0, FULL, size=2000, dtype=np.uint64, endpoint=False))
        assert (samples == 0).all()

    @pytest.mark.parametrize("seed", range(10))
    def test_exact_mass_random(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(10):
            vocab = int(rng.integers(2, 65))
            d = QuantizedDistribution(random_grid_weights(rng, vocab))
            assert_exact_mass(build_alias(d), d)


class TestSampleBatch:
    def test_uniform_two_slot_split(self):
        t = build_alias(quantize([1, 1]))
        r = np.array([0, 5, (1 << 63) - 1, 7, 1 << 63, 9, FULL - 1, 11], dtype=np.uint64)
        assert list(t.sample_batch(r)) == [0, 0, 1, 1]

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            vocab = int(rng.integers(2, 40))
            d = QuantizedDistribution(random_grid_weights(rng, vocab))
            t = build_alias(d)
            randoms = rng.integers(0, FULL, size=400, dtype=np.uint64, endpoint=False)
            batch = t.sample_batch(randoms)
            for i in range(0, len(randoms), 2):
                assert int(batch[i // 2]) == naive_sample(t, int(randoms[i]), int(randoms[i + 1]))

    def test_batch_split_determinism(self):
        rng = np.random.default_rng(3)
        d = quantize([0.7, 0.2, 0.1])
        t = build_alias(d)
        randoms = rng.integers(0, FULL, size=1000, dtype=np.uint64, endpoint=False)
        whole = t.sample_batch(randoms)
        parts = np.concatenate([
            t.sample_batch(randoms[:300]),
            t.sample_batch(randoms[300:302]),
            t.sample_batch(randoms[302:]),
        ])
        assert np.array_equal(whole, parts)

    def test_odd_length_rejected(self):
        t = build_alias(quantize([1, 1]))
        with pytest.raises(ValueError):
            t.sample_batch(np.array([1, 2, 3], dtype=np.uint64))

    def test_empirical_tv_quick(self):
        # 10^5-draw spot check; the acceptance suite runs 10^6 per pinned dist
        rng = np.random.default_rng(11)
        d = quantize([0.7, 0.2, 0.1])
        t = build_alias(d)
        n = 100_000
        randoms = rng.integers(0, FULL, size=2 * n, dtype=np.uint64, endpoint=False)
        samples = t.sample_batch(randoms)
        counts = np.bincount(samples, minlength=3)
        target = np.asarray(d.weights, dtype=np.float64) / GRID
        tv = 0.5 * np.abs(counts / n - target).sum()
        assert tv < 0.01

    def test_pow2_shift_equals_multiply_high(self):
        # the power-of-two fast path must agree with the exact definition
        rng = np.random.default_rng(5)
        r = rng.integers(0, FULL, size=1000, dtype=np.uint64, endpoint=False)
        for vocab in (2, 4, 16, 64):
            d = QuantizedDistribution(random_grid_weights(rng, vocab))
            t = build_alias(d)
            assert t._shift is not None
            mulhigh = ((r >> np.uint64(32)) * np.uint64(vocab)
                       + (((r & np.uint64(0xFFFFFFFF)) * np.uint64(vocab)) >> np.uint64(32))
                       ) >> np.uint64(32)
            assert np.array_equal(t.slot_indices(r), mulhigh)

    def test_scalar_slot_math_matches_python_ints(self):
        rng = np.random.default_rng(9)
        for vocab in (3, 5, 7, 41):
            d = QuantizedDistribution(random_grid_weights(rng, vocab))
            t = build_alias(d)
            r = rng.integers(0, FULL, size=500, dtype=np.uint64, endpoint=False)
            got = t.slot_indices(r)
            for i in range(len(r)):
                assert int(got[i]) == (vocab * int(r[i])) >> 64
