import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from liststeg import (
    GRID,
    InvalidDistributionError,
    MarkovModel,
    PeakedModel,
    QuantizedDistribution,
    TemperatureProfileModel,
    UniformModel,
    from_config,
    quantize,
)

MARKOV3 = json.loads((Path(__file__).parent.parent / "configs" / "markov3.json").read_text())


def quantize_oracle(raw):
    """Straightforward Fraction re-implementation of the quantization rule."""
    fracs = [Fraction(x) for x in raw]
    total = sum(fracs)
    exact = [f * GRID / total for f in fracs]
    base = [e.numerator // e.denominator for e in exact]
    rem = [e - b for e, b in zip(exact, base)]
    deficit = GRID - sum(base)
    order = sorted(
        (i for i in range(len(raw)) if fracs[i] > 0),
        key=lambda i: (0 if base[i] == 0 else 1, -rem[i], i),
    )
    for i in order[:deficit]:
        base[i] += 1
    return base


class TestQuantize:
    def test_symmetric_half(self):
        assert list(quantize([0.5, 0.5]).weights) == [1 << 31, 1 << 31]

    def test_three_equal(self):
        w = [int(x) for x in quantize([1, 1, 1]).weights]
        assert sum(w) == GRID
        assert max(w) - min(w) <= 1
        # the single residual unit goes to the smallest token id
        assert w[0] == w[1] + 1 == w[2] + 1

    def test_skewed_vs_oracle(self):
        w = [int(x) for x in quantize([0.7, 0.2, 0.1]).weights]
        assert w == quantize_oracle([0.7, 0.2, 0.1])
        assert sum(w) == GRID

    @pytest.mark.parametrize("seed", range(20))
    def test_random_vs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        raw = [float(x) for x in rng.random(rng.integers(2, 40))]
        assert [int(x) for x in quantize(raw).weights] == quantize_oracle(raw)

    def test_error_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            raw = [float(x) for x in rng.random(rng.integers(2, 60))]
            total = sum(Fraction(x) for x in raw)
            d = quantize(raw)
            v = d.vocab_size
            for s in range(v):
                err = abs(Fraction(int(d.weights[s]), GRID) - Fraction(raw[s]) / total)
                assert err <= Fraction(v + 1, GRID)

    def test_zero_raw_stays_zero(self):
        w = quantize([1.0, 0.0, 1.0]).weights
        assert int(w[1]) == 0

    def test_tiny_positive_keeps_a_unit(self):
        w = quantize([1e-15, 1.0]).weights
        assert int(w[0]) >= 1

    def test_all_zero_rejected(self):
        with pytest.raises(InvalidDistributionError):
            quantize([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(InvalidDistributionError):
            quantize([0.5, -0.1])

    def test_single_token_rejected(self):
        with pytest.raises(InvalidDistributionError):
            quantize([1.0])


class TestQuantizedDistribution:
    def test_sum_enforced(self):
        with pytest.raises(InvalidDistributionError):
            QuantizedDistribution(np.array([1, 2], dtype=np.uint64))

    def test_entropy_uniform(self):
        d = quantize([1, 1, 1, 1])
        assert d.entropy_bits() == pytest.approx(2.0, abs=1e-9)

    def test_probability_exact(self):
        d = quantize([3, 1])
        assert d.probability(0) == Fraction(3 * GRID // 4, GRID)


class TestModels:
    def test_uniform_four(self):
        d = UniformModel(4).next_distribution()
        assert [int(w) for w in d.weights] == [1 << 30] * 4

    def test_markov_row_lookup(self):
        m = MarkovModel(MARKOV3["rows"], MARKOV3["initial"])
        m.append_history(0)
        m.append_history(1)
        expected = quantize(MARKOV3["rows"][1])
        assert m.next_distribution() == expected

    def test_markov_depends_on_last_token_only(self):
        a = MarkovModel(MARKOV3["rows"], MARKOV3["initial"])
        b = MarkovModel(MARKOV3["rows"], MARKOV3["initial"])
        for t in (0, 2, 1):
            a.append_history(t)
        for t in (2, 0, 2, 2, 1):
            b.append_history(t)
        assert a.next_distribution() == b.next_distribution()

    def test_markov_initial_row(self):
        m = MarkovModel(MARKOV3["rows"], MARKOV3["initial"])
        assert m.next_distribution() == quantize(MARKOV3["initial"])

    def test_peaked_entropy(self):
        # |V| = 3, eps = 2^-10: direct entropy computation from the weights
        d = PeakedModel(3, eps_log2=-10).next_distribution()
        probs = [int(w) / GRID for w in d.weights if int(w)]
        oracle = -sum(p * math.log2(p) for p in probs)
        assert d.entropy_bits() == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.0122, abs=5e-4)

    def test_append_history_validates(self):
        m = UniformModel(4)
        with pytest.raises(ValueError):
            m.append_history(4)
        m.append_history(3)
        assert m.history == [3]

    def test_history_growth(self):
        m = UniformModel(4)
        assert m.history == []
        m.append_history(0)
        assert len(m.history) == 1

    @pytest.mark.parametrize("factory", [
        lambda: UniformModel(16),
        lambda: PeakedModel(5, eps_log2=-8),
        lambda: MarkovModel(MARKOV3["rows"], MARKOV3["initial"]),
        lambda: TemperatureProfileModel(12, ratio=0.6, temperatures=[0.8, 1.0, 1.4]),
    ])
    def test_determinism_repeated_calls(self, factory):
        m = factory()
        for t in (1, 0, 2):
            m.append_history(t)
        first = m.next_distribution()
        for _ in range(1000):
            assert np.array_equal(m.next_distribution().weights, first.weights)

    def test_spawn_matches(self):
        m = TemperatureProfileModel(8, ratio=0.5, temperatures=[1.0, 2.0])
        m.append_history(1)
        fresh = m.spawn()
        assert fresh.history == []
        fresh.append_history(1)
        assert fresh.next_distribution() == m.next_distribution()

    def test_temperature_profile_varies_by_step(self):
        m = TemperatureProfileModel(8, ratio=0.5, temperatures=[0.5, 2.0])
        d0 = m.next_distribution()
        m.append_history(0)
        d1 = m.next_distribution()
        assert d0 != d1


class TestFromConfig:
    def test_kinds(self):
        assert isinstance(from_config({"kind": "uniform", "vocab_size": 4}), UniformModel)
        assert isinstance(from_config(MARKOV3), MarkovModel)
        assert isinstance(
            from_config({"kind": "peaked", "vocab_size": 3, "eps_log2": -6}), PeakedModel
        )
        assert isinstance(
            from_config({"kind": "temperature-profile", "vocab_size": 6}),
            TemperatureProfileModel,
        )

    def test_seeded_markov(self):
        a = from_config({"kind": "markov", "vocab_size": 5, "seed": 3})
        b = from_config({"kind": "markov", "vocab_size": 5, "seed": 3})
        c = from_config({"kind": "markov", "vocab_size": 5, "seed": 4})
        a.append_history(2)
        b.append_history(2)
        c.append_history(2)
        assert a.next_distribution() == b.next_distribution()
        assert a.next_distribution() != c.next_distribution()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            from_config({"kind": "mystery"})
