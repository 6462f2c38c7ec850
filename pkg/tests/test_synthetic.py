"""
Tests for the seeded synthetic generators
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from context_robust.exceptions import DataError
from context_robust.model import partition_by_context
from context_robust.synthetic import (
    ClassifyGenConfig,
    ClassifyGenerator,
    StockGenConfig,
    StockGenerator,
    gen_classify,
    gen_stock,
    gen_stock_two_context,
    make_generator,
)
from context_robust.utils import rng as rngs


class TestStockGenerator:
    """Multi-context stock-control data"""

    def test_coefficient_endpoints(self):
        """Test (mu, a, b) at the first and last context"""
        cfg = StockGenConfig()
        assert cfg.coefficients(1) == pytest.approx((1.0, 0.1, 15.0))
        assert cfg.coefficients(10) == pytest.approx((7.0, 7.0, 30.0))

    def test_context_probabilities(self):
        """Test p1 = 0.7 with the rest split equally"""
        probs = StockGenConfig().probs()
        assert probs[0] == 0.7
        assert probs[1:] == pytest.approx([0.3 / 9] * 9)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_context_frequency(self):
        """Test the empirical frequency of context 1 over 1e5 samples"""
        data = gen_stock(StockGenConfig(n=100_000, seed=1))
        assert abs(data.counts[0] / data.n - 0.7) <= 0.01

    def test_same_seed_identical(self):
        """Test that the same seed reproduces the data bit for bit"""
        first = gen_stock(StockGenConfig(n=300, seed=9))
        second = gen_stock(StockGenConfig(n=300, seed=9))
        assert np.array_equal(first.features, second.features)
        assert np.array_equal(first.responses, second.responses)
        assert np.array_equal(first.contexts, second.contexts)

    def test_different_seeds_differ(self):
        """Test that different seeds give different data"""
        assert not np.array_equal(
            gen_stock(StockGenConfig(n=50, seed=1)).responses, gen_stock(StockGenConfig(n=50, seed=2)).responses
        )

    def test_demand_nonnegative(self, stock_data):
        """Test that demand is clamped at zero and costs are positive"""
        assert np.all(stock_data.responses >= 0.0)
        assert np.all(stock_data.features > 0.0)
        assert stock_data.d == 1

    @pytest.mark.parametrize("c", [1, 5, 10])
    def test_log_cost_moment(self, c):
        """Test that the mean of ln x is mu_c by default"""
        cfg = StockGenConfig(seed=4)
        generator = StockGenerator(cfg)
        m = 200_000
        X, _ = generator.sample_context(c, m, rngs.stream(4, "moment", c))
        log_x = np.log(X[:, 0])
        mu, _, _ = cfg.coefficients(c)
        assert abs(log_x.mean() - mu) <= 3 * cfg.log_sd / math.sqrt(m)

    def test_log_location_conventions(self):
        """Test the log and mean readings of mu_c"""
        log_reading = StockGenerator(StockGenConfig())
        mean_reading = StockGenerator(StockGenConfig(lognormal_location="mean"))
        assert log_reading.log_location(3) == pytest.approx(StockGenConfig().coefficients(3)[0])
        assert mean_reading.log_location(1) == pytest.approx(-0.125)

    def test_cost_mean(self):
        """Test E[x | c] = mu_c under the mean reading"""
        generator = StockGenerator(StockGenConfig(lognormal_location="mean"))
        X, _ = generator.sample_context(4, 200_000, rngs.stream(0, "moment"))
        assert X.mean() == pytest.approx(generator.cfg.coefficients(4)[0], rel=0.01)

    def test_cost_mean_log_reading(self):
        """Test E[x | c] = exp(mu_c + log_sd^2 / 2) under the default reading"""
        generator = StockGenerator(StockGenConfig())
        X, _ = generator.sample_context(4, 200_000, rngs.stream(0, "moment"))
        mu, _, _ = generator.cfg.coefficients(4)
        assert X.mean() == pytest.approx(math.exp(mu + 0.5 * generator.cfg.log_sd**2), rel=0.01)

    def test_standard_deviation_reading(self):
        """Test that the variance switch changes the spreads"""
        cfg = StockGenConfig(scale_is_variance=False, demand_is_variance=False)
        assert cfg.log_sd == 0.25
        assert cfg.demand_sd == 4.0
        assert StockGenConfig().log_sd == 0.5
        assert StockGenConfig().demand_sd == 2.0

    def test_metadata(self, stock_data):
        """Test that metadata carries the true distribution and samplers"""
        meta = stock_data.metadata
        assert meta["generator"] == "stock"
        assert meta["p_true"][0] == 0.7
        assert meta["coefficients"]["b"][-1] == 30.0
        assert meta["samplers"]["normal"] == "Box-Muller"

    def test_rejects_unknown_field(self):
        """Test that config blocks reject unknown keys"""
        with pytest.raises(ValidationError):
            StockGenConfig(num_context=3)


class TestClassifyGenerator:
    """Three-context classification data"""

    def test_shapes(self, classify_data):
        """Test two features and 0/1 labels"""
        assert classify_data.d == 2
        assert set(np.unique(classify_data.responses)) <= {0.0, 1.0}
        assert classify_data.num_contexts == 3

    def test_same_seed_identical(self):
        """Test determinism"""
        first = gen_classify(ClassifyGenConfig(n=200, seed=3))
        second = gen_classify(ClassifyGenConfig(n=200, seed=3))
        assert np.array_equal(first.features, second.features)
        assert np.array_equal(first.responses, second.responses)

    def test_label_law_at_zero(self):
        """Test P(y=1 | x1 near 0) = 1/2 in the centered context"""
        generator = ClassifyGenerator(ClassifyGenConfig())
        X, y = generator.sample_context(2, 400_000, rngs.stream(0, "moment"))
        near = np.abs(X[:, 0]) <= 0.05
        k = int(near.sum())
        assert abs(y[near].mean() - 0.5) <= 3 * 0.5 / math.sqrt(k)

    @pytest.mark.parametrize("c", [1, 3])
    def test_x2_shift(self, c):
        """Test E[x2 - x1 - offset | y=0] = +2"""
        cfg = ClassifyGenConfig()
        X, y = ClassifyGenerator(cfg).sample_context(c, 200_000, rngs.stream(1, "moment", c))
        residual = X[y == 0, 1] - X[y == 0, 0] - cfg.offsets[c - 1]
        assert abs(residual.mean() - 2.0) <= 3 * cfg.x2_sd / math.sqrt(residual.size)

    def test_invalid_probs(self):
        """Test that probabilities must form a positive distribution"""
        with pytest.raises(ValidationError):
            ClassifyGenConfig(probs=[0.5, 0.5, 0.5])
        with pytest.raises(ValidationError):
            ClassifyGenConfig(probs=[0.5, 0.5], mus=[0.0, 1.0], offsets=[0.0])


class TestTwoContext:
    """Fixed-count two-context stock data"""

    def test_counts(self, two_context_data):
        """Test 90 + 10 samples and phat = (0.9, 0.1)"""
        assert two_context_data.n == 100
        assert two_context_data.counts.tolist() == [90, 10]
        assert two_context_data.stats().phat.tolist() == [0.9, 0.1]

    def test_same_seed_identical(self):
        """Test determinism"""
        first = gen_stock_two_context(90, 10, seed=2)
        second = gen_stock_two_context(90, 10, seed=2)
        assert np.array_equal(first.responses, second.responses)

    def test_heterogeneous_contexts(self, two_context_data):
        """Test that context 2 has costlier units and higher demand"""
        parts = partition_by_context(two_context_data)
        assert parts[2].features.mean() > parts[1].features.mean()
        assert parts[2].responses.mean() > parts[1].responses.mean()


def test_make_generator():
    """Test building generators by name"""
    generator = make_generator("classify", {"n": 50})
    assert generator.cfg.n == 50
    assert generator.num_contexts == 3
    assert make_generator("two-context").probs.tolist() == [0.9, 0.1]


def test_make_generator_unknown():
    """Test that unknown generator names are rejected"""
    with pytest.raises(DataError, match="Unknown generator"):
        make_generator("mnist")
