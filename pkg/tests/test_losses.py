"""
Tests for the newsvendor and logistic losses and the loss registry
"""
import math

import numpy as np
import pytest

from context_robust.exceptions import DataError
from context_robust.losses import LogisticLoss, LossRegistry, NewsvendorLoss, build_loss
from context_robust.losses.implementations import (
    newsvendor_context_min,
    newsvendor_loss,
    newsvendor_subgradient,
)


class TestNewsvendor:
    """Stock-control loss theta*x - r*min(theta, y)"""

    def test_understock(self):
        """Test theta=2, x=1, y=3, r=2"""
        assert newsvendor_loss(2.0, 1.0, 3.0, 2.0) == -2.0

    def test_zero_stock(self):
        """Test that zero stock costs nothing"""
        assert newsvendor_loss(0.0, 3.7, 11.0, 5.0) == 0.0

    def test_overstock(self):
        """Test theta=5, x=1, y=2, r=2"""
        assert newsvendor_loss(5.0, 1.0, 2.0, 2.0) == 1.0

    def test_outside_domain(self):
        """Test that stock levels outside [0, theta_max] are rejected"""
        with pytest.raises(DataError):
            newsvendor_loss(-1.0, 1.0, 2.0, 2.0)
        with pytest.raises(DataError):
            newsvendor_loss(11.0, 1.0, 2.0, 2.0, theta_max=10.0)

    def test_subgradient_slopes(self):
        """Test the understock, overstock and kink slopes"""
        assert newsvendor_subgradient(1.0, 0.5, 3.0, 2.0) == -1.5
        assert newsvendor_subgradient(4.0, 0.5, 3.0, 2.0) == 0.5
        assert newsvendor_subgradient(3.0, 0.5, 3.0, 2.0) == 0.5

    def test_context_min_flat_segment(self):
        """Test that the smallest minimizer of a flat minimum is returned"""
        theta, value = newsvendor_context_min([0.5] * 4, [1.0, 2.0, 3.0, 4.0], r=1.0, theta_max=10.0)
        assert theta == 2.0
        assert value == pytest.approx(-0.75, abs=1e-15)

    def test_context_min_unprofitable(self):
        """Test that mean cost at the price gives zero stock"""
        assert newsvendor_context_min([1.0, 1.0], [3.0, 4.0], r=1.0, theta_max=10.0) == (0.0, 0.0)

    def test_context_min_single_sample(self):
        """Test a single sample (x=0.1, y=5)"""
        theta, value = newsvendor_context_min([0.1], [5.0], r=1.0, theta_max=10.0)
        assert theta == 5.0
        assert value == pytest.approx(-4.5, abs=1e-12)

    def test_context_min_clipped(self):
        """Test that the minimizer is clipped to theta_max"""
        theta, _ = newsvendor_context_min([0.1, 0.1], [50.0, 60.0], r=1.0, theta_max=10.0)
        assert theta == 10.0

    def test_context_min_global(self, rng):
        """Test that the closed form beats random feasible stock levels"""
        x = rng.uniform(0.5, 3.0, size=40)
        y = rng.uniform(0.0, 30.0, size=40)
        theta, value = newsvendor_context_min(x, y, r=4.0, theta_max=40.0)
        for candidate in rng.uniform(0.0, 40.0, size=1000):
            assert value <= np.mean(newsvendor_loss(candidate, x, y, 4.0, 40.0)) + 1e-12

    def test_convexity_spot_check(self, rng):
        """Test midpoint convexity of the empirical risk on a grid"""
        x = rng.uniform(0.5, 3.0, size=25)
        y = rng.uniform(0.0, 30.0, size=25)
        grid = np.linspace(0.0, 40.0, 201)
        risks = np.array([np.mean(newsvendor_loss(t, x, y, 4.0, 40.0)) for t in grid])
        assert np.all(risks[1:-1] <= np.maximum(risks[:-2], risks[2:]) + 1e-12)

    def test_class_interface(self, newsvendor):
        """Test bounds, projection and the vectorized loss"""
        lower, upper = newsvendor.bounds(1)
        assert lower.tolist() == [0.0]
        assert upper.tolist() == [10.0]
        assert newsvendor.project(np.array([12.0]), 1).tolist() == [10.0]
        assert newsvendor.step_scale == 1.0

        X = np.array([[0.5], [0.5]])
        y = np.array([1.0, 3.0])
        assert newsvendor.pointwise_loss(np.array([2.0]), X, y).tolist() == [0.0, -1.0]
        assert newsvendor.pointwise_gradient(np.array([2.0]), X, y).shape == (2, 1)

    def test_single_feature_only(self, newsvendor):
        """Test that more than one feature is rejected"""
        with pytest.raises(DataError):
            newsvendor.num_params(2)

    def test_invalid_parameters(self):
        """Test that r and theta_max must be positive"""
        with pytest.raises(DataError):
            NewsvendorLoss(r=0.0)
        with pytest.raises(DataError):
            NewsvendorLoss(theta_max=-1.0)


class TestLogistic:
    """Cross-entropy on sigma(x'theta)"""

    def test_zero_parameter(self, logistic):
        """Test loss ln 2 and gradient (0.5 - y) x~ at theta = 0"""
        X = np.array([[1.0, -2.0], [0.5, 3.0]])
        y = np.array([1.0, 0.0])
        theta = np.zeros(3)

        assert logistic.pointwise_loss(theta, X, y) == pytest.approx([math.log(2.0)] * 2, abs=1e-15)
        grad = logistic.pointwise_gradient(theta, X, y)
        assert grad[0].tolist() == [-0.5, 1.0, -0.5]
        assert grad[1].tolist() == [0.25, 1.5, 0.5]

    def test_saturation(self):
        """Test that a confident correct prediction has near-zero loss"""
        loss = LogisticLoss(add_bias=False)
        value = loss.pointwise_loss(np.array([100.0]), np.array([[1.0]]), np.array([1.0]))[0]
        assert 0.0 <= value < 1e-12
        assert np.isfinite(loss.pointwise_loss(np.array([100.0]), np.array([[1.0]]), np.array([0.0]))[0])

    def test_probabilities_open_interval(self, logistic):
        """Test that clamped probabilities stay strictly inside (0, 1)"""
        proba = logistic.predict_proba(np.array([1000.0, 0.0]), np.array([[1.0], [-1.0]]))
        assert np.all(proba > 0.0) and np.all(proba < 1.0)

    def test_dimension_mismatch(self, logistic):
        """Test that theta must match the design width"""
        with pytest.raises(DataError, match="dimension mismatch"):
            logistic.pointwise_loss(np.zeros(2), np.ones((3, 2)), np.zeros(3))

    def test_num_params(self):
        """Test the bias column count"""
        assert LogisticLoss(add_bias=True).num_params(2) == 3
        assert LogisticLoss(add_bias=False).num_params(2) == 2

    def test_finite_difference_gradient(self, logistic, rng):
        """Test the mean gradient against central differences"""
        X = rng.normal(size=(30, 2))
        y = (rng.random(30) < 0.5).astype(float)
        h = 1e-6
        for _ in range(20):
            theta = rng.normal(size=3)
            analytic = logistic.mean_gradient(theta, X, y)
            numeric = np.array(
                [
                    (logistic.mean_loss(theta + h * e, X, y) - logistic.mean_loss(theta - h * e, X, y)) / (2 * h)
                    for e in np.eye(3)
                ]
            )
            assert np.linalg.norm(numeric - analytic) <= 1e-6 * max(1.0, np.linalg.norm(analytic))

    def test_midpoint_convexity(self, logistic, rng):
        """Test midpoint convexity on random parameter pairs"""
        X = rng.normal(size=(40, 2))
        y = (rng.random(40) < 0.5).astype(float)
        for _ in range(20):
            a, b = rng.normal(scale=3.0, size=(2, 3))
            mid = logistic.mean_loss(0.5 * (a + b), X, y)
            assert mid <= 0.5 * (logistic.mean_loss(a, X, y) + logistic.mean_loss(b, X, y)) + 1e-12

    def test_evaluation_loss(self, logistic):
        """Test that evaluation uses the 0-1 error of the thresholded prediction"""
        theta = np.array([1.0, 0.0])
        X = np.array([[2.0], [-2.0], [3.0]])
        y = np.array([1.0, 0.0, 0.0])
        assert logistic.evaluation_loss(theta, X, y).tolist() == [0.0, 0.0, 1.0]


class TestLossRegistry:
    """Selecting losses by name"""

    def test_default_losses(self):
        """Test that both losses are registered with schemas"""
        registry = LossRegistry()
        names = [schema["name"] for schema in registry.get_loss_schemas()]
        assert names == ["newsvendor", "logistic"]

    def test_build_with_params(self):
        """Test that parameter blocks reach the constructor"""
        loss = build_loss("newsvendor", {"r": 2.0, "theta_max": 50.0})
        assert isinstance(loss, NewsvendorLoss)
        assert loss.params() == {"r": 2.0, "theta_max": 50.0}
        assert loss.step_scale == 0.5

    def test_build_defaults(self):
        """Test the default newsvendor parameters"""
        assert build_loss("newsvendor").params() == {"r": 10.0, "theta_max": 100.0}
        assert build_loss("logistic").params() == {"add_bias": True}

    def test_unknown_loss(self):
        """Test that an unknown name lists the available losses"""
        with pytest.raises(DataError, match="available"):
            build_loss("hinge")

    def test_unknown_parameter(self):
        """Test that unknown parameters are rejected"""
        with pytest.raises(DataError, match="Unknown parameters"):
            build_loss("logistic", {"l2": 1.0})

    def test_register_custom_loss(self):
        """Test registering an extra loss"""
        registry = LossRegistry()
        registry.register_loss(
            name="steep-newsvendor",
            factory=lambda: NewsvendorLoss(r=50.0),
            description="Newsvendor with a high price",
            parameters={"type": "object", "properties": {}, "required": []},
        )
        assert registry.build_loss("steep-newsvendor").r == 50.0
