"""
Test configuration and fixtures for context-robust-learning tests
"""
import pytest
import sys
import os

import numpy as np

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))


@pytest.fixture
def newsvendor():
    """Newsvendor loss with unit price 1 and stock bound 10"""
    from context_robust.losses import NewsvendorLoss
    return NewsvendorLoss(r=1.0, theta_max=10.0)


@pytest.fixture
def logistic():
    """Logistic loss with a bias feature"""
    from context_robust.losses import LogisticLoss
    return LogisticLoss(add_bias=True)


@pytest.fixture
def small_stock_dataset():
    """Two contexts with hand-picked costs and demands"""
    from context_robust.model import Dataset
    return Dataset.from_arrays(
        features=[0.5, 0.5, 0.5, 0.5, 0.2, 0.2, 0.2],
        responses=[1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0],
        contexts=[1, 1, 1, 1, 2, 2, 2],
        num_contexts=2,
    )


@pytest.fixture
def two_context_data():
    """The n1 = 90, n2 = 10 two-context stock instance"""
    from context_robust.synthetic import gen_stock_two_context
    return gen_stock_two_context(90, 10, seed=7)


@pytest.fixture
def stock_data():
    """Stock generator draw with unit costs on the scale of the default price"""
    from context_robust.synthetic import StockGenConfig, gen_stock
    return gen_stock(StockGenConfig(lognormal_location="mean", seed=3))


@pytest.fixture
def classify_data():
    """Smaller classification generator draw"""
    from context_robust.synthetic import ClassifyGenConfig, gen_classify
    return gen_classify(ClassifyGenConfig(n=600, seed=5))


@pytest.fixture
def rng():
    """Test-local random generator"""
    return np.random.default_rng(20240517)


@pytest.fixture
def profile_file(tmp_path):
    """JSON excess profile with two contexts"""
    import json
    path = tmp_path / "profile.json"
    path.write_text(json.dumps({"phat": [0.5, 0.5], "deltas": [0.0, 1.0]}))
    return str(path)
