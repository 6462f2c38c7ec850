"""
Loss implementations: newsvendor stock control and logistic regression
"""
import logging
import math
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from .. import config
from ..exceptions import DataError
from ..model import LossModel

logger = logging.getLogger(__name__)


def _check_stock(theta, theta_max: float):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > theta_max) or not np.all(np.isfinite(theta)):
        raise DataError(f"stock level {theta.tolist()} outside [0, {theta_max}]")


def newsvendor_loss(theta, x, y, r: float, theta_max: float = math.inf):
    """Stock theta bought at unit cost x, sold at price r against demand y: theta*x - r*min(theta, y)"""
    _check_stock(theta, theta_max)
    return theta * np.asarray(x, dtype=float) - r * np.minimum(theta, np.asarray(y, dtype=float))


def newsvendor_subgradient(theta, x, y, r: float, theta_max: float = math.inf):
    """x - r * 1{theta < y}; the right derivative x at the kink theta = y"""
    _check_stock(theta, theta_max)
    return np.asarray(x, dtype=float) - r * (theta < np.asarray(y, dtype=float))


def newsvendor_context_min(x, y, r: float, theta_max: float) -> Tuple[float, float]:
    """
    Smallest minimizer of the empirical newsvendor risk and its value.

    The right slope of the risk at theta is mean(x) - r * P(y > theta), so
    the smallest minimizer is the k-th order statistic of y with
    k = ceil(n * (1 - mean(x) / r)).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if n == 0:
        raise DataError("empty context")
    x_bar = float(x.mean())
    if x_bar >= r:
        return 0.0, 0.0
    k = max(1, math.ceil(n * (1.0 - x_bar / r) - 1e-12 * n))
    theta = float(np.clip(np.sort(y)[k - 1], 0.0, theta_max))
    value = float(np.mean(newsvendor_loss(theta, x, y, r, theta_max)))
    return theta, value


def logistic_loss(theta, X_design, y):
    """Cross-entropy of sigma(x'theta) with the logit clamped to +-LOGIT_CLAMP"""
    z = np.clip(X_design @ theta, -config.LOGIT_CLAMP, config.LOGIT_CLAMP)
    return np.logaddexp(0.0, z) - y * z


def logistic_gradient(theta, X_design, y):
    z = np.clip(X_design @ theta, -config.LOGIT_CLAMP, config.LOGIT_CLAMP)
    return (expit(z) - y)[:, None] * X_design


class NewsvendorLoss(LossModel):
    """Single stock level theta in [0, theta_max]; features are unit costs x, responses demands y"""

    name = "newsvendor"

    def __init__(self, r: float = config.NEWSVENDOR_PRICE, theta_max: float = config.NEWSVENDOR_THETA_MAX):
        if not (r > 0 and theta_max > 0):
            raise DataError(f"newsvendor needs r > 0 and theta_max > 0, got r={r}, theta_max={theta_max}")
        self.r = float(r)
        self.theta_max = float(theta_max)
        self.step_scale = 1.0 / self.r

    def params(self) -> Dict[str, Any]:
        return {"r": self.r, "theta_max": self.theta_max}

    def num_params(self, d: int) -> int:
        if d != 1:
            raise DataError(f"newsvendor takes a single feature (unit cost), got d={d}")
        return 1

    def bounds(self, d: int):
        self.num_params(d)
        return np.array([0.0]), np.array([self.theta_max])

    def pointwise_loss(self, theta, X, y):
        return newsvendor_loss(float(theta[0]), X[:, 0], y, self.r, self.theta_max)

    def pointwise_gradient(self, theta, X, y):
        return newsvendor_subgradient(float(theta[0]), X[:, 0], y, self.r, self.theta_max).reshape(-1, 1)

    def context_min(self, X, y) -> Optional[Tuple[np.ndarray, float]]:
        theta, value = newsvendor_context_min(X[:, 0], y, self.r, self.theta_max)
        return np.array([theta]), value


class LogisticLoss(LossModel):
    """Binary cross-entropy on sigma(x~'theta), x~ = (x, 1) when add_bias"""

    name = "logistic"

    def __init__(self, add_bias: bool = True):
        self.add_bias = bool(add_bias)

    def params(self) -> Dict[str, Any]:
        return {"add_bias": self.add_bias}

    def num_params(self, d: int) -> int:
        return d + 1 if self.add_bias else d

    def design(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.add_bias:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def _checked(self, theta, X):
        Xt = self.design(X)
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != Xt.shape[1]:
            raise DataError(f"dimension mismatch: theta has {theta.shape[0]} entries, design has {Xt.shape[1]} columns")
        return theta, Xt

    def pointwise_loss(self, theta, X, y):
        theta, Xt = self._checked(theta, X)
        return logistic_loss(theta, Xt, np.asarray(y, dtype=float))

    def pointwise_gradient(self, theta, X, y):
        theta, Xt = self._checked(theta, X)
        return logistic_gradient(theta, Xt, np.asarray(y, dtype=float))

    def predict_proba(self, theta, X) -> np.ndarray:
        theta, Xt = self._checked(theta, X)
        return expit(np.clip(Xt @ theta, -config.LOGIT_CLAMP, config.LOGIT_CLAMP))

    def evaluation_loss(self, theta, X, y):
        """0-1 error of the thresholded prediction sigma >= 0.5"""
        predicted = (self.predict_proba(theta, X) >= 0.5).astype(float)
        return (predicted != np.asarray(y, dtype=float)).astype(float)
