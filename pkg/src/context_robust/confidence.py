"""
KL confidence sets over context distributions.

All divergences and radii are in bits (base-2 logarithms); the inner
solver's multiplier equation uses the same base.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

from . import config
from .exceptions import DataError
from .utils import rng as rngs

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not (0.0 < beta <= 1.0):
        raise DataError("confidence level out of range")
    return beta


def epsilon_bits(n: int, num_contexts: int, beta: float) -> float:
    """
    Radius of the confidence set that covers the true context distribution
    with probability at least beta.

    Returns math.inf for beta = 1 (the set is the whole simplex).
    """
    beta = check_beta(beta)
    if n < 1 or num_contexts < 1:
        raise DataError(f"n and num_contexts must be positive, got n={n}, num_contexts={num_contexts}")
    if beta == 1.0:
        return math.inf
    return (num_contexts * math.log2(n + 1) - math.log2(1.0 - beta)) / n


def is_full_simplex(eps_bits: float) -> bool:
    return eps_bits >= config.EPS_SENTINEL_BITS


@dataclass(frozen=True)
class ConfidenceParams:
    beta: float
    n: int
    num_contexts: int
    eps_bits: float

    @classmethod
    def build(cls, beta: float, n: int, num_contexts: int) -> "ConfidenceParams":
        return cls(beta=beta, n=n, num_contexts=num_contexts, eps_bits=epsilon_bits(n, num_contexts, beta))


def as_simplex(values: Sequence[float], name: str = "distribution") -> np.ndarray:
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DataError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise DataError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise DataError(f"{name} must sum to 1, sums to {p.sum()!r}")
    return p


def kl_bits(phat: Sequence[float], p: Sequence[float]) -> float:
    """D(phat || p) in bits, with 0 log(0/q) = 0 and +inf on support violations"""
    a = np.asarray(phat, dtype=float)
    b = np.asarray(p, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape} vs {b.shape}")
    a = as_simplex(a, "phat")
    b = as_simplex(b, "p")
    value = float(np.sum(rel_entr(a, b))) / math.log(2.0)
    return max(value, 0.0)


def contains(params: ConfidenceParams, phat: Sequence[float], p: Sequence[float]) -> bool:
    divergence = kl_bits(phat, p)
    if is_full_simplex(params.eps_bits):
        return True
    return divergence <= params.eps_bits


def _coverage_hits(p_true: np.ndarray, n: int, eps: float, seed: int, start: int, stop: int) -> int:
    hits = 0
    for trial in range(start, stop):
        draws = rngs.categorical(rngs.stream(seed, "coverage", trial), p_true, n)
        phat = np.bincount(draws, minlength=p_true.size) / n
        if kl_bits(phat, p_true) <= eps:
            hits += 1
    return hits


def simulate_coverage(
    p_true: Sequence[float], n: int, beta: float, trials: int, seed: int, workers: int = 1
) -> float:
    """
    Fraction of simulated context-count vectors whose confidence set
    contains p_true.

    Trial t draws from stream (seed, "coverage", t), so the result does not
    depend on the number of workers.
    """
    p = as_simplex(p_true, "p_true")
    if np.any(p <= 0):
        raise DataError("p_true must be strictly positive")
    if trials < 1 or n < 1:
        raise DataError("trials and n must be positive")
    params = ConfidenceParams.build(beta, n, p.size)
    if is_full_simplex(params.eps_bits):
        return 1.0

    if workers <= 1:
        hits = _coverage_hits(p, n, params.eps_bits, seed, 0, trials)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_coverage_hits, p, n, params.eps_bits, seed, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            hits = sum(f.result() for f in futures)

    coverage = hits / trials
    logger.info(f"Coverage {coverage:.4f} over {trials} trials (n={n}, beta={beta}, eps={params.eps_bits:.6f} bits)")
    return coverage


def _binary_kl_bits(a: float, p: float) -> float:
    return float(rel_entr(a, p) + rel_entr(1.0 - a, 1.0 - p)) / math.log(2.0)


def binary_interval(phat1: float, n: int, beta: float) -> Tuple[float, float]:
    """
    Interval of p1 such that (p1, 1 - p1) lies in the two-context
    confidence set around (phat1, 1 - phat1).
    """
    if not (0.0 <= phat1 <= 1.0):
        raise DataError("phat1 must lie in [0, 1]")
    eps = epsilon_bits(n, 2, beta)
    if is_full_simplex(eps):
        return 0.0, 1.0

    def gap(p: float) -> float:
        return _binary_kl_bits(phat1, p) - eps

    tiny = 1e-300
    lower = 0.0
    if phat1 > 0.0 and gap(tiny) > 0.0:
        lower = brentq(gap, tiny, phat1, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    almost_one = float(np.nextafter(1.0, 0.0))
    upper = 1.0
    if phat1 < 1.0 and gap(almost_one) > 0.0:
        upper = brentq(gap, phat1, almost_one, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(lower), float(upper)
