"""
Exact inner maximization of worst-case excess risk over a KL confidence set.

Given empirical context frequencies phat and excess risks delta, the
least-favorable distribution is

    p*_c = lambda0 * phat_c / (nu - delta_c),   lambda0 = (sum_c phat_c / (nu - delta_c))^-1

where nu > max(delta) is the root of

    g(nu) = sum_c phat_c log2(nu - delta_c) + log2(sum_c phat_c / (nu - delta_c)) - eps = 0.

The root is bracketed and solved in the log-gap t = ln(nu - max(delta)):
with d_c = max(delta) - delta_c, every term is written through
softplus(ln d_c - t) = ln(1 + d_c / (nu - max(delta))), which stays exact
both when nu is huge (eps -> 0) and when nu sits closer to max(delta)
than double precision can resolve (eps large, phat of the worst context
close to 1).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import config
from .confidence import is_full_simplex
from .exceptions import DataError, DegenerateProfileError, RootBracketError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
PHAT_TOL = 1e-9


class Regime(str, Enum):
    INTERIOR = "interior"
    DEGENERATE = "uniform-degenerate"
    POINT_MASS = "point-mass"


@dataclass(frozen=True)
class ExcessProfile:
    """Per-context excess risks at a fixed theta, with the context frequencies"""

    phat: np.ndarray
    deltas: np.ndarray
    rhats: np.ndarray

    @classmethod
    def build(cls, phat: Sequence[float], deltas: Sequence[float], rhats: Optional[Sequence[float]] = None) -> "ExcessProfile":
        """
        Validate a profile.

        phat must be strictly positive and sum to 1 within 1e-9 (it is then
        renormalized); deltas within -1e-9 of zero are clamped to zero.
        """
        p = np.array(phat, dtype=float).reshape(-1)
        deltas = np.array(deltas, dtype=float).reshape(-1)
        if p.size == 0 or deltas.shape != p.shape:
            raise DataError(f"phat and deltas must be non-empty and of equal length, got {p.size} and {deltas.size}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(deltas))):
            raise DataError("profile entries must be finite")
        if np.any(p <= 0):
            raise DataError("phat must be strictly positive")
        if abs(p.sum() - 1.0) > PHAT_TOL:
            raise DataError(f"phat must sum to 1, sums to {p.sum()!r}")
        if deltas.min() < -config.DELTA_CLAMP_TOL:
            raise DataError(f"excess risks must be non-negative, got {deltas.min()!r}")
        rhats = np.zeros_like(p) if rhats is None else np.array(rhats, dtype=float).reshape(-1)
        if rhats.shape != p.shape:
            raise DataError("rhats must match phat in length")
        return cls(phat=p / p.sum(), deltas=np.maximum(deltas, 0.0), rhats=rhats)

    @classmethod
    def from_risks(cls, phat: Sequence[float], risks: Sequence[float], rhats: Sequence[float]) -> "ExcessProfile":
        risks = np.asarray(risks, dtype=float)
        rhats = np.asarray(rhats, dtype=float)
        return cls.build(phat, risks - rhats, rhats)

    @property
    def max_delta(self) -> float:
        return float(self.deltas.max())

    def is_degenerate(self) -> bool:
        spread = float(self.deltas.max() - self.deltas.min())
        return spread <= config.DEGENERATE_REL_TOL * (1.0 + abs(self.max_delta))


@dataclass(frozen=True)
class LeastFavorable:
    p_star: np.ndarray
    nu_star: Optional[float]
    lambda0: Optional[float]
    weights: np.ndarray
    objective: float
    regime: Regime
    eps_bits: float
    kl_bits: float
    log_gap: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        def finite(value):
            return None if value is None or not math.isfinite(value) else float(value)

        return {
            "regime": self.regime.value,
            "p_star": self.p_star.tolist(),
            "nu_star": finite(self.nu_star),
            "lambda0": finite(self.lambda0),
            "weights": self.weights.tolist(),
            "objective": self.objective,
            "eps_bits": finite(self.eps_bits),
            "kl_bits": finite(self.kl_bits),
            "log_gap": finite(self.log_gap),
        }


class ObjectiveDecomposition(NamedTuple):
    erm_term: float
    weighted_excess: float
    K: float

    @property
    def total(self) -> float:
        return self.erm_term + self.weighted_excess + self.K


def _log_ratios(profile: ExcessProfile, t: float) -> np.ndarray:
    """ln((nu - delta_c) / (nu - max delta)) for nu = max delta + e^t"""
    gaps = profile.max_delta - profile.deltas
    with np.errstate(divide="ignore"):
        log_gaps = np.log(gaps)
    return np.logaddexp(0.0, log_gaps - t)


def _residual_at_log_gap(profile: ExcessProfile, eps_bits: float, t: float) -> float:
    ratios = _log_ratios(profile, t)
    log_phat = np.log(profile.phat)
    return (float(np.dot(profile.phat, ratios)) + float(logsumexp(log_phat - ratios))) / LN2 - eps_bits


def multiplier_residual(profile: ExcessProfile, eps_bits: float, nu: float) -> float:
    """g(nu): zero at the multiplier of the simplex constraint"""
    gap = nu - profile.max_delta
    if gap <= 0:
        return math.inf
    return _residual_at_log_gap(profile, eps_bits, math.log(gap))


def _check_eps(eps_bits: float) -> float:
    eps_bits = float(eps_bits)
    if math.isnan(eps_bits) or eps_bits <= 0.0:
        raise DataError(f"eps_bits must be positive, got {eps_bits!r}")
    return eps_bits


def solve_log_gap(profile: ExcessProfile, eps_bits: float) -> float:
    """Root t* = ln(nu* - max delta) of the multiplier equation"""
    eps_bits = _check_eps(eps_bits)
    if is_full_simplex(eps_bits):
        raise DataError("eps_bits at the full-simplex sentinel has no finite multiplier")
    if profile.is_degenerate():
        raise DegenerateProfileError("constant excess profile")

    M = profile.max_delta
    spread = M - float(profile.deltas.min())

    def g(t: float) -> float:
        return _residual_at_log_gap(profile, eps_bits, t)

    t_hi = math.log(1.0 + spread)
    doublings = 0
    while g(t_hi) >= 0.0:
        t_hi += LN2
        doublings += 1
        if doublings > config.MAX_BRACKET_DOUBLINGS:
            raise RootBracketError("root bracket not found")

    t_lo = min(math.log(max(1e-12, 1e-9 * (1.0 + M))), t_hi - 1.0)
    step = 1.0
    extensions = 0
    while g(t_lo) <= 0.0:
        t_lo -= step
        step *= 2.0
        extensions += 1
        if extensions > config.MAX_BRACKET_DOUBLINGS:
            raise RootBracketError("root bracket not found")

    t_star = brentq(g, t_lo, t_hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = g(t_star)
    if abs(residual) > 1e-10:
        logger.warning(f"Multiplier residual {residual:.3e} above tolerance at log-gap {t_star:.6g}")
    return float(t_star)


def root_nu(profile: ExcessProfile, eps_bits: float) -> float:
    """Multiplier nu* > max delta solving g(nu*) = 0"""
    return profile.max_delta + math.exp(solve_log_gap(profile, eps_bits))


def solve_least_favorable(profile: ExcessProfile, eps_bits: float) -> LeastFavorable:
    """
    Maximize sum_c p_c delta_c over {p : D(phat || p) <= eps_bits}

    Args:
        profile: Validated excess profile
        eps_bits: Confidence radius in bits; math.inf (or anything at the
            sentinel) selects the whole simplex

    Returns:
        LeastFavorable with regime interior, uniform-degenerate (constant
        deltas, p* = phat) or point-mass (full simplex, p* uniform over the
        maximizing contexts)
    """
    eps_bits = _check_eps(eps_bits)
    phat, deltas = profile.phat, profile.deltas
    M = profile.max_delta

    if profile.is_degenerate():
        return LeastFavorable(
            p_star=phat.copy(),
            nu_star=None,
            lambda0=None,
            weights=np.zeros_like(phat),
            objective=float(np.dot(phat, deltas)),
            regime=Regime.DEGENERATE,
            eps_bits=eps_bits,
            kl_bits=0.0,
        )

    if is_full_simplex(eps_bits):
        ties = deltas >= M - config.TIE_TOL
        p_star = ties / ties.sum()
        with np.errstate(divide="ignore"):
            kl = float(np.sum(phat * (np.log(phat) - np.log(p_star)))) / LN2
        return LeastFavorable(
            p_star=p_star,
            nu_star=M,
            lambda0=0.0,
            weights=p_star / phat - 1.0,
            objective=M,
            regime=Regime.POINT_MASS,
            eps_bits=eps_bits,
            kl_bits=kl,
        )

    t_star = solve_log_gap(profile, eps_bits)
    ratios = _log_ratios(profile, t_star)
    log_phat = np.log(phat)
    log_norm = float(logsumexp(log_phat - ratios))
    log_p_star = log_phat - ratios - log_norm
    p_star = np.exp(log_p_star)
    return LeastFavorable(
        p_star=p_star,
        nu_star=M + math.exp(t_star),
        lambda0=math.exp(t_star - log_norm),
        weights=np.expm1(-ratios - log_norm),
        objective=float(np.dot(p_star, deltas)),
        regime=Regime.INTERIOR,
        eps_bits=eps_bits,
        kl_bits=float(np.dot(phat, log_phat - log_p_star)) / LN2,
        log_gap=t_star,
    )


def decompose_objective(profile: ExcessProfile, lf: LeastFavorable, erm_risk: float) -> ObjectiveDecomposition:
    """
    Split the worst-case excess risk into the p-hat weighted empirical risk,
    a weighted excess term and the constant K = -sum_c phat_c rhat_c
    """
    weighted_excess = float(np.sum(profile.phat * lf.weights * profile.deltas))
    K = -float(np.dot(profile.phat, profile.rhats))
    return ObjectiveDecomposition(erm_term=float(erm_risk), weighted_excess=weighted_excess, K=K)
