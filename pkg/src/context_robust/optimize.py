"""
Outer minimization: per-context minima, the ERM and group-DRO baselines,
and robust fits of the worst-case excess risk over a KL confidence set
"""
import logging
import math
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from . import config
from .confidence import check_beta, epsilon_bits
from .exceptions import DataError, SolverError
from .inner_solver import ExcessProfile, LeastFavorable, solve_least_favorable
from .model import Dataset, LossModel, ParameterVector, partition_by_context

logger = logging.getLogger(__name__)


class Method(str, Enum):
    ERM = "erm"
    MINIMAX = "minimax-group-dro"
    ROBUST = "robust"


class OptimizerOptions(BaseModel):
    """Projected gradient descent settings shared by all fits"""

    model_config = ConfigDict(extra="forbid")

    step_size: Optional[float] = Field(default=None, gt=0, description="Base step size; per-loss default when unset")
    max_iters: int = Field(default=config.MAX_ITERS, gt=0)
    grad_tol: float = Field(default=config.GRAD_TOL, gt=0)
    obj_rel_tol: float = Field(default=config.OBJ_REL_TOL, gt=0)
    patience: int = Field(default=config.PATIENCE, gt=0)

    def base_step(self, loss: LossModel) -> float:
        if self.step_size is not None:
            return self.step_size
        return config.STEP_SIZE_LOGISTIC if loss.name == "logistic" else config.STEP_SIZE_DEFAULT

    def effective_step(self, loss: LossModel) -> float:
        return self.base_step(loss) * loss.step_scale


class GroupDROOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step_size_q: float = Field(default=config.GROUP_DRO_STEP_Q, gt=0)
    step_size_theta: float = Field(default=config.GROUP_DRO_STEP_THETA, gt=0)
    iterations: int = Field(default=config.GROUP_DRO_ITERS, gt=0)


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class FitResult(BaseModel):
    """Learned parameter with method metadata and convergence diagnostics"""

    method: Method
    loss: str
    theta: List[float]
    theta_lower: List[float]
    theta_upper: List[float]
    beta: Optional[float] = None
    eps_bits: Optional[float] = None
    objective: float
    p_star: Optional[List[float]] = None
    nu_star: Optional[float] = None
    weights: Optional[List[float]] = None
    regime: Optional[str] = None
    kl_bits: Optional[float] = None
    context_risks: List[float] = Field(default_factory=list)
    rhats: Optional[List[float]] = None
    iterations: int = 0
    converged: bool = True
    stop_reason: str = "closed-form"
    step_size: Optional[float] = None
    warnings: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    def parameter(self) -> ParameterVector:
        return ParameterVector(values=self.theta, lower=self.theta_lower, upper=self.theta_upper)

    def to_json(self) -> Dict[str, Any]:
        data = self.model_dump(mode="json")
        data["theta_lower"] = [_finite(v) for v in self.theta_lower]
        data["theta_upper"] = [_finite(v) for v in self.theta_upper]
        return data


class DescentResult(NamedTuple):
    theta: np.ndarray
    value: float
    iterations: int
    converged: bool
    stop_reason: str


class ContextMinima(NamedTuple):
    rhats: np.ndarray
    thetas: List[np.ndarray]
    warnings: List[str]


class WorstCase(NamedTuple):
    value: float
    least_favorable: LeastFavorable
    gradient: np.ndarray
    risks: np.ndarray
    profile: ExcessProfile


def minimize_empirical(
    loss: LossModel, X: np.ndarray, y: np.ndarray, opts: OptimizerOptions, start: Optional[np.ndarray] = None
) -> DescentResult:
    """
    Projected full-batch gradient descent on the mean loss.

    Steps that would increase the objective are rejected and the step size
    halved, so accepted iterates have nonincreasing objective.
    """
    d = X.shape[1]
    theta = loss.project(np.zeros(loss.num_params(d)) if start is None else np.array(start, dtype=float), d)
    value = loss.mean_loss(theta, X, y)
    step = opts.effective_step(loss)
    min_step = step * 2.0**-40

    for iteration in range(1, opts.max_iters + 1):
        grad = loss.mean_gradient(theta, X, y)
        projected = theta - loss.project(theta - grad, d)
        if np.max(np.abs(projected)) <= opts.grad_tol:
            return DescentResult(theta, value, iteration, True, "gradient")

        while True:
            candidate = loss.project(theta - step * grad, d)
            candidate_value = loss.mean_loss(candidate, X, y)
            if candidate_value <= value or step < min_step:
                break
            step *= 0.5
        if candidate_value > value:
            return DescentResult(theta, value, iteration, False, "step-underflow")

        moved = float(np.linalg.norm(candidate - theta))
        decrease = value - candidate_value
        theta, value = candidate, candidate_value
        if moved <= opts.grad_tol:
            return DescentResult(theta, value, iteration, True, "step")
        if decrease <= opts.obj_rel_tol * max(1.0, abs(value)):
            return DescentResult(theta, value, iteration, True, "objective")
        if iteration % config.LOG_EVERY == 0:
            logger.debug(f"Descent iteration {iteration}: objective {value:.10g}")

    return DescentResult(theta, value, opts.max_iters, False, "max-iters")


def _bounds_lists(loss: LossModel, d: int):
    lower, upper = loss.bounds(d)
    return lower.tolist(), upper.tolist()


def _context_risks(loss: LossModel, parts, theta: np.ndarray) -> np.ndarray:
    return np.array([loss.mean_loss(theta, part.features, part.responses) for part in parts.values()])


def per_context_min(loss: LossModel, dataset: Dataset, opts: Optional[OptimizerOptions] = None) -> ContextMinima:
    """
    Minimum empirical risk r_c of every context and its minimizer.

    Uses the loss's closed form when available, gradient descent from
    theta = 0 otherwise; non-converged contexts keep their best iterate and
    add a warning.
    """
    opts = opts or OptimizerOptions()
    rhats, thetas, warnings = [], [], []
    for c, part in partition_by_context(dataset).items():
        closed = loss.context_min(part.features, part.responses)
        if closed is not None:
            theta, value = closed
        else:
            result = minimize_empirical(loss, part.features, part.responses, opts)
            theta, value = result.theta, result.value
            if not result.converged:
                message = f"context {c} minimization did not converge ({result.stop_reason} after {result.iterations} iterations)"
                logger.warning(message)
                warnings.append(message)
        rhats.append(float(value))
        thetas.append(np.asarray(theta, dtype=float))
    return ContextMinima(np.array(rhats), thetas, warnings)


def fit_erm(loss: LossModel, dataset: Dataset, opts: Optional[OptimizerOptions] = None) -> FitResult:
    """Minimize the pooled mean loss, which equals sum_c phat_c R_c(theta)"""
    opts = opts or OptimizerOptions()
    X, y = dataset.features, dataset.responses
    lower, upper = _bounds_lists(loss, dataset.d)
    warnings = list(dataset.warnings)

    closed = loss.context_min(X, y)
    if closed is not None:
        theta, value = np.asarray(closed[0], dtype=float), float(closed[1])
        descent = DescentResult(theta, value, 0, True, "closed-form")
    else:
        descent = minimize_empirical(loss, X, y, opts)
        if not descent.converged:
            message = f"ERM did not converge ({descent.stop_reason} after {descent.iterations} iterations)"
            logger.warning(message)
            warnings.append(message)

    parts = partition_by_context(dataset)
    logger.info(f"ERM fit: objective {descent.value:.6g} in {descent.iterations} iterations ({descent.stop_reason})")
    return FitResult(
        method=Method.ERM,
        loss=loss.name,
        theta=descent.theta.tolist(),
        theta_lower=lower,
        theta_upper=upper,
        objective=descent.value,
        context_risks=_context_risks(loss, parts, descent.theta).tolist(),
        iterations=descent.iterations,
        converged=descent.converged,
        stop_reason=descent.stop_reason,
        step_size=opts.effective_step(loss),
        warnings=warnings,
    )


def fit_group_dro(
    loss: LossModel,
    dataset: Dataset,
    opts: Optional[OptimizerOptions] = None,
    dro: Optional[GroupDROOptions] = None,
    start: Optional[FitResult] = None,
) -> FitResult:
    """
    Minimax-over-contexts baseline by exponentiated-gradient updates of the
    context weights q alternated with projected gradient steps on theta.

    Starts from the ERM solution and returns the iterate with the smallest
    max_c R_c(theta) seen, the start included.
    """
    opts = opts or OptimizerOptions()
    dro = dro or GroupDROOptions()
    d = dataset.d
    parts = partition_by_context(dataset)
    erm = start or fit_erm(loss, dataset, opts)
    warnings = list(erm.warnings)
    theta = np.array(erm.theta, dtype=float)
    step_theta = dro.step_size_theta * loss.step_scale

    log_q = np.full(dataset.num_contexts, -math.log(dataset.num_contexts))
    risks = _context_risks(loss, parts, theta)
    best_theta, best_value, best_iteration = theta, float(risks.max()), 0

    for iteration in range(1, dro.iterations + 1):
        log_q = log_q + dro.step_size_q * risks
        log_q = log_q - logsumexp(log_q)
        q = np.exp(log_q)
        grad = sum(q_c * loss.mean_gradient(theta, part.features, part.responses) for q_c, part in zip(q, parts.values()))
        theta = loss.project(theta - step_theta * grad, d)
        risks = _context_risks(loss, parts, theta)
        if risks.max() < best_value:
            best_theta, best_value, best_iteration = theta, float(risks.max()), iteration
        if iteration % config.LOG_EVERY == 0:
            logger.debug(f"Group DRO iteration {iteration}: max risk {risks.max():.6g}, best {best_value:.6g}")

    logger.info(f"Group DRO fit: max context risk {best_value:.6g} (best at iteration {best_iteration})")
    lower, upper = _bounds_lists(loss, d)
    return FitResult(
        method=Method.MINIMAX,
        loss=loss.name,
        theta=best_theta.tolist(),
        theta_lower=lower,
        theta_upper=upper,
        objective=best_value,
        p_star=np.exp(log_q).tolist(),
        context_risks=_context_risks(loss, parts, best_theta).tolist(),
        iterations=dro.iterations,
        converged=True,
        stop_reason="iterations",
        step_size=step_theta,
        warnings=warnings,
    )


class _RobustObjective:
    """Worst-case excess risk over the confidence set at theta, with its Danskin gradient"""

    def __init__(self, loss: LossModel, dataset: Dataset, rhats: np.ndarray, eps_bits: float, lower_minima: bool):
        self.loss = loss
        self.parts = partition_by_context(dataset)
        self.phat = dataset.stats().phat
        self.rhats = np.array(rhats, dtype=float)
        self.eps_bits = eps_bits
        self.lower_minima = lower_minima
        self.warnings: List[str] = []

    def evaluate(self, theta: np.ndarray) -> WorstCase:
        risks = _context_risks(self.loss, self.parts, theta)
        deltas = risks - self.rhats
        if self.lower_minima and deltas.min() < -config.DELTA_CLAMP_TOL:
            for c in np.flatnonzero(deltas < -config.DELTA_CLAMP_TOL):
                message = f"context {c + 1} minimum improved from {self.rhats[c]:.10g} to {risks[c]:.10g} during descent"
                logger.warning(message)
                self.warnings.append(message)
                self.rhats[c] = risks[c]
            deltas = risks - self.rhats
        profile = ExcessProfile.build(self.phat, deltas, self.rhats)
        lf = solve_least_favorable(profile, self.eps_bits)
        gradient = sum(
            p_c * self.loss.mean_gradient(theta, part.features, part.responses)
            for p_c, part in zip(lf.p_star, self.parts.values())
        )
        return WorstCase(lf.objective, lf, np.asarray(gradient, dtype=float), risks, profile)


def worst_case_objective(
    loss: LossModel, dataset: Dataset, theta, rhats, eps_bits: float
) -> WorstCase:
    """
    max over the confidence set of sum_c p_c (R_c(theta) - rhat_c), the
    least-favorable distribution attaining it and the gradient
    sum_c p*_c grad R_c(theta)
    """
    values = theta.values if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float)
    rhats = np.asarray(rhats, dtype=float)
    if rhats.shape != (dataset.num_contexts,):
        raise DataError(f"expected {dataset.num_contexts} per-context minima, got {rhats.shape}")
    return _RobustObjective(loss, dataset, rhats, eps_bits, lower_minima=False).evaluate(values)


def fit_robust(
    loss: LossModel,
    dataset: Dataset,
    beta: float = config.DEFAULT_BETA,
    opts: Optional[OptimizerOptions] = None,
    eps_override: Optional[float] = None,
    erm: Optional[FitResult] = None,
    minima: Optional[ContextMinima] = None,
) -> FitResult:
    """
    Minimize the worst-case excess risk over the KL confidence set at level beta.

    Args:
        loss: Loss model
        dataset: Training data
        beta: Confidence level in (0, 1]; 1 gives the minimax-regret fit
        opts: Descent options; the step size is fixed and scaled by the loss's step_scale
        eps_override: Confidence radius in bits to use instead of the one implied by beta
        erm: Precomputed ERM fit used as the starting point
        minima: Precomputed per-context minima

    Returns:
        FitResult of the best iterate, with the least-favorable distribution at it
    """
    beta = check_beta(beta)
    opts = opts or OptimizerOptions()
    n, num_contexts, d = dataset.n, dataset.num_contexts, dataset.d
    eps = epsilon_bits(n, num_contexts, beta) if eps_override is None else float(eps_override)

    erm = erm or fit_erm(loss, dataset, opts)
    minima = minima or per_context_min(loss, dataset, opts)
    theta_start = np.array(erm.theta, dtype=float)
    rhats = np.minimum(minima.rhats, np.array(erm.context_risks))
    objective = _RobustObjective(loss, dataset, rhats, eps, lower_minima=True)
    step = opts.effective_step(loss)
    logger.info(f"Robust fit: beta={beta}, eps={eps:.6g} bits, step={step:.3g}, {num_contexts} contexts, n={n}")

    def evaluate(theta: np.ndarray, iteration: int) -> WorstCase:
        try:
            return objective.evaluate(theta)
        except (SolverError, DataError) as e:
            raise SolverError(f"inner maximization failed at iteration {iteration}: {e}") from e

    current = evaluate(theta_start, 0)
    theta = theta_start
    best_theta, best = theta, current
    warned = 0
    stall = 0
    converged, stop_reason, iteration = False, "max-iters", opts.max_iters

    for iteration in range(1, opts.max_iters + 1):
        candidate = loss.project(theta - step * current.gradient, d)
        if np.linalg.norm(candidate - theta) <= opts.grad_tol:
            converged, stop_reason = True, "step"
            break

        previous = current.value
        theta = candidate
        current = evaluate(theta, iteration)

        if len(objective.warnings) > warned:
            # minima changed, so earlier objective values are stale
            warned = len(objective.warnings)
            best_theta, best = min(
                ((best_theta, evaluate(best_theta, iteration)), (theta_start, evaluate(theta_start, iteration))),
                key=lambda pair: pair[1].value,
            )
            stall = 0

        # improvements below the objective tolerance still count towards patience
        if current.value < best.value - opts.obj_rel_tol * max(1.0, abs(best.value)):
            stall = 0
        else:
            stall += 1
        if current.value < best.value:
            best_theta, best = theta, current

        if abs(previous - current.value) <= opts.obj_rel_tol * max(1.0, abs(previous)):
            converged, stop_reason = True, "objective"
            break
        if stall >= opts.patience:
            converged, stop_reason = True, "patience"
            break
        if iteration % config.LOG_EVERY == 0:
            logger.debug(f"Robust iteration {iteration}: objective {current.value:.10g}, best {best.value:.10g}")

    warnings = list(erm.warnings) + list(minima.warnings) + objective.warnings
    if not converged:
        message = f"robust fit stopped at the iteration cap ({opts.max_iters}); best iterate returned"
        logger.warning(message)
        warnings.append(message)
    logger.info(f"Robust fit: objective {best.value:.6g} after {iteration} iterations ({stop_reason}), regime {best.least_favorable.regime.value}")

    lf = best.least_favorable
    lower, upper = _bounds_lists(loss, d)
    return FitResult(
        method=Method.ROBUST,
        loss=loss.name,
        theta=best_theta.tolist(),
        theta_lower=lower,
        theta_upper=upper,
        beta=beta,
        eps_bits=_finite(eps),
        objective=best.value,
        p_star=lf.p_star.tolist(),
        nu_star=_finite(lf.nu_star),
        weights=lf.weights.tolist(),
        regime=lf.regime.value,
        kl_bits=_finite(lf.kl_bits),
        context_risks=best.risks.tolist(),
        rhats=objective.rhats.tolist(),
        iterations=iteration,
        converged=converged,
        stop_reason=stop_reason,
        step_size=step,
        warnings=warnings,
    )


def fit(
    method: str,
    loss: LossModel,
    dataset: Dataset,
    beta: float = config.DEFAULT_BETA,
    opts: Optional[OptimizerOptions] = None,
    dro: Optional[GroupDROOptions] = None,
) -> FitResult:
    """Dispatch by method name: erm, minimax (group DRO) or robust"""
    if method == "erm":
        return fit_erm(loss, dataset, opts)
    if method in ("minimax", Method.MINIMAX.value):
        return fit_group_dro(loss, dataset, opts, dro)
    if method == "robust":
        return fit_robust(loss, dataset, beta, opts)
    raise DataError(f"Unknown method '{method}'")
