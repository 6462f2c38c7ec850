"""
Monte Carlo evaluation of fitted parameters under known generator laws,
and the experiment harness comparing ERM, group DRO and robust fits
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, PrivateAttr

from .confidence import epsilon_bits
from .exceptions import ContextRobustError, DataError
from .inner_solver import ExcessProfile, solve_least_favorable
from .model import Dataset, LossModel, partition_by_context
from .optimize import OptimizerOptions, fit_erm, fit_group_dro, fit_robust, minimize_empirical, per_context_min
from .settings import ExperimentConfig
from .synthetic import ContextGenerator, make_generator
from .utils import rng as rngs

logger = logging.getLogger(__name__)

# stable per-method stream tags, independent of the order methods are listed in
METHOD_TAGS = {"erm": 0, "minimax": 1, "robust": 2}
SCENARIOS = ("nominal", "worst")


def _pointwise(loss: LossModel, theta: np.ndarray, X: np.ndarray, y: np.ndarray, metric: str) -> np.ndarray:
    if metric == "loss":
        return loss.pointwise_loss(theta, X, y)
    if metric == "error":
        return loss.evaluation_loss(theta, X, y)
    raise DataError(f"Unknown metric '{metric}'")


def mc_context_risk(
    loss: LossModel,
    theta,
    generator: ContextGenerator,
    c: int,
    m: int,
    seed: int,
    metric: str = "loss",
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Mean loss (or 0-1 error) of theta over m fresh draws from context c"""
    if m < 1:
        raise DataError("m must be positive")
    rng = rng or rngs.stream(seed, "eval", c)
    X, y = generator.sample_context(c, m, rng)
    return float(np.mean(_pointwise(loss, np.asarray(theta, dtype=float), X, y, metric)))


def mc_context_min_risk(
    loss: LossModel,
    generator: ContextGenerator,
    c: int,
    m: int,
    seed: int,
    opts: Optional[OptimizerOptions] = None,
    metric: str = "loss",
) -> float:
    """
    Minimum risk of context c: fit on one m-sample (closed form or gradient
    descent on the training loss), evaluate on an independent m-sample
    """
    opts = opts or OptimizerOptions()
    X, y = generator.sample_context(c, m, rngs.stream(seed, "min-fit", c))
    closed = loss.context_min(X, y)
    if closed is not None:
        theta = np.asarray(closed[0], dtype=float)
    else:
        result = minimize_empirical(loss, X, y, opts)
        theta = result.theta
        if not result.converged:
            logger.warning(f"Context {c} minimum-risk fit did not converge ({result.stop_reason})")
    return mc_context_risk(loss, theta, generator, c, m, seed, metric, rng=rngs.stream(seed, "min-eval", c))


def context_min_risks(
    loss: LossModel, generator: ContextGenerator, m: int, seed: int, opts=None, metric: str = "loss"
) -> np.ndarray:
    return np.array(
        [mc_context_min_risk(loss, generator, c, m, seed, opts, metric) for c in range(1, generator.num_contexts + 1)]
    )


class ExcessReport(BaseModel):
    per_context_risk: List[float]
    per_context_min_risk: List[float]
    per_context_excess: List[float]
    nominal_excess: float
    worst_case_excess: float
    m: int
    seed: int
    metric: str = "loss"


def excess_report(
    loss: LossModel,
    theta,
    generator: ContextGenerator,
    m: int,
    seed: int,
    min_risks: Optional[Sequence[float]] = None,
    metric: str = "loss",
    stream_keys: Tuple[int, ...] = (),
    opts: Optional[OptimizerOptions] = None,
) -> ExcessReport:
    """
    Per-context true risks and excess risks of theta, with the nominal
    (true context distribution) and worst-case (worst single context)
    summaries
    """
    theta = np.asarray(theta, dtype=float)
    if min_risks is None:
        min_risks = context_min_risks(loss, generator, m, seed, opts, metric)
    min_risks = np.asarray(min_risks, dtype=float)
    risks = np.array(
        [
            mc_context_risk(loss, theta, generator, c, m, seed, metric, rng=rngs.stream(seed, "eval", *stream_keys, c))
            for c in range(1, generator.num_contexts + 1)
        ]
    )
    excess = risks - min_risks
    return ExcessReport(
        per_context_risk=risks.tolist(),
        per_context_min_risk=min_risks.tolist(),
        per_context_excess=excess.tolist(),
        nominal_excess=float(np.dot(generator.probs, excess)),
        worst_case_excess=float(excess.max()),
        m=m,
        seed=seed,
        metric=metric,
    )


class BoxStats(BaseModel):
    median: float
    q1: float
    q3: float
    min: float
    max: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "BoxStats":
        values = np.asarray(values, dtype=float)
        q1, median, q3 = np.percentile(values, [25, 50, 75])
        return cls(median=median, q1=q1, q3=q3, min=values.min(), max=values.max())


class ExperimentSummary(BaseModel):
    name: str
    stats: Dict[str, Dict[str, BoxStats]]
    values: Dict[str, Dict[str, List[float]]]
    runs: int
    succeeded: int
    failed: int
    failures: List[str] = Field(default_factory=list)
    min_risks: List[float]
    metric: str
    config: Dict[str, Any] = Field(default_factory=dict)

    def rows(self) -> pd.DataFrame:
        """Per-run excess values as run,method,scenario,excess rows"""
        return pd.DataFrame(self._records, columns=["run", "method", "scenario", "excess"])

    _records: List[Tuple[int, str, str, float]] = PrivateAttr(default_factory=list)


def _fit_method(method: str, loss, dataset, cfg: ExperimentConfig, erm, minima):
    if method == "erm":
        return erm
    if method == "minimax":
        return fit_group_dro(loss, dataset, cfg.optimizer, cfg.group_dro, start=erm)
    return fit_robust(loss, dataset, cfg.beta, cfg.optimizer, erm=erm, minima=minima)


def _run_once(cfg: ExperimentConfig, run: int, min_risks: np.ndarray) -> Dict[str, ExcessReport]:
    generator = make_generator(cfg.name, cfg.generator)
    loss = cfg.loss.build()
    dataset = generator.generate(rngs.stream(cfg.seed, "train", run))
    erm = fit_erm(loss, dataset, cfg.optimizer)
    minima = per_context_min(loss, dataset, cfg.optimizer) if "robust" in cfg.methods else None
    reports = {}
    for method in cfg.methods:
        result = _fit_method(method, loss, dataset, cfg, erm, minima)
        reports[method] = excess_report(
            loss,
            result.theta,
            generator,
            cfg.m,
            cfg.seed,
            min_risks=min_risks,
            metric=cfg.metric,
            stream_keys=(run, METHOD_TAGS[method]),
        )
    return reports


def _run_guarded(cfg: ExperimentConfig, run: int, min_risks: np.ndarray):
    try:
        return run, _run_once(cfg, run, min_risks), None
    except ContextRobustError as e:
        logger.warning(f"Run {run} failed: {e}")
        return run, None, f"run {run}: {e}"


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """
    Repeat generate / fit / evaluate over cfg.runs training sets.

    Run r trains on stream (seed, "train", r) and evaluates method k on
    streams (seed, "eval", r, k, c); per-context minimum risks are estimated
    once. Results are keyed by run, so workers do not change them.
    """
    generator = make_generator(cfg.name, cfg.generator)
    loss = cfg.loss.build()
    logger.info(f"Experiment {cfg.name}: {cfg.runs} runs, methods {cfg.methods}, beta={cfg.beta}, m={cfg.m}")
    min_risks = context_min_risks(loss, generator, cfg.m, cfg.seed, cfg.optimizer, cfg.metric)

    if cfg.workers <= 1:
        outcomes = [_run_guarded(cfg, run, min_risks) for run in range(cfg.runs)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_guarded, [cfg] * cfg.runs, range(cfg.runs), [min_risks] * cfg.runs))
    outcomes.sort(key=lambda outcome: outcome[0])

    values = {method: {scenario: [] for scenario in SCENARIOS} for method in cfg.methods}
    records, failures = [], []
    for run, reports, failure in outcomes:
        if reports is None:
            failures.append(failure)
            continue
        for method in cfg.methods:
            for scenario, value in (("nominal", reports[method].nominal_excess), ("worst", reports[method].worst_case_excess)):
                values[method][scenario].append(value)
                records.append((run, method, scenario, value))

    succeeded = cfg.runs - len(failures)
    stats = {}
    if succeeded:
        stats = {
            method: {scenario: BoxStats.from_values(values[method][scenario]) for scenario in SCENARIOS}
            for method in cfg.methods
        }
        for method in cfg.methods:
            logger.info(
                f"{method}: median nominal {stats[method]['nominal'].median:.4g}, "
                f"median worst {stats[method]['worst'].median:.4g}"
            )
    summary = ExperimentSummary(
        name=cfg.name,
        stats=stats,
        values=values,
        runs=cfg.runs,
        succeeded=succeeded,
        failed=len(failures),
        failures=failures,
        min_risks=min_risks.tolist(),
        metric=cfg.metric,
        config=cfg.model_dump(mode="json"),
    )
    summary._records = records
    return summary


def risk_curves(
    loss: LossModel,
    dataset: Dataset,
    theta_grid: Iterable[float],
    betas: Sequence[float],
    rhats: Optional[Sequence[float]] = None,
    opts: Optional[OptimizerOptions] = None,
) -> pd.DataFrame:
    """
    Empirical per-context risks, excess risks and worst-case excess
    objectives along a grid of a one-dimensional parameter
    """
    if loss.num_params(dataset.d) != 1:
        raise DataError("risk curves need a one-parameter loss")
    if rhats is None:
        rhats = per_context_min(loss, dataset, opts).rhats
    rhats = np.asarray(rhats, dtype=float)
    parts = partition_by_context(dataset)
    phat = dataset.stats().phat
    radii = {beta: epsilon_bits(dataset.n, dataset.num_contexts, beta) for beta in betas}
    contexts = range(1, dataset.num_contexts + 1)

    rows = []
    for theta in theta_grid:
        values = np.array([float(theta)])
        risks = np.array([loss.mean_loss(values, part.features, part.responses) for part in parts.values()])
        deltas = risks - rhats
        row = {"theta": float(theta)}
        row.update({f"risk_{c}": risks[c - 1] for c in contexts})
        row.update({f"excess_{c}": deltas[c - 1] for c in contexts})
        row["erm_risk"] = float(np.dot(phat, risks))
        row["max_risk"] = float(risks.max())
        row["nominal_excess"] = float(np.dot(phat, deltas))
        profile = ExcessProfile.build(phat, deltas, rhats)
        for beta, eps in radii.items():
            lf = solve_least_favorable(profile, eps)
            row[f"worst_{beta:g}"] = lf.objective
            row.update({f"p_star_{beta:g}_{c}": lf.p_star[c - 1] for c in contexts})
        rows.append(row)
    return pd.DataFrame(rows)
