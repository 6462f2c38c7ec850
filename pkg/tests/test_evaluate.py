"""
Tests for Monte Carlo evaluation, the experiment harness and risk curves
"""
import math

import numpy as np
import pytest

from context_robust.evaluate import (
    BoxStats,
    excess_report,
    mc_context_min_risk,
    mc_context_risk,
    risk_curves,
    run_experiment,
)
from context_robust.losses import NewsvendorLoss
from context_robust.optimize import fit_robust, per_context_min
from context_robust.settings import ExperimentConfig
from context_robust.synthetic import ContextGenerator, StockGenConfig, make_generator
from context_robust.utils import rng as rngs


class ConstantDemand(ContextGenerator):
    """One context with fixed cost and demand"""

    name = "constant"

    def __init__(self, x0: float, y0: float):
        super().__init__(StockGenConfig(num_contexts=1, p1=1.0, n=10))
        self.x0, self.y0 = x0, y0

    @property
    def probs(self):
        return np.array([1.0])

    def sample_context(self, c, m, rng):
        return np.full((m, 1), self.x0), np.full(m, self.y0)


def _small_experiment(**updates):
    values = {
        "name": "stock",
        "runs": 2,
        "m": 2000,
        "seed": 3,
        "generator": {"n": 200},
        "optimizer": {"max_iters": 400, "patience": 100},
        "group_dro": {"iterations": 300},
    }
    values.update(updates)
    return ExperimentConfig(**values)


class TestMonteCarloRisk:
    """Risks under the generator laws"""

    def test_zero_stock(self):
        """Test that zero stock has zero risk"""
        generator = make_generator("stock")
        assert mc_context_risk(NewsvendorLoss(), [0.0], generator, 3, 5000, seed=1) == 0.0

    def test_deterministic(self):
        """Test that the same seed gives the same value"""
        generator = make_generator("two-context")
        first = mc_context_risk(NewsvendorLoss(), [20.0], generator, 2, 3000, seed=8)
        second = mc_context_risk(NewsvendorLoss(), [20.0], generator, 2, 3000, seed=8)
        assert first == second

    def test_self_consistency(self):
        """Test agreement with a ten times larger evaluation"""
        loss = NewsvendorLoss()
        generator = make_generator("two-context")
        m = 5000
        X, y = generator.sample_context(1, m, rngs.stream(2, "eval", 1))
        sd = loss.pointwise_loss(np.array([18.0]), X, y).std()

        small = mc_context_risk(loss, [18.0], generator, 1, m, seed=2)
        large = mc_context_risk(loss, [18.0], generator, 1, 10 * m, seed=99)
        assert abs(small - large) <= 3 * sd / math.sqrt(m) + 3 * sd / math.sqrt(10 * m)

    def test_constant_demand_minimum(self):
        """Test that deterministic demand gives the minimum y0 x0 - r y0"""
        generator = ConstantDemand(x0=2.0, y0=7.0)
        value = mc_context_min_risk(NewsvendorLoss(r=10.0), generator, 1, 100, seed=0)
        assert value == pytest.approx(7.0 * 2.0 - 10.0 * 7.0)

    def test_min_risk_stable_in_m(self):
        """Test that doubling m moves the minimum risk by little"""
        loss = NewsvendorLoss()
        generator = make_generator("stock")
        a = mc_context_min_risk(loss, generator, 2, 20_000, seed=4)
        b = mc_context_min_risk(loss, generator, 2, 40_000, seed=4)
        assert abs(a - b) <= 0.02 * abs(a)


class TestExcessReport:
    """Per-context and summary excess risks"""

    def test_worst_dominates_nominal(self):
        """Test worst >= nominal and the summary definitions"""
        generator = make_generator("stock", {"num_contexts": 3})
        report = excess_report(NewsvendorLoss(), [20.0], generator, 3000, seed=5)

        excess = np.array(report.per_context_excess)
        assert excess == pytest.approx(np.array(report.per_context_risk) - np.array(report.per_context_min_risk))
        assert report.worst_case_excess == excess.max()
        assert report.nominal_excess == pytest.approx(float(np.dot(generator.probs, excess)))
        assert report.worst_case_excess >= report.nominal_excess

    def test_single_context(self):
        """Test that one context gives nominal = worst"""
        generator = ConstantDemand(x0=1.0, y0=5.0)
        report = excess_report(NewsvendorLoss(), [3.0], generator, 200, seed=0)
        assert report.nominal_excess == report.worst_case_excess
        assert report.worst_case_excess == pytest.approx(3.0 - 10.0 * 3.0 - (5.0 - 50.0))

    def test_context_optimum_has_small_excess(self):
        """Test that a context's own optimum has near-zero excess there"""
        loss = NewsvendorLoss()
        generator = make_generator("two-context")
        X, y = generator.sample_context(1, 50_000, np.random.default_rng(0))
        theta, _ = loss.context_min(X, y)
        report = excess_report(loss, theta, generator, 50_000, seed=6)
        assert abs(report.per_context_excess[0]) <= 0.01 * abs(report.per_context_min_risk[0])

    def test_identical_parameters_identical_reports(self):
        """Test determinism for equal parameters"""
        generator = make_generator("stock", {"num_contexts": 2, "p1": 0.5})
        min_risks = [-50.0, -60.0]
        first = excess_report(NewsvendorLoss(), [10.0], generator, 1000, 7, min_risks=min_risks, stream_keys=(0, 1))
        second = excess_report(NewsvendorLoss(), [10.0], generator, 1000, 7, min_risks=min_risks, stream_keys=(0, 1))
        assert first == second


def test_box_stats_ordered():
    """Test min <= q1 <= median <= q3 <= max"""
    stats = BoxStats.from_values([5.0, 1.0, 3.0, 2.0, 4.0])
    assert stats.min <= stats.q1 <= stats.median <= stats.q3 <= stats.max
    assert stats.median == 3.0
    single = BoxStats.from_values([2.5])
    assert single.min == single.median == single.max == 2.5


class TestExperiment:
    """Monte Carlo harness"""

    def test_rows_and_counts(self):
        """Test one row per run, method and scenario"""
        summary = run_experiment(_small_experiment())
        rows = summary.rows()

        assert summary.succeeded == 2
        assert summary.failed == 0
        assert len(rows) == 2 * 3 * 2
        assert list(rows.columns) == ["run", "method", "scenario", "excess"]
        for method in ("erm", "minimax", "robust"):
            for scenario in ("nominal", "worst"):
                stats = summary.stats[method][scenario]
                assert stats.min <= stats.q1 <= stats.median <= stats.q3 <= stats.max

    def test_worst_dominates_nominal(self):
        """Test worst >= nominal in every run"""
        summary = run_experiment(_small_experiment(runs=1))
        for method, values in summary.values.items():
            assert values["worst"][0] >= values["nominal"][0]
            assert summary.stats[method]["worst"].min == summary.stats[method]["worst"].max

    def test_method_order_irrelevant(self):
        """Test that permuting the methods leaves each method's numbers unchanged"""
        forward = run_experiment(_small_experiment(methods=["erm", "robust"]))
        backward = run_experiment(_small_experiment(methods=["robust", "erm"]))
        assert forward.values["erm"] == backward.values["erm"]
        assert forward.values["robust"] == backward.values["robust"]

    def test_workers_match_serial(self):
        """Test that parallel runs reproduce serial results"""
        serial = run_experiment(_small_experiment(methods=["erm"]))
        parallel = run_experiment(_small_experiment(methods=["erm"], workers=2))
        assert serial.values == parallel.values

    def test_classify_uses_error_metric(self):
        """Test that the classification experiment reports error rates"""
        cfg = ExperimentConfig(
            name="classify",
            runs=1,
            m=2000,
            methods=["erm"],
            generator={"n": 300},
            optimizer={"max_iters": 300},
        )
        summary = run_experiment(cfg)
        assert summary.metric == "error"
        assert all(-0.1 <= v <= 1.0 for v in summary.values["erm"]["worst"])

    def test_stock_defaults_converge(self):
        """Test that robust fits under the stock defaults stop converged well below the iteration cap"""
        cfg = ExperimentConfig(name="stock")
        loss = cfg.loss.build()
        generator = make_generator(cfg.name, cfg.generator)
        for run in range(3):
            dataset = generator.generate(rngs.stream(cfg.seed, "train", run))
            robust = fit_robust(loss, dataset, cfg.beta, cfg.optimizer)
            assert robust.converged, robust.stop_reason
            assert robust.iterations <= cfg.optimizer.max_iters // 10

    def test_duplicate_methods_rejected(self):
        """Test that methods must be distinct"""
        with pytest.raises(ValueError):
            _small_experiment(methods=["erm", "erm"])


def test_risk_curves(newsvendor, small_stock_dataset):
    """Test curve columns and the beta = 1 worst case"""
    table = risk_curves(newsvendor, small_stock_dataset, np.linspace(0.0, 10.0, 11), [0.9, 1.0])

    assert len(table) == 11
    for column in ("theta", "risk_1", "risk_2", "excess_1", "excess_2", "erm_risk", "max_risk", "worst_0.9", "worst_1"):
        assert column in table.columns
    excess = table[["excess_1", "excess_2"]].to_numpy()
    assert table["worst_1"].to_numpy() == pytest.approx(excess.max(axis=1))
    assert np.all(table["worst_0.9"].to_numpy() <= table["worst_1"].to_numpy() + 1e-12)
    assert np.all(table["worst_0.9"].to_numpy() >= table["nominal_excess"].to_numpy() - 1e-12)


def test_risk_curves_zero_excess_at_minimizers(newsvendor, small_stock_dataset):
    """Test that each context's excess vanishes at its own minimizer"""
    minima = per_context_min(newsvendor, small_stock_dataset)
    grid = [float(t[0]) for t in minima.thetas]
    table = risk_curves(newsvendor, small_stock_dataset, grid, [0.9], rhats=minima.rhats)
    assert table["excess_1"].iloc[0] == pytest.approx(0.0, abs=1e-12)
    assert table["excess_2"].iloc[1] == pytest.approx(0.0, abs=1e-12)
