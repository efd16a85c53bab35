"""실험 앙상블 테스트: 판정 구조, 정확한 법칙과의 비교, 재현성."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING

import pytest
from scipy import stats

from src.bench.experiments import (
    EXPERIMENTS,
    draw_estimates,
    exact_upper_tail,
    expected_work,
    reference_variance,
    resolve_target,
    run_experiment,
)
from src.bench.stats import ks_critical_distance, weighted_slope
from src.core.config import VERSION
from src.core.exceptions import DomainError
from src.data.config_loader import load_experiment_config
from src.theory import rates
from src.utils.export import render_report

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.data.models import CheckResult, ExperimentConfig


_EXAMPLE_LDP = Path(__file__).resolve().parents[1] / "data" / "example_ldp.toml"


def _checks_named(checks: list[CheckResult], prefix: str) -> list[CheckResult]:
    return [c for c in checks if c.name.startswith(prefix)]


class TestResolveTarget:
    def test_from_probability(self, make_config: Callable[..., ExperimentConfig]) -> None:
        target = resolve_target(make_config(p=0.1))
        assert target.a == pytest.approx(-math.log(0.1))
        assert target.p == 0.1
        assert target.log_p == pytest.approx(math.log(0.1))

    def test_from_threshold(self, make_config: Callable[..., ExperimentConfig]) -> None:
        target = resolve_target(make_config(p=None, threshold=1.0))
        assert target.p == pytest.approx(math.exp(-1.0))
        assert target.a == 1.0

    def test_other_distribution(self, make_config: Callable[..., ExperimentConfig]) -> None:
        target = resolve_target(make_config(p=0.05), "pareto")
        assert target.dist.name == "pareto"
        assert target.dist.sf(target.a) == pytest.approx(0.05, rel=1e-9)

    def test_missing_target(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(kind="lognormal", p=None)
        with pytest.raises(DomainError):
            resolve_target(config)


class TestHelpers:
    def test_expected_work(self) -> None:
        assert expected_work("crude", 20, 0.1, 4) == 20.0
        assert expected_work("fixed", 20, 0.1, 4) == 80.0
        assert expected_work("ams", 20, 0.1, 4) == pytest.approx(20 * math.log(10.0))

    def test_reference_variance(self) -> None:
        assert reference_variance("crude", 0.1, 4) == pytest.approx(0.09)
        assert reference_variance("ams", 0.1, 4) == pytest.approx(-0.01 * math.log(0.1))
        assert reference_variance("fixed", 0.1, 4) == rates.fixed_level_variance(0.1, 4)

    def test_unknown_estimator(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config()
        with pytest.raises(DomainError):
            draw_estimates(config, "importance", 10, resolve_target(config), 1)

    def test_registry(self) -> None:
        assert set(EXPERIMENTS) == {
            "unbiasedness",
            "clt",
            "ldp-slope",
            "poisson-gof",
            "lognormal",
            "compare",
            "laplace-verify",
            "reduction",
        }


class TestUnbiasedness:
    @pytest.mark.parametrize("estimator", ["ams", "crude", "fixed"])
    def test_checks_pass(
        self, make_config: Callable[..., ExperimentConfig], estimator: str
    ) -> None:
        config = make_config(n_grid=[10, 20], k=1, p=0.3, estimator=estimator, levels=2)
        report = run_experiment(config)
        assert len(report.rows) == 2
        assert [row["n"] for row in report.rows] == [10, 20]
        assert report.passed is True

    def test_ams_row_fields(self, make_config: Callable[..., ExperimentConfig]) -> None:
        report = run_experiment(make_config(n_grid=[10], k=3, p=0.2))
        row = report.rows[0]
        assert row["k"] == 3
        assert row["levels"] is None
        assert row["expected_iterations"] == rates.expected_ams_iterations(10, 3, 0.2)
        assert row["mean_iterations"] > 0.0

    def test_fixed_row_counts_zero_stages(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        report = run_experiment(make_config(estimator="fixed", levels=2))
        assert "zero_stage_runs" in report.rows[0]
        assert report.rows[0]["k"] is None


class TestReproducibility:
    def test_same_bytes_for_any_worker_count(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        serial = run_experiment(make_config(n_grid=[10, 15], k=2, workers=1))
        parallel = run_experiment(make_config(n_grid=[10, 15], k=2, workers=2))
        assert render_report(serial, "csv") == render_report(parallel, "csv")

    def test_seed_changes_output(self, make_config: Callable[..., ExperimentConfig]) -> None:
        first = run_experiment(make_config(seed=1))
        second = run_experiment(make_config(seed=2))
        assert first.rows[0]["mean"] != second.rows[0]["mean"]


class TestClt:
    def test_fields(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(kind="clt", n_grid=[20], p=0.1, reps=400)
        report = run_experiment(config)
        row = report.rows[0]
        reference = -0.01 * math.log(0.1)
        assert row["reference_n_var"] == pytest.approx(reference)
        assert row["relative_error"] == pytest.approx(abs(row["n_var"] - reference) / reference)
        (check,) = report.checks
        assert check.name == "clt-variance[ams n=20]"
        assert check.tolerance == config.variance_tolerance


class TestLdpSlope:
    def test_crude_counts_follow_binomial(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        reps = 2000
        config = make_config(
            kind="ldp-slope", estimator="crude", n_grid=[10, 20], p=0.3, eps=0.15, reps=reps
        )
        report = run_experiment(config)
        # p̂ ≥ 0.45 ⟺ Bin(n, 0.3) ≥ c
        smallest_count = {10: 5, 20: 9}
        for row in report.rows:
            n = row["n"]
            q = stats.binom.sf(smallest_count[n] - 1, n, 0.3)
            assert abs(row["upper_count"] - reps * q) < 4 * math.sqrt(reps * q * (1 - q))
            assert row["q_upper"] <= math.exp(-n * row["reference_upper"])
            assert row["reference_upper"] == pytest.approx(rates.rate_crude(0.45, 0.3))
            assert row["q_upper_low"] <= row["q_upper"] <= row["q_upper_high"]
            assert row["q_upper_exact"] == pytest.approx(q, rel=1e-10)

    def test_ams_counts_follow_poisson(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        reps = 2000
        config = make_config(kind="ldp-slope", n_grid=[10, 20], k=1, p=0.3, eps=0.15, reps=reps)
        report = run_experiment(config)
        # k = 1: p̂ = (1 − 1/n)^J, J ~ Poisson(−n log p)
        largest_iterations = {10: 7, 20: 15}
        for row in report.rows:
            n = row["n"]
            q = stats.poisson.cdf(largest_iterations[n], -n * math.log(0.3))
            assert abs(row["upper_count"] - reps * q) < 4 * math.sqrt(reps * q * (1 - q))
            assert row["reference_upper"] == pytest.approx(rates.rate_I(0.45, 0.3))
            assert not row["flagged"]
            assert "fitted_slope" in row
            assert row["q_upper_exact"] == pytest.approx(q, rel=1e-10)

        (check,) = _checks_named(report.checks, "ldp-slope[")
        assert check.name == "ldp-slope[ams upper]"
        assert check.reference == pytest.approx(rates.rate_I(0.45, 0.3))
        assert check.observed == report.rows[0]["fitted_slope"]
        (exact,) = _checks_named(report.checks, "ldp-slope-exact")
        assert exact.reference == report.rows[0]["exact_slope"]
        assert exact.observed == check.observed

    @pytest.mark.parametrize(("estimator", "reference"), [("ams", 0.1281), ("crude", 0.0872)])
    def test_short_grid_exact_slope_misses_rate(
        self, make_config: Callable[..., ExperimentConfig], estimator: str, reference: float
    ) -> None:
        grid = [8, 16, 24, 32, 40]
        config = make_config(
            kind="ldp-slope", estimator=estimator, n_grid=grid, k=1, p=0.3, eps=0.2, reps=10**6
        )
        target = resolve_target(config)
        tails = [exact_upper_tail(config, n, target) for n in grid]
        assert all(tail is not None and 0.0 < tail < 1.0 for tail in tails)
        fit = weighted_slope(grid, [tail * config.reps for tail in tails], config.reps)
        assert fit.slope > reference * (1.0 + config.slope_tolerance)

    def test_no_exact_law_for_fixed_levels(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(kind="ldp-slope", estimator="fixed", p=0.3, eps=0.2)
        assert exact_upper_tail(config, 10, resolve_target(config)) is None
        config = make_config(kind="ldp-slope", k=2, p=0.3, eps=0.2)
        assert exact_upper_tail(config, 10, resolve_target(config)) is None

    def test_fixed_reference_is_upper_bound(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(
            kind="ldp-slope", estimator="fixed", levels=3, n_grid=[10, 20], p=0.3, eps=0.15
        )
        report = run_experiment(config)
        expected = rates.fixed_upper_bound(0.45, 0.3, 3)
        assert report.rows[0]["reference_upper"] == pytest.approx(expected)

    def test_empty_cells_are_flagged(
        self, make_config: Callable[..., ExperimentConfig], caplog: pytest.LogCaptureFixture
    ) -> None:
        config = make_config(
            kind="ldp-slope", estimator="crude", n_grid=[100, 200], p=0.3, eps=0.4
        )
        with caplog.at_level(logging.WARNING):
            report = run_experiment(config)
        assert all(row["flagged"] for row in report.rows)
        assert all(row["rate_upper"] == math.inf for row in report.rows)
        (check,) = report.checks
        assert not check.passed
        assert check.observed is None
        assert report.passed is False
        assert "회귀에서 제외" in caplog.text


@pytest.mark.slow
class TestLdpSlopeAcceptance:
    def test_ams_example_grid_passes(self) -> None:
        config = load_experiment_config(_EXAMPLE_LDP)
        report = run_experiment(config)
        (check,) = _checks_named(report.checks, "ldp-slope[ams")
        (exact,) = _checks_named(report.checks, "ldp-slope-exact[ams")
        assert check.passed, check.detail
        assert exact.passed
        assert not any(row["flagged"] for row in report.rows)

    def test_crude_longer_grid_passes(self) -> None:
        overrides = {"estimator": "crude", "n_grid": [40, 60, 80], "reps": 2_000_000}
        config = load_experiment_config(_EXAMPLE_LDP, overrides)
        report = run_experiment(config)
        (check,) = _checks_named(report.checks, "ldp-slope[crude")
        (exact,) = _checks_named(report.checks, "ldp-slope-exact[crude")
        assert check.reference == pytest.approx(rates.rate_crude(0.5, 0.3))
        assert check.passed, check.detail
        assert exact.passed


class TestPoissonGof:
    def test_exact_engine_accepts_poisson_law(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(
            kind="poisson-gof", n_grid=[50], p=math.exp(-1.0), reps=3000, engine="exact"
        )
        report = run_experiment(config)
        row = report.rows[0]
        assert row["expected_mean"] == pytest.approx(50.0)
        assert row["bins"] > 5
        assert {c.name for c in report.checks} == {"poisson-gof[n=50]", "poisson-mean[n=50]"}
        assert report.passed is True

    def test_poisson_engine_warns(
        self, make_config: Callable[..., ExperimentConfig], caplog: pytest.LogCaptureFixture
    ) -> None:
        config = make_config(kind="poisson-gof", n_grid=[20], p=0.2, reps=300, engine="poisson")
        with caplog.at_level(logging.WARNING):
            run_experiment(config)
        assert "자명하게" in caplog.text


class TestLognormal:
    def test_ratio_law(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="lognormal",
            p=None,
            n_grid=[10, 40],
            sigma=0.5,
            reps=5000,
            ks_max_distance=0.06,
        )
        report = run_experiment(config)
        assert [row["log_p"] for row in report.rows] == [-2.5, -10.0]
        assert report.rows[0]["tail_reference"] == report.rows[1]["tail_reference"]
        names = {c.name for c in report.checks}
        assert {"lognormal-ks-final", "lognormal-ks-trend"} <= names
        assert report.passed is True

    @pytest.mark.slow
    def test_full_grid(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="lognormal",
            p=None,
            n_grid=[100, 400, 1600],
            sigma=0.5,
            reps=100_000,
            ks_max_distance=0.02,
            chunk_size=10_000,
        )
        report = run_experiment(config)
        distances = [row["ks_distance"] for row in report.rows]
        assert distances[-1] < 0.02
        (final,) = _checks_named(report.checks, "lognormal-ks-final")
        (trend,) = _checks_named(report.checks, "lognormal-ks-trend")
        assert final.passed
        assert trend.passed


class TestCompare:
    def test_three_estimators_per_cell(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(kind="compare", n_grid=[20], p=0.1, eps=0.05, levels=2, reps=400)
        report = run_experiment(config)
        assert [row["estimator"] for row in report.rows] == ["ams", "crude", "fixed"]
        works = [row["expected_work"] for row in report.rows]
        assert works == pytest.approx([20 * math.log(10.0), 20.0, 40.0])
        ratios = {row["tail_ratio_ams_crude"] for row in report.rows}
        assert len(ratios) == 1
        counts = {row["estimator"]: row["upper_count"] + row["lower_count"] for row in report.rows}
        if counts["crude"] > 0:
            assert ratios.pop() == pytest.approx(counts["ams"] / counts["crude"])
        assert len(_checks_named(report.checks, "compare-variance")) == 3
        (dominance,) = _checks_named(report.checks, "compare-dominance")
        assert dominance.observed == counts["ams"]
        assert dominance.reference == counts["crude"]

    def test_dominance_only_from_sixteen(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(kind="compare", n_grid=[8, 16], p=0.1, eps=0.1, levels=2, reps=400)
        report = run_experiment(config)
        dominance = _checks_named(report.checks, "compare-dominance")
        assert [c.name for c in dominance] == ["compare-dominance[n=16]"]

        (trend,) = _checks_named(report.checks, "compare-tail-ratio")
        ratios = [row["tail_ratio_ams_crude"] for row in report.rows if row["estimator"] == "ams"]
        assert trend.reference == ratios[0]
        assert trend.observed == ratios[1]
        assert trend.passed == (ratios[1] < ratios[0])

    def test_single_cell_has_no_trend(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(kind="compare", n_grid=[20], p=0.1, eps=0.1, levels=2, reps=200)
        assert _checks_named(run_experiment(config).checks, "compare-tail-ratio") == []

    @pytest.mark.slow
    def test_tail_ratio_decreases(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="compare",
            n_grid=[16, 32, 64],
            p=0.1,
            eps=0.1,
            levels=4,
            reps=20_000,
            engine="renewal",
            chunk_size=5000,
        )
        report = run_experiment(config)
        dominance = _checks_named(report.checks, "compare-dominance")
        assert len(dominance) == 3
        assert all(c.passed for c in dominance)
        (trend,) = _checks_named(report.checks, "compare-tail-ratio")
        assert trend.passed, trend.detail


class TestLaplaceVerify:
    def test_k_one_routes_agree(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="laplace-verify", n_grid=[20, 40], k=1, p=0.2, lambda_grid=[0.5], reps=2000
        )
        report = run_experiment(config)
        assert len(report.rows) == 2
        for prefix in ("laplace-residual", "laplace-closed-vs-ode", "laplace-mc-band"):
            checks = _checks_named(report.checks, prefix)
            assert len(checks) == 2
            assert all(c.passed for c in checks)
        assert len(_checks_named(report.checks, "log-laplace-limit")) == 1
        for row in report.rows:
            assert row["route_difference"] < 1e-10
            assert row["log_laplace_limit"] == pytest.approx(rates.log_laplace_limit(0.5, 0.2))

    def test_k_two_grid(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="laplace-verify", n_grid=[20, 30], k=2, p=0.2, lambda_grid=[0.5, -0.5], reps=500
        )
        report = run_experiment(config)
        assert [row["lambda"] for row in report.rows] == [0.5, 0.5, -0.5, -0.5]
        assert all(c.passed for c in _checks_named(report.checks, "laplace-residual"))
        assert len(_checks_named(report.checks, "laplace-principal-root")) == 2
        assert len(_checks_named(report.checks, "root-limit")) == 1
        assert len(_checks_named(report.checks, "coefficient-limit")) == 1
        negative = [row for row in report.rows if row["lambda"] < 0.0]
        assert all("gamma_mc" not in row for row in negative)
        assert all("gamma_closed" not in row for row in report.rows)


class TestReduction:
    def test_pareto_matches_exponential(
        self, make_config: Callable[..., ExperimentConfig]
    ) -> None:
        config = make_config(
            kind="reduction", dist="pareto", n_grid=[20], k=2, p=0.1, reps=2000
        )
        report = run_experiment(config)
        row = report.rows[0]
        assert row["dist"] == "pareto"
        assert row["reference_dist"] == "exponential"
        assert row["reference_a"] == pytest.approx(-math.log(0.1))
        assert report.passed is True

    @pytest.mark.slow
    def test_full_scale(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(
            kind="reduction",
            dist="pareto",
            n_grid=[50],
            k=5,
            p=0.1,
            reps=100_000,
            engine="exact",
            workers=4,
            chunk_size=10_000,
        )
        report = run_experiment(config)
        (check,) = _checks_named(report.checks, "reduction-ks")
        assert check.passed, check.detail
        assert report.rows[0]["ks_statistic"] < ks_critical_distance(config.reps // 2, 0.001)


class TestRunExperiment:
    def test_metadata(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(seed=99)
        report = run_experiment(config)
        assert report.kind == "unbiasedness"
        assert report.metadata.seed == 99
        assert report.metadata.version == VERSION
        assert report.metadata.workers == 1
        assert report.metadata.wall_clock_seconds >= 0.0
        assert report.metadata.config["kind"] == "unbiasedness"

    def test_failed_checks_logged(
        self, make_config: Callable[..., ExperimentConfig], caplog: pytest.LogCaptureFixture
    ) -> None:
        config = make_config(kind="clt", n_grid=[10], reps=200, variance_tolerance=1e-9)
        with caplog.at_level(logging.WARNING):
            report = run_experiment(config)
        assert report.passed is False
        assert report.failed_checks[0].name.startswith("clt-variance")
        assert "판정 실패" in caplog.text
