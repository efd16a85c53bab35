"""분포, 조건부 표본, 순서통계량 테스트."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.core.exceptions import DomainError
from src.data.models import OrderStatisticLaw
from src.sim.dist import (
    AVAILABLE_DISTRIBUTIONS,
    ConditionalLaw,
    Exponential,
    ShiftedPareto,
    conditional_cdf,
    conditional_sample,
    get_distribution,
    order_stat_cdf,
    order_stat_pdf,
)


class TestExponential:
    def test_survival_and_inverse(self, exponential: Exponential) -> None:
        assert exponential.sf(2.0) == pytest.approx(math.exp(-2.0))
        assert exponential.cdf(0.0) == 0.0
        assert exponential.inverse_sf(math.exp(-3.0)) == pytest.approx(3.0)
        assert exponential.inverse_cdf(0.5) == pytest.approx(math.log(2.0))

    def test_conditional_probability_memoryless(self, exponential: Exponential) -> None:
        assert exponential.conditional_probability(1.0, 3.5) == pytest.approx(math.exp(-2.5))
        assert exponential.conditional_probability(2.0, 1.0) == 1.0

    def test_sample_above_mean(self, exponential: Exponential, rng: np.random.Generator) -> None:
        draws = exponential.sample_above(2.0, rng, 20_000)
        assert np.all(draws > 2.0)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 3.0) < 4 * se

    def test_inverse_cdf_domain(self, exponential: Exponential) -> None:
        with pytest.raises(DomainError):
            exponential.inverse_cdf(1.0)


class TestShiftedPareto:
    def test_tail(self, pareto: ShiftedPareto) -> None:
        assert pareto.sf(1.0) == pytest.approx(0.25)
        assert pareto.cdf(0.0) == 0.0
        assert pareto.inverse_sf(0.25) == pytest.approx(1.0)

    def test_log_scale_inverse(self, pareto: ShiftedPareto) -> None:
        y = pareto.inverse_log_sf(math.log(0.01))
        assert pareto.sf(y) == pytest.approx(0.01)

    def test_rejects_non_positive_index(self) -> None:
        with pytest.raises(DomainError):
            ShiftedPareto(0.0)

    def test_sample_above_law(self, pareto: ShiftedPareto, rng: np.random.Generator) -> None:
        draws = pareto.sample_above(1.0, rng, 5000)
        assert np.all(draws > 1.0)
        # P(X > 3 | X > 1) = (4/2)^{-2}
        frequency = float(np.mean(draws > 3.0))
        se = math.sqrt(0.25 * 0.75 / draws.size)
        assert abs(frequency - 0.25) < 4 * se


class TestScipyLaws:
    @pytest.mark.parametrize("name", ["gamma2", "weibull"])
    def test_bisection_inverse(self, name: str) -> None:
        dist = get_distribution(name)
        y = dist.inverse_sf(0.3)
        assert dist.sf(y) == pytest.approx(0.3, rel=1e-9)

    def test_inverse_of_one_is_zero(self) -> None:
        assert get_distribution("gamma2").inverse_sf(1.0) == 0.0


class TestGetDistribution:
    def test_all_names_resolve(self) -> None:
        for name in AVAILABLE_DISTRIBUTIONS:
            assert get_distribution(name).name == name

    def test_aliases(self) -> None:
        assert isinstance(get_distribution("Exp"), Exponential)
        assert isinstance(get_distribution("shifted-pareto"), ShiftedPareto)

    def test_unknown(self) -> None:
        with pytest.raises(DomainError, match="알 수 없는 분포"):
            get_distribution("cauchy")


class TestConditionalSample:
    def test_exponential_closed_form(self, exponential: Exponential) -> None:
        law = ConditionalLaw(exponential, 1.5)
        assert conditional_sample(law, 0.4) == pytest.approx(1.5 - math.log1p(-0.4))

    def test_inverts_conditional_cdf(self, pareto: ShiftedPareto) -> None:
        law = ConditionalLaw(pareto, 2.0)
        for u in (0.01, 0.3, 0.77, 0.999):
            assert conditional_cdf(law, conditional_sample(law, u)) == pytest.approx(u)

    def test_strictly_above_floor_on_rounding_tie(self, exponential: Exponential) -> None:
        law = ConditionalLaw(exponential, 1e20)
        y = conditional_sample(law, 1e-10)
        assert y > 1e20
        assert y == math.nextafter(1e20, math.inf)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.2])
    def test_rejects_u_outside_open_interval(self, exponential: Exponential, u: float) -> None:
        with pytest.raises(DomainError):
            conditional_sample(ConditionalLaw(exponential, 0.0), u)

    def test_floor_beyond_support(self, exponential: Exponential) -> None:
        with pytest.raises(DomainError):
            ConditionalLaw(exponential, 1000.0)


class TestConditionalCdf:
    def test_below_floor_is_zero(self, pareto: ShiftedPareto) -> None:
        assert conditional_cdf(ConditionalLaw(pareto, 1.0), 0.5) == 0.0

    def test_infinity_is_one(self, pareto: ShiftedPareto) -> None:
        assert conditional_cdf(ConditionalLaw(pareto, 1.0), math.inf) == 1.0

    def test_exponential(self, exponential: Exponential) -> None:
        law = ConditionalLaw(exponential, 2.0)
        assert conditional_cdf(law, 3.0) == pytest.approx(1.0 - math.exp(-1.0))


class TestOrderStatistics:
    def test_pdf_integrates_to_one(self) -> None:
        law = OrderStatisticLaw(n=12, k=3, floor=0.5)
        total, _ = integrate.quad(lambda y: order_stat_pdf(law, y), 0.5, 40.0)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_cdf_matches_binomial_tail(self) -> None:
        law = OrderStatisticLaw(n=9, k=4, floor=0.0)
        y = 0.3
        expected = stats.binom.sf(law.k - 1, law.n, 1.0 - math.exp(-y))
        assert order_stat_cdf(law, y) == pytest.approx(expected, rel=1e-12)

    def test_pdf_is_cdf_derivative(self) -> None:
        law = OrderStatisticLaw(n=7, k=2, floor=1.0)
        h = 1e-6
        derivative = (order_stat_cdf(law, 1.4 + h) - order_stat_cdf(law, 1.4 - h)) / (2 * h)
        assert derivative == pytest.approx(order_stat_pdf(law, 1.4), rel=1e-6)

    def test_rank_zero_is_indicator(self) -> None:
        law = OrderStatisticLaw(n=5, k=0, floor=1.0)
        values = order_stat_cdf(law, np.array([0.5, 1.0, 2.0]))
        np.testing.assert_array_equal(values, [0.0, 1.0, 1.0])

    def test_below_floor(self) -> None:
        law = OrderStatisticLaw(n=5, k=2, floor=1.0)
        assert order_stat_pdf(law, 0.9) == 0.0
        assert order_stat_cdf(law, 0.9) == 0.0

    def test_minimum_is_exponential_rate_n(self) -> None:
        law = OrderStatisticLaw(n=6, k=1, floor=0.0)
        assert order_stat_cdf(law, 0.2) == pytest.approx(1.0 - math.exp(-1.2))

    def test_pdf_rejects_rank_zero(self) -> None:
        with pytest.raises(DomainError):
            order_stat_pdf(OrderStatisticLaw(n=5, k=0), 1.0)
