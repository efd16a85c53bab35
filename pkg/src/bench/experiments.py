"""시드 고정 실험 앙상블.

각 실험 함수는 ExperimentConfig를 받아 (행 목록, 판정 목록)을 만들고,
`run_experiment`가 메타데이터를 붙여 ExperimentReport로 감싼다.
셀 i의 반복 스트림은 cell_seed(config.seed, i)에서 나오므로 결과는 작업자 수와 무관하다.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass
from datetime import datetime
from itertools import pairwise
from typing import TYPE_CHECKING, Any

import numpy as np

from src.bench.stats import (
    binomial_mass,
    ks_critical_distance,
    ks_lognormal,
    lognormal_law,
    mean_se,
    poisson_chi_square,
    poisson_mass,
    two_sample_ks,
    weighted_slope,
    wilson_interval,
)
from src.core.config import VERSION
from src.core.exceptions import DomainError
from src.core.streams import cell_seed
from src.data.models import (
    AmsConfig,
    CheckResult,
    ExperimentConfig,
    ExperimentReport,
    ReportMetadata,
)
from src.sim.baselines import optimal_levels, replicate_crude, replicate_fixed
from src.sim.dist import DistributionSpec, get_distribution
from src.sim.splitting import estimate_from_counts, replicate_ams, resolve_engine
from src.theory import laplace, rates

if TYPE_CHECKING:
    from src.bench.stats import SlopeFit

logger = logging.getLogger(__name__)

Rows = list[dict[str, Any]]
Checks = list[CheckResult]

_ESTIMATOR_SLOT = {"ams": 0, "crude": 1, "fixed": 2}
_SLOTS_PER_CELL = 8

# 이보다 작은 n에서는 편차 횟수 우위를 판정하지 않는다
_DOMINANCE_MIN_N = 16


@dataclass(frozen=True)
class Target:
    """분포, 임계값 a, 목표 확률 p = P(X > a)."""

    dist: DistributionSpec
    a: float
    p: float

    @property
    def log_p(self) -> float:
        return self.dist.log_sf(self.a)


def resolve_target(config: ExperimentConfig, dist_name: str | None = None) -> Target:
    dist = get_distribution(dist_name or config.dist)
    if config.threshold is not None:
        a = config.threshold
        p = dist.sf(a)
        if not 0.0 < p < 1.0:
            raise DomainError(f"{dist.name}: P(X > {a}) = {p}가 (0,1) 밖입니다")
        return Target(dist, a, p)
    if config.p is None:
        raise DomainError(f"{config.kind} 실험에는 p 또는 threshold가 필요합니다")
    return Target(dist, dist.inverse_log_sf(math.log(config.p)), config.p)


@dataclass(frozen=True)
class EstimatorSample:
    """추정기 하나의 M회 실행 결과."""

    estimator: str
    estimates: np.ndarray
    iterations: np.ndarray | None = None
    zero_stage_runs: int | None = None


def _ams_engine(config: ExperimentConfig) -> str:
    return resolve_engine(config.engine, prefer_poisson=config.kind == "lognormal")


def draw_estimates(
    config: ExperimentConfig, estimator: str, n: int, target: Target, seed: int
) -> EstimatorSample:
    if estimator == "ams":
        ensemble = replicate_ams(
            AmsConfig(n=n, k=config.k, a=target.a),
            target.dist,
            config.reps,
            seed,
            engine=_ams_engine(config),
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        return EstimatorSample("ams", ensemble.estimates, iterations=ensemble.iterations)
    if estimator == "crude":
        values = replicate_crude(
            n,
            target.dist,
            target.a,
            config.reps,
            seed,
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        return EstimatorSample("crude", values)
    if estimator == "fixed":
        plan = optimal_levels(target.dist, target.a, config.levels)
        values, zero = replicate_fixed(
            n,
            plan,
            target.dist,
            config.reps,
            seed,
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        return EstimatorSample("fixed", values, zero_stage_runs=int(zero.sum()))
    raise DomainError(f"알 수 없는 추정기: {estimator!r}")


def expected_work(estimator: str, n: int, p: float, levels: int) -> float:
    """표본 추출 횟수 기준 기대 작업량: 단순 MC n, AMS −n log p, 고정 수준 N·n."""
    if estimator == "crude":
        return float(n)
    if estimator == "fixed":
        return float(levels * n)
    return -n * math.log(p)


def reference_variance(estimator: str, p: float, levels: int) -> float:
    if estimator == "crude":
        return rates.crude_variance(p)
    if estimator == "fixed":
        return rates.fixed_level_variance(p, levels)
    return rates.ams_asymptotic_variance(p)


def _seed(config: ExperimentConfig, cell: int, estimator: str = "ams") -> int:
    return cell_seed(config.seed, cell * _SLOTS_PER_CELL + _ESTIMATOR_SLOT[estimator])


def _relative_error(observed: float, reference: float) -> float:
    return abs(observed - reference) / abs(reference)


# ---------------------------------------------------------------------------
# 불편성 / CLT
# ---------------------------------------------------------------------------


def _ensemble_row(
    config: ExperimentConfig, sample: EstimatorSample, n: int, target: Target
) -> dict[str, Any]:
    summary = mean_se(sample.estimates)
    if summary.se > 0.0:
        z = (summary.mean - target.p) / summary.se
    else:
        z = 0.0 if summary.mean == target.p else math.inf
    row: dict[str, Any] = {
        "estimator": sample.estimator,
        "dist": target.dist.name,
        "n": n,
        "k": config.k if sample.estimator == "ams" else None,
        "levels": config.levels if sample.estimator == "fixed" else None,
        "p": target.p,
        "a": target.a,
        "reps": config.reps,
        "mean": summary.mean,
        "se": summary.se,
        "z": z,
        "n_var": n * summary.variance,
        "expected_work": expected_work(sample.estimator, n, target.p, config.levels),
    }
    if sample.iterations is not None:
        row["mean_iterations"] = float(sample.iterations.mean())
        row["expected_iterations"] = rates.expected_ams_iterations(n, config.k, target.p)
    if sample.zero_stage_runs is not None:
        row["zero_stage_runs"] = sample.zero_stage_runs
    return row


def _unbiased_check(config: ExperimentConfig, row: dict[str, Any]) -> CheckResult:
    return CheckResult(
        name=f"unbiased[{row['estimator']} n={row['n']}]",
        passed=abs(row["z"]) < config.se_multiplier,
        observed=row["mean"],
        reference=row["p"],
        tolerance=config.se_multiplier * row["se"],
        detail=f"z = {row['z']:.3f}",
    )


def unbiasedness_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """n 격자의 각 셀에서 |mean(p̂) − p| < 배수·SE 판정."""
    target = resolve_target(config)
    rows: Rows = []
    checks: Checks = []
    for cell, n in enumerate(config.n_grid):
        logger.debug("불편성 셀 %d: n=%d 추정기=%s", cell, n, config.estimator)
        sample = draw_estimates(config, config.estimator, n, target, _seed(config, cell))
        row = _ensemble_row(config, sample, n, target)
        rows.append(row)
        checks.append(_unbiased_check(config, row))
    return rows, checks


def clt_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """n·Var(p̂)를 점근 분산과 비교."""
    target = resolve_target(config)
    rows: Rows = []
    checks: Checks = []
    for cell, n in enumerate(config.n_grid):
        sample = draw_estimates(config, config.estimator, n, target, _seed(config, cell))
        row = _ensemble_row(config, sample, n, target)
        reference = reference_variance(config.estimator, target.p, config.levels)
        row["reference_n_var"] = reference
        row["relative_error"] = _relative_error(row["n_var"], reference)
        rows.append(row)
        checks.append(
            CheckResult(
                name=f"clt-variance[{config.estimator} n={n}]",
                passed=row["relative_error"] < config.variance_tolerance,
                observed=row["n_var"],
                reference=reference,
                tolerance=config.variance_tolerance,
            )
        )
    return rows, checks


# ---------------------------------------------------------------------------
# 대편차 기울기
# ---------------------------------------------------------------------------


def _tail_rate(count: int, reps: int, n: int) -> float:
    return -math.log(count / reps) / n if count > 0 else math.inf


def ldp_reference(config: ExperimentConfig, y: float, p: float) -> float:
    if config.estimator == "crude":
        return rates.rate_crude(y, p)
    if config.estimator == "fixed":
        return rates.fixed_upper_bound(y, p, config.levels)
    return rates.rate_I(y, p)


def exact_upper_tail(config: ExperimentConfig, n: int, target: Target) -> float | None:
    """P(p̂ − p ≥ ε)의 정확한 값. 단순 MC(이항)와 k = 1 AMS(J ~ Poisson(−n log p))만.

    p̂은 시뮬레이션과 같은 부동소수점 식으로 계산해 격자 경계 판정을 맞춘다.
    """
    p, eps = target.p, config.eps
    if config.estimator == "crude":
        counts = np.arange(n + 1)
        return binomial_mass(n, p, counts / n - p >= eps)
    if config.estimator != "ams" or config.k != 1:
        return None
    # p̂은 J에 대해 감소. 초과는 J ≤ largest 안에서만 일어난다
    largest = 1 if p + eps >= 1.0 else int(math.log(p + eps) / math.log1p(-1.0 / n)) + 2
    estimates = np.array([estimate_from_counts(n, 1, j, n).value for j in range(largest + 1)])
    return poisson_mass(-n * target.log_p, estimates - p >= eps)


def ldp_slope_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """q_n^± = P(±(p̂ − p) ≥ ε)를 추정하고 −log q_n⁺ 대 n의 가중 기울기를 율함수와 비교.

    초과가 한 번도 없는 셀은 flagged로 표시하고 회귀에서 뺀다.
    고정 수준 추정기의 기준값은 상계 N·𝓘_N(y^{1/N})이다.
    """
    target = resolve_target(config)
    p, eps = target.p, config.eps
    upper_reference = ldp_reference(config, p + eps, p)
    lower_reference = ldp_reference(config, p - eps, p) if p - eps > 0.0 else math.inf
    confidence = 1.0 - config.alpha

    rows: Rows = []
    upper_counts: list[int] = []
    exact_tails: list[float | None] = []
    for cell, n in enumerate(config.n_grid):
        sample = draw_estimates(config, config.estimator, n, target, _seed(config, cell))
        deviation = sample.estimates - p
        upper = int(np.count_nonzero(deviation >= eps))
        lower = int(np.count_nonzero(deviation <= -eps))
        upper_counts.append(upper)
        exact = exact_upper_tail(config, n, target)
        exact_tails.append(exact)
        lo, hi = wilson_interval(upper, config.reps, confidence)
        flagged = upper == 0
        if flagged:
            logger.warning("n=%d: p̂ − p ≥ %g 초과가 관측되지 않아 회귀에서 제외합니다", n, eps)
        rows.append(
            {
                "estimator": config.estimator,
                "n": n,
                "p": p,
                "eps": eps,
                "reps": config.reps,
                "upper_count": upper,
                "lower_count": lower,
                "q_upper": upper / config.reps,
                "q_lower": lower / config.reps,
                "q_upper_low": lo,
                "q_upper_high": hi,
                "q_upper_exact": math.nan if exact is None else exact,
                "rate_upper": _tail_rate(upper, config.reps, n),
                "rate_upper_low": -math.log(hi) / n if hi > 0.0 else math.inf,
                "rate_upper_high": -math.log(lo) / n if lo > 0.0 else math.inf,
                "rate_lower": _tail_rate(lower, config.reps, n),
                "reference_upper": upper_reference,
                "reference_lower": lower_reference,
                "flagged": flagged,
            }
        )

    checks: Checks = []
    try:
        fit = weighted_slope(config.n_grid, upper_counts, config.reps)
    except DomainError as exc:
        logger.warning("기울기 회귀 불가: %s", exc)
        checks.append(
            CheckResult(
                name=f"ldp-slope[{config.estimator} upper]",
                passed=False,
                reference=upper_reference,
                detail=str(exc),
            )
        )
        return rows, checks

    exact_fit = _exact_slope(config, fit.used, exact_tails)
    for row in rows:
        row["fitted_slope"] = fit.slope
        row["fitted_slope_se"] = fit.slope_se
        row["exact_slope"] = math.nan if exact_fit is None else exact_fit.slope
    relative = _relative_error(fit.slope, upper_reference)
    if config.estimator == "fixed":
        passed = fit.slope <= upper_reference * (1.0 + config.slope_tolerance)
        detail = "기준값은 상계"
    else:
        passed = relative < config.slope_tolerance
        detail = f"상대오차 {relative:.3f}, 사용 셀 {len(fit.used)}개"
    if exact_fit is not None:
        detail += f", 정확 법칙 기울기 {exact_fit.slope:.4f}"
    checks.append(
        CheckResult(
            name=f"ldp-slope[{config.estimator} upper]",
            passed=passed,
            observed=fit.slope,
            reference=upper_reference,
            tolerance=config.slope_tolerance,
            detail=detail,
        )
    )

    if exact_fit is not None:
        band = config.se_multiplier * fit.slope_se
        checks.append(
            CheckResult(
                name=f"ldp-slope-exact[{config.estimator} upper]",
                passed=abs(fit.slope - exact_fit.slope) <= band,
                observed=fit.slope,
                reference=exact_fit.slope,
                tolerance=band,
                detail="같은 셀에서 정확한 꼬리 확률로 구한 기울기와 비교",
            )
        )
    return rows, checks


def _exact_slope(
    config: ExperimentConfig, used: tuple[int, ...], exact_tails: list[float | None]
) -> SlopeFit | None:
    tails = [tail for i in used if (tail := exact_tails[i]) is not None]
    if len(tails) < len(used):
        return None
    ns = [config.n_grid[i] for i in used]
    try:
        return weighted_slope(ns, [tail * config.reps for tail in tails], config.reps)
    except DomainError as exc:
        logger.warning("정확 법칙 기울기 계산 불가: %s", exc)
        return None


# ---------------------------------------------------------------------------
# k = 1 분포 법칙
# ---------------------------------------------------------------------------


def poisson_gof_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """J^{n,1}의 경험분포를 Poisson(−n log p)와 카이제곱 적합도로 비교."""
    target = resolve_target(config)
    if _ams_engine(config) == "poisson":
        logger.warning("poisson 엔진은 J를 포아송에서 직접 뽑으므로 이 검정은 자명하게 통과합니다")

    rows: Rows = []
    checks: Checks = []
    for cell, n in enumerate(config.n_grid):
        ensemble = replicate_ams(
            AmsConfig(n=n, k=1, a=target.a),
            target.dist,
            config.reps,
            _seed(config, cell),
            engine=_ams_engine(config),
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        expected_mean = -n * target.log_p
        gof = poisson_chi_square(ensemble.iterations, expected_mean)
        mean_j = float(ensemble.iterations.mean())
        band = config.se_multiplier * math.sqrt(expected_mean / config.reps)
        rows.append(
            {
                "n": n,
                "p": target.p,
                "dist": target.dist.name,
                "reps": config.reps,
                "mean_iterations": mean_j,
                "expected_mean": expected_mean,
                "chi_square": gof.statistic,
                "p_value": gof.p_value,
                "bins": gof.bins,
            }
        )
        checks.append(
            CheckResult(
                name=f"poisson-gof[n={n}]",
                passed=gof.p_value > config.alpha,
                observed=gof.p_value,
                reference=config.alpha,
                detail=f"χ² = {gof.statistic:.3f}, 구간 {gof.bins}개",
            )
        )
        checks.append(
            CheckResult(
                name=f"poisson-mean[n={n}]",
                passed=abs(mean_j - expected_mean) < band,
                observed=mean_j,
                reference=expected_mean,
                tolerance=band,
            )
        )
    return rows, checks


def lognormal_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """−log p = σ²n 체제에서 p̂^{n,1}/p와 LogNormal(−σ²/2, σ) 사이 KS 거리."""
    sigma, eps = config.sigma, config.eps
    dist = get_distribution(config.dist)
    law = lognormal_law(sigma)
    # P(|L − 1| ≥ ε), L ~ LogNormal(−σ²/2, σ)
    tail_reference = float(law.sf(1.0 + eps))
    if eps < 1.0:
        tail_reference += float(law.cdf(1.0 - eps))

    rows: Rows = []
    checks: Checks = []
    distances: list[float] = []
    for cell, n in enumerate(config.n_grid):
        log_p = -sigma * sigma * n
        target = Target(dist, dist.inverse_log_sf(log_p), math.exp(log_p))
        ensemble = replicate_ams(
            AmsConfig(n=n, k=1, a=target.a),
            dist,
            config.reps,
            _seed(config, cell),
            engine=_ams_engine(config),
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        ratios = np.exp(ensemble.log_estimates - log_p)
        ks = ks_lognormal(ratios, sigma)
        summary = mean_se(ratios)
        distances.append(ks.statistic)
        rows.append(
            {
                "n": n,
                "sigma": sigma,
                "log_p": log_p,
                "reps": config.reps,
                "ks_distance": ks.statistic,
                "ks_p_value": ks.p_value,
                "mean_ratio": summary.mean,
                "mean_ratio_se": summary.se,
                "tail_frequency": float(np.mean(np.abs(ratios - 1.0) >= eps)),
                "tail_reference": tail_reference,
            }
        )
        checks.append(
            CheckResult(
                name=f"lognormal-mean[n={n}]",
                passed=abs(summary.mean - 1.0) < config.se_multiplier * summary.se,
                observed=summary.mean,
                reference=1.0,
                tolerance=config.se_multiplier * summary.se,
            )
        )

    noise = ks_critical_distance(config.reps, 0.05)
    checks.append(
        CheckResult(
            name="lognormal-ks-final",
            passed=distances[-1] < config.ks_max_distance,
            observed=distances[-1],
            reference=0.0,
            tolerance=config.ks_max_distance,
        )
    )
    checks.append(
        CheckResult(
            name="lognormal-ks-trend",
            passed=distances[-1] <= distances[0] + noise,
            observed=distances[-1],
            reference=distances[0],
            tolerance=noise,
            detail="마지막 KS 거리가 첫 값 + 표본 잡음 이하",
        )
    )
    return rows, checks


# ---------------------------------------------------------------------------
# 추정기 비교
# ---------------------------------------------------------------------------


def compare_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """AMS / 단순 MC / 고정 수준 분할의 평균, n·분산, ±ε 편차 빈도, 기대 작업량."""
    target = resolve_target(config)
    p, eps = target.p, config.eps
    rows: Rows = []
    checks: Checks = []
    tail_ratios: list[tuple[int, float]] = []
    for cell, n in enumerate(config.n_grid):
        deviations: dict[str, int] = {}
        for estimator in ("ams", "crude", "fixed"):
            sample = draw_estimates(config, estimator, n, target, _seed(config, cell, estimator))
            row = _ensemble_row(config, sample, n, target)
            deviation = sample.estimates - p
            row["upper_count"] = int(np.count_nonzero(deviation >= eps))
            row["lower_count"] = int(np.count_nonzero(deviation <= -eps))
            row["upper_frequency"] = row["upper_count"] / config.reps
            row["lower_frequency"] = row["lower_count"] / config.reps
            reference = reference_variance(estimator, p, config.levels)
            row["reference_n_var"] = reference
            row["relative_error"] = _relative_error(row["n_var"], reference)
            deviations[estimator] = row["upper_count"] + row["lower_count"]
            rows.append(row)
            checks.append(
                CheckResult(
                    name=f"compare-variance[{estimator} n={n}]",
                    passed=row["relative_error"] < config.variance_tolerance,
                    observed=row["n_var"],
                    reference=reference,
                    tolerance=config.variance_tolerance,
                )
            )

        ams_count, crude_count = deviations["ams"], deviations["crude"]
        ratio = ams_count / crude_count if crude_count > 0 else math.nan
        for row in rows[-3:]:
            row["tail_ratio_ams_crude"] = ratio
        if crude_count > 0:
            tail_ratios.append((n, ratio))
        if n < _DOMINANCE_MIN_N:
            continue
        checks.append(
            CheckResult(
                name=f"compare-dominance[n={n}]",
                passed=ams_count < crude_count or ams_count == crude_count == 0,
                observed=float(ams_count),
                reference=float(crude_count),
                detail="AMS 편차 횟수 < 단순 MC 편차 횟수",
            )
        )

    if len(tail_ratios) >= 2:
        values = [ratio for _, ratio in tail_ratios]
        grid = ", ".join(str(n) for n, _ in tail_ratios)
        checks.append(
            CheckResult(
                name="compare-tail-ratio",
                passed=all(b < a or a == b == 0.0 for a, b in pairwise(values)),
                observed=values[-1],
                reference=values[0],
                detail=f"AMS/단순 MC 편차 횟수 비가 n을 따라 감소 (n={grid})",
            )
        )
    else:
        logger.info("편차 횟수 비를 계산할 수 있는 n이 두 개 미만이라 감소 판정을 생략합니다")
    return rows, checks


# ---------------------------------------------------------------------------
# 라플라스 변환 검증
# ---------------------------------------------------------------------------


def _decreasing(values: list[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:], strict=False))


def _relative_gap(observed: float, reference: float) -> float:
    """|Γ|가 1보다 크면 상대 차이, 아니면 절대 차이."""
    return abs(observed - reference) / max(1.0, abs(reference))


def _laplace_cell(
    config: ExperimentConfig, n: int, lam: float, target: Target, cell: int
) -> tuple[dict[str, Any], Checks]:
    k, a, p = config.k, target.a, target.p
    solution = laplace.characteristic_solution(n, k, lam)
    ode = laplace.gamma_transform(n, k, lam, 0.0, a, "ode").value
    residual = laplace.functional_equation_residual(
        n, k, lam, a, lambda x: float(solution.evaluate(x, a))
    )
    scale = max(1.0, abs(ode))
    _, theta_derivatives = laplace.boundary_derivatives(n, k, lam)
    theta_gap = max(
        abs(d / float(n) ** m - (-math.expm1(-lam)) ** m) for m, d in enumerate(theta_derivatives)
    )
    scaled_roots = np.asarray(solution.roots) / n
    gammas = np.asarray(solution.coefficients)
    limit_value = rates.log_laplace_limit(lam, p)
    scaled = laplace.scaled_log_laplace(n, k, lam, p)

    row: dict[str, Any] = {
        "n": n,
        "k": k,
        "lambda": lam,
        "a": a,
        "gamma_ode": ode,
        "residual": residual,
        "relative_residual": residual / scale,
        "theta_derivative_gap": theta_gap,
        "root_gap": float(np.max(np.abs(scaled_roots - laplace.root_limits(k, lam)))),
        "principal_coefficient_gap": float(abs(gammas[0] - 1.0)),
        "other_coefficient_max": float(np.max(np.abs(gammas[1:]))) if k > 1 else 0.0,
        "principal_dominant": bool(np.all(scaled_roots.real[1:] > scaled_roots.real[0])),
        "scaled_log_laplace": scaled,
        "log_laplace_limit": limit_value,
        "log_laplace_gap": abs(scaled - limit_value),
    }
    checks: Checks = [
        CheckResult(
            name=f"laplace-residual[n={n} λ={lam:g}]",
            passed=residual / scale < config.residual_tolerance,
            observed=residual / scale,
            tolerance=config.residual_tolerance,
        )
    ]

    # λ ≤ 0에서는 exp(nλ log p̂)의 분산이 커서 MC 경로를 돌리지 않는다
    if lam > 0.0:
        mc = laplace.gamma_transform(
            n,
            k,
            lam,
            0.0,
            a,
            "mc",
            reps=config.reps,
            seed=_seed(config, cell),
            engine=config.engine,
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        band = config.se_multiplier * (mc.standard_error or 0.0)
        row["gamma_mc"] = mc.value
        row["gamma_mc_se"] = mc.standard_error
        checks.append(
            CheckResult(
                name=f"laplace-mc-band[n={n} λ={lam:g}]",
                passed=abs(ode - mc.value) <= band,
                observed=mc.value,
                reference=ode,
                tolerance=band,
            )
        )

    if k == 1:
        closed = laplace.gamma_transform(n, 1, lam, 0.0, a, "closed").value
        row["gamma_closed"] = closed
        row["route_difference"] = _relative_gap(closed, ode)
        checks.append(
            CheckResult(
                name=f"laplace-closed-vs-ode[n={n} λ={lam:g}]",
                passed=row["route_difference"] < config.route_tolerance,
                observed=closed,
                reference=ode,
                tolerance=config.route_tolerance,
            )
        )
    elif lam > 0.0:
        checks.append(
            CheckResult(
                name=f"laplace-principal-root[n={n} λ={lam:g}]",
                passed=row["principal_dominant"],
                detail="Re ν^ℓ > Re ν^0 (ℓ ≥ 1)",
            )
        )
    return row, checks


def laplace_verify(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """(n, λ) 격자에서 라플라스 변환 경로 일치, 잔차, 극한 간격, 척도 로그 라플라스 수렴."""
    target = resolve_target(config, "exponential")
    rows: Rows = []
    checks: Checks = []
    cell = 0
    for lam in config.lambda_grid:
        per_lambda: list[dict[str, Any]] = []
        for n in config.n_grid:
            logger.debug("laplace 셀: n=%d k=%d λ=%g", n, config.k, lam)
            row, cell_checks = _laplace_cell(config, n, lam, target, cell)
            cell += 1
            per_lambda.append(row)
            checks.extend(cell_checks)
        rows.extend(per_lambda)

        if lam <= 0.0 or len(per_lambda) < 2:
            continue
        log_gaps = [r["log_laplace_gap"] for r in per_lambda]
        limit = abs(per_lambda[-1]["log_laplace_limit"])
        checks.append(
            CheckResult(
                name=f"log-laplace-limit[λ={lam:g}]",
                passed=_decreasing(log_gaps)
                and log_gaps[-1] < config.log_laplace_tolerance * limit,
                observed=per_lambda[-1]["scaled_log_laplace"],
                reference=per_lambda[-1]["log_laplace_limit"],
                tolerance=config.log_laplace_tolerance * limit,
            )
        )
        if config.k > 1:
            root_gaps = [r["root_gap"] for r in per_lambda]
            coefficient_gaps = [r["principal_coefficient_gap"] for r in per_lambda]
            checks.append(
                CheckResult(
                    name=f"root-limit[λ={lam:g}]",
                    passed=_decreasing(root_gaps),
                    observed=root_gaps[-1],
                    detail="근 간격이 n을 따라 감소",
                )
            )
            checks.append(
                CheckResult(
                    name=f"coefficient-limit[λ={lam:g}]",
                    passed=_decreasing(coefficient_gaps)
                    and coefficient_gaps[-1] < config.gamma_limit_tolerance,
                    observed=coefficient_gaps[-1],
                    tolerance=config.gamma_limit_tolerance,
                )
            )
    return rows, checks


# ---------------------------------------------------------------------------
# 지수 환원
# ---------------------------------------------------------------------------


def reduction_experiment(config: ExperimentConfig) -> tuple[Rows, Checks]:
    """같은 p에서 설정 분포와 기준 분포 아래 AMS 추정값 분포를 두 표본 KS로 비교."""
    target = resolve_target(config)
    reference = resolve_target(config, config.reference_dist)
    rows: Rows = []
    checks: Checks = []
    for cell, n in enumerate(config.n_grid):
        first = draw_estimates(config, "ams", n, target, _seed(config, cell, "ams"))
        second = draw_estimates(config, "ams", n, reference, _seed(config, cell, "crude"))
        ks = two_sample_ks(first.estimates, second.estimates)
        rows.append(
            {
                "n": n,
                "k": config.k,
                "p": target.p,
                "dist": target.dist.name,
                "reference_dist": reference.dist.name,
                "a": target.a,
                "reference_a": reference.a,
                "mean": float(first.estimates.mean()),
                "reference_mean": float(second.estimates.mean()),
                "ks_statistic": ks.statistic,
                "ks_p_value": ks.p_value,
            }
        )
        checks.append(
            CheckResult(
                name=f"reduction-ks[n={n}]",
                passed=ks.p_value > config.alpha,
                observed=ks.p_value,
                reference=config.alpha,
                detail=f"{target.dist.name} vs {reference.dist.name}",
            )
        )
    return rows, checks


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], tuple[Rows, Checks]]] = {
    "unbiasedness": unbiasedness_experiment,
    "clt": clt_experiment,
    "ldp-slope": ldp_slope_experiment,
    "poisson-gof": poisson_gof_experiment,
    "lognormal": lognormal_experiment,
    "compare": compare_experiment,
    "laplace-verify": laplace_verify,
    "reduction": reduction_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """실험을 실행하고 메타데이터를 붙인 보고서를 만든다."""
    runner = EXPERIMENTS[config.kind]
    started_at = datetime.now()
    t0 = time.perf_counter()
    logger.info(
        "실험 시작: %s (셀 %d개, M=%d, seed=%d)",
        config.kind,
        len(config.n_grid),
        config.reps,
        config.seed,
    )

    rows, checks = runner(config)

    elapsed = time.perf_counter() - t0
    for check in checks:
        if not check.passed:
            logger.warning(
                "판정 실패: %s (관측=%s, 기준=%s)", check.name, check.observed, check.reference
            )
    logger.info("실험 완료: %s, 행 %d개, %.2f초", config.kind, len(rows), elapsed)

    return ExperimentReport(
        kind=config.kind,
        rows=rows,
        checks=checks,
        metadata=ReportMetadata(
            seed=config.seed,
            version=VERSION,
            workers=config.workers,
            started_at=started_at,
            wall_clock_seconds=elapsed,
            config=config.model_dump(mode="json"),
        ),
    )
