"""실험 판정용 통계 도구.

- 이항 비율의 Wilson 구간
- 이항 / 포아송 법칙 아래 정확한 꼬리 확률
- −log q_n 대 n 가중 최소제곱 기울기 (가중치 = 1/σ, Var(log q̂) ≈ (1 − q)/(Mq))
- 기대도수 5 이상으로 합친 포아송 카이제곱 적합도
- 로그정규 / 두 표본 Kolmogorov–Smirnov
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy import stats

from src.core.exceptions import DomainError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

logger = logging.getLogger(__name__)

_MIN_EXPECTED = 5.0
_TAIL_MASS = 1e-9


class MeanSE(NamedTuple):
    mean: float
    se: float
    variance: float


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    slope_se: float
    used: tuple[int, ...]


class GofResult(NamedTuple):
    statistic: float
    p_value: float
    bins: int


class KsResult(NamedTuple):
    statistic: float
    p_value: float


def mean_se(values: ArrayLike) -> MeanSE:
    """표본평균, 평균의 표준오차, 불편 표본분산."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("빈 표본입니다")
    mean = float(arr.mean())
    if arr.size == 1:
        return MeanSE(mean, math.inf, math.nan)
    variance = float(arr.var(ddof=1))
    return MeanSE(mean, math.sqrt(variance / arr.size), variance)


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError(f"이항 계수가 잘못되었습니다: {successes}/{trials}")
    ci = stats.binomtest(successes, trials).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(ci.low), float(ci.high)


def weighted_slope(ns: ArrayLike, counts: ArrayLike, trials: int) -> SlopeFit:
    """−log q̂_n = slope·n + intercept 의 가중 최소제곱.

    q̂ = 0 (초과 없음)이거나 q̂ = 1인 셀은 회귀에서 뺀다.
    """
    n_arr = np.asarray(ns, dtype=np.float64)
    c_arr = np.asarray(counts, dtype=np.float64)
    q = c_arr / trials
    usable = (q > 0.0) & (q < 1.0)
    used = tuple(int(i) for i in np.flatnonzero(usable))
    if len(used) < 2:
        raise DomainError(f"회귀에 쓸 수 있는 셀이 2개 미만입니다: {len(used)}")

    q_used = q[usable]
    sigma = np.sqrt((1.0 - q_used) / (trials * q_used))
    coefficients, covariance = np.polyfit(
        n_arr[usable], -np.log(q_used), 1, w=1.0 / sigma, cov="unscaled"
    )
    return SlopeFit(
        slope=float(coefficients[0]),
        intercept=float(coefficients[1]),
        slope_se=float(math.sqrt(covariance[0, 0])),
        used=used,
    )


def binomial_mass(n: int, p: float, mask: ArrayLike) -> float:
    """P(B ∈ {c : mask[c]}), B ~ Bin(n, p). mask 길이는 n + 1."""
    hits = np.flatnonzero(np.asarray(mask, dtype=bool))
    return float(stats.binom.pmf(hits, n, p).sum())


def poisson_mass(mean: float, mask: ArrayLike) -> float:
    """P(N ∈ {j : mask[j]}), N ~ Poisson(mean). mask 밖의 j는 포함하지 않는다."""
    hits = np.flatnonzero(np.asarray(mask, dtype=bool))
    return float(stats.poisson.pmf(hits, mean).sum())


def _pool_bins(observed: list[float], expected: list[float]) -> tuple[np.ndarray, np.ndarray]:
    """인접 구간을 합쳐 모든 기대도수를 5 이상으로 만든다."""
    obs_out: list[float] = []
    exp_out: list[float] = []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected, strict=True):
        acc_obs += o
        acc_exp += e
        if acc_exp >= _MIN_EXPECTED:
            obs_out.append(acc_obs)
            exp_out.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0.0 or acc_obs > 0.0:
        if exp_out:
            obs_out[-1] += acc_obs
            exp_out[-1] += acc_exp
        else:
            obs_out.append(acc_obs)
            exp_out.append(acc_exp)
    return np.asarray(obs_out), np.asarray(exp_out)


def poisson_chi_square(samples: ArrayLike, mean: float) -> GofResult:
    """정수 표본의 Poisson(mean) 카이제곱 적합도. 양끝 꼬리는 첫/마지막 구간에 포함."""
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size == 0 or not mean > 0.0:
        raise DomainError(f"표본이 비었거나 평균이 양수가 아닙니다: size={arr.size}, mean={mean}")
    law = stats.poisson(mean)
    lo = int(law.ppf(_TAIL_MASS))
    hi = max(int(law.isf(_TAIL_MASS)), lo + 1)
    support = np.arange(lo, hi + 1)

    probabilities = law.pmf(support)
    probabilities[0] = law.cdf(lo)
    probabilities[-1] = law.sf(hi - 1)
    expected = arr.size * probabilities

    observed = np.array([np.count_nonzero(arr == j) for j in support], dtype=np.float64)
    observed[0] = np.count_nonzero(arr <= lo)
    observed[-1] = np.count_nonzero(arr >= hi)

    pooled_obs, pooled_exp = _pool_bins(observed.tolist(), expected.tolist())
    pooled_exp *= pooled_obs.sum() / pooled_exp.sum()
    if pooled_obs.size < 2:
        logger.warning("카이제곱 구간이 1개뿐입니다 (mean=%g, M=%d)", mean, arr.size)
        return GofResult(0.0, 1.0, int(pooled_obs.size))
    result = stats.chisquare(pooled_obs, pooled_exp)
    return GofResult(float(result.statistic), float(result.pvalue), int(pooled_obs.size))


def lognormal_law(sigma: float) -> stats.rv_continuous:
    """exp(σZ − σ²/2)의 분포."""
    if not sigma > 0.0:
        raise DomainError(f"σ는 양수여야 합니다: {sigma}")
    return stats.lognorm(s=sigma, scale=math.exp(-0.5 * sigma * sigma))


def ks_lognormal(ratios: ArrayLike, sigma: float) -> KsResult:
    result = stats.kstest(np.asarray(ratios, dtype=np.float64), lognormal_law(sigma).cdf)
    return KsResult(float(result.statistic), float(result.pvalue))


def two_sample_ks(first: ArrayLike, second: ArrayLike) -> KsResult:
    result = stats.ks_2samp(
        np.asarray(first, dtype=np.float64), np.asarray(second, dtype=np.float64)
    )
    return KsResult(float(result.statistic), float(result.pvalue))


def ks_critical_distance(size: int, alpha: float) -> float:
    """한 표본 KS 통계량의 점근 임계값 sqrt(−log(α/2)/2)/√M."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(size)
