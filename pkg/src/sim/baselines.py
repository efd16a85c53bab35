"""비교 기준 추정기: 단순 몬테카를로와 최적 고정 수준 분할."""

from __future__ import annotations

import logging
import math
from functools import partial
from typing import TYPE_CHECKING

import numpy as np

from src.core.exceptions import DomainError
from src.core.streams import replicate
from src.data.models import FixedLevelPlan, FixedSplittingResult

if TYPE_CHECKING:
    from src.sim.dist import DistributionSpec

logger = logging.getLogger(__name__)


def crude_mc(n: int, dist: DistributionSpec, a: float, rng: np.random.Generator) -> float:
    """(1/n)·#{X_m > a}."""
    if n < 1:
        raise DomainError(f"표본 크기는 1 이상이어야 합니다: {n}")
    draws = dist.sample(rng, n)
    return int(np.count_nonzero(draws > a)) / n


def optimal_levels(dist: DistributionSpec, a: float, levels: int) -> FixedLevelPlan:
    """a_i = F⁻¹(1 − p^{i/N}). 단계별 조건부 확률이 모두 p^{1/N}이 되는 수준열.

    log 생존함수 척도에서 계산하므로 지수분포에서는 a_i = i·a/N 이 그대로 나온다.
    """
    if levels < 1:
        raise DomainError(f"수준 수 N은 1 이상이어야 합니다: {levels}")
    p = dist.sf(a)
    if not 0.0 < p < 1.0:
        raise DomainError(f"{dist.name}: p = P(X > {a}) = {p}가 (0,1) 밖입니다")

    log_p = dist.log_sf(a)
    inner = [dist.inverse_log_sf((i / levels) * log_p) for i in range(1, levels)]
    return FixedLevelPlan(
        start=0.0,
        levels=[*inner, float(a)],
        per_level_target=math.exp(log_p / levels),
    )


def run_fixed_splitting(
    n: int, plan: FixedLevelPlan, dist: DistributionSpec, rng: np.random.Generator
) -> FixedSplittingResult:
    """p̂_n^N = ∏ p̄_n^{(i)}. 단계마다 𝓛(X | X > a_{i−1})에서 새 표본 n개."""
    if n < 1:
        raise DomainError(f"단계별 표본 크기는 1 이상이어야 합니다: {n}")

    fractions: list[float] = []
    floor = plan.start
    for level in plan.levels:
        draws = dist.sample_above(floor, rng, n)
        fractions.append(int(np.count_nonzero(draws > level)) / n)
        floor = level

    return FixedSplittingResult(estimate=math.prod(fractions), stage_fractions=fractions)


def crude_kernel(
    n: int, dist: DistributionSpec, a: float, rng: np.random.Generator
) -> tuple[float]:
    return (crude_mc(n, dist, a, rng),)


def fixed_kernel(
    n: int, plan: FixedLevelPlan, dist: DistributionSpec, rng: np.random.Generator
) -> tuple[float, float]:
    result = run_fixed_splitting(n, plan, dist, rng)
    return result.estimate, float(result.zero_stage)


def replicate_crude(
    n: int,
    dist: DistributionSpec,
    a: float,
    reps: int,
    seed: int,
    *,
    workers: int = 1,
    chunk_size: int | None = None,
) -> np.ndarray:
    table = replicate(
        partial(crude_kernel, n, dist, a),
        reps,
        seed,
        width=1,
        workers=workers,
        chunk_size=chunk_size,
    )
    return table[:, 0]


def replicate_fixed(
    n: int,
    plan: FixedLevelPlan,
    dist: DistributionSpec,
    reps: int,
    seed: int,
    *,
    workers: int = 1,
    chunk_size: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(추정값 배열, 0 단계 발생 여부 배열)."""
    table = replicate(
        partial(fixed_kernel, n, plan, dist),
        reps,
        seed,
        width=2,
        workers=workers,
        chunk_size=chunk_size,
    )
    zero = table[:, 1] > 0.5
    if zero.any():
        logger.warning("고정 수준 분할: 성공 0인 단계가 있는 실행 %d/%d회", int(zero.sum()), reps)
    return table[:, 0], zero
