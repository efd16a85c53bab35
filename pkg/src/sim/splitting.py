"""적응형 다단계 분할 AMS(n, k; a, x)와 추정기 p̂ = C·(1 − k/n)^J.

세 가지 실행 엔진이 같은 AmsResult를 돌려준다.

- exact: 알고리즘 그대로. 복제본 앙상블을 (값, 복제본 번호) 키의 최소 힙으로 두고,
  반복마다 하위 k개를 꺼내 k번째 값을 수준 Z로 삼는다 (반복당 O(k log n)).
- renewal: 지수분포로 환원한 뒤, 각 반복 후 앙상블이 𝓛(X | X > Z^j)의 i.i.d.
  표본이라는 성질을 이용한다. 수준 증분은 n개 표준 지수 표본의 k번째 순서통계량
  Σ_{i<k} E_i/(n−i) (Rényi 표현)이고, 블록 단위로 벡터화해 뽑는다.
  수준은 지수 척도(−log S)로 기록된다.
- poisson: k = 1 전용. J ~ Poisson(−n log P(x)), C = 1.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from src.core.config import settings
from src.core.exceptions import DomainError, NonTerminationError, NumericalError
from src.core.streams import replicate
from src.data.models import AmsConfig, AmsResult

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.sim.dist import DistributionSpec

logger = logging.getLogger(__name__)

# 이 반복 수를 넘으면 추정값을 log 공간에서 계산
_LOG_SPACE_ITERATIONS = 1024
_RENEWAL_MAX_BLOCK = 1 << 16


class EstimateValue(NamedTuple):
    value: float
    log_value: float


def estimate_from_counts(n: int, k: int, iterations: int, surviving_count: int) -> EstimateValue:
    """p̂ = (surviving_count / n)·(1 − k/n)^iterations 와 그 자연로그."""
    if n < 2 or not 1 <= k <= n - 1:
        raise DomainError(f"1 ≤ k ≤ n−1 이어야 합니다: n={n}, k={k}")
    if iterations < 0:
        raise DomainError(f"반복 수는 음이 아니어야 합니다: {iterations}")
    if not n - k + 1 <= surviving_count <= n:
        raise DomainError(f"생존 수 {surviving_count}가 [{n - k + 1}, {n}] 밖입니다")

    fraction = surviving_count / n
    log_value = math.log(fraction) + iterations * math.log1p(-k / n)
    if iterations > _LOG_SPACE_ITERATIONS:
        return EstimateValue(math.exp(log_value), log_value)
    return EstimateValue(fraction * (1.0 - k / n) ** iterations, log_value)


def default_max_iterations(n: int, k: int, probability: float) -> int:
    """100·ceil(−n log P / k). 기대 반복 수의 100배."""
    if not 0.0 < probability <= 1.0:
        return settings.max_iterations_fallback
    expected = -n * math.log(probability) / k
    return max(100, 100 * math.ceil(expected))


def _exponential_threshold(config: AmsConfig, dist: DistributionSpec) -> float:
    """지수 환원 후 임계값 a' = −log P(X > a | X > x)."""
    log_p = dist.log_sf(config.a) - dist.log_sf(config.x)
    if not math.isfinite(log_p):
        raise DomainError(
            f"{dist.name}: P(X > {config.a} | X > {config.x}) = 0, 알고리즘이 멈추지 않습니다"
        )
    return -log_p


def _finish(
    config: AmsConfig, iterations: int, surviving_count: int, levels: list[float] | None
) -> AmsResult:
    value, log_value = estimate_from_counts(config.n, config.k, iterations, surviving_count)
    return AmsResult(
        n=config.n,
        k=config.k,
        iterations=iterations,
        surviving_count=surviving_count,
        estimate=value,
        log_estimate=log_value,
        levels=levels,
    )


def run_ams(config: AmsConfig, dist: DistributionSpec, rng: np.random.Generator) -> AmsResult:
    """AMS(n, k; a, x) 1회 실행.

    Raises:
        DomainError: P(x) = 0.
        NonTerminationError: 반복 상한 초과.
        NumericalError: 연속한 두 수준이 부동소수점에서 같아진 경우.
    """
    n, k, a = config.n, config.k, config.a
    a_exp = _exponential_threshold(config, dist)
    cap = config.max_iterations or default_max_iterations(n, k, math.exp(-a_exp))

    initial = dist.sample_above(config.x, rng, n)
    heap = list(zip(initial.tolist(), range(n), strict=True))
    heapq.heapify(heap)

    levels: list[float] | None = [] if config.record_levels else None
    previous = -math.inf
    iterations = 0
    while True:
        killed = [heapq.heappop(heap) for _ in range(k)]
        level = killed[-1][0]
        if level <= previous:
            raise NumericalError(
                "수준이 순증가하지 않습니다 (부동소수점 동률)",
                diagnostics={"iteration": iterations, "level": level, "previous": previous},
            )
        previous = level
        if levels is not None:
            levels.append(level)
        if level >= a:
            break
        if iterations >= cap:
            raise NonTerminationError(
                diagnostics={"cap": cap, "level": level, "threshold": a, "n": n, "k": k}
            )

        fresh = dist.sample_above(level, rng, k)
        for (_, replica), value in zip(killed, fresh.tolist(), strict=True):
            heapq.heappush(heap, (value, replica))
        iterations += 1

    below = sum(1 for value, _ in killed if value < a)
    return _finish(config, iterations, n - below, levels)


def run_ams_log(
    config: AmsConfig, dist: DistributionSpec, rng: np.random.Generator
) -> tuple[float, AmsResult]:
    result = run_ams(config, dist, rng)
    return result.log_estimate, result


def run_ams_renewal(
    config: AmsConfig, dist: DistributionSpec, rng: np.random.Generator
) -> AmsResult:
    """지수 환원 + 순서통계량 갱신으로 AMS를 분포적으로 동일하게 실행."""
    n, k = config.n, config.k
    a_exp = _exponential_threshold(config, dist)
    cap = config.max_iterations or default_max_iterations(n, k, math.exp(-a_exp))

    weights = 1.0 / (n - np.arange(k, dtype=np.float64))
    mean_increment = float(weights.sum())
    block = int(min(_RENEWAL_MAX_BLOCK, max(16, math.ceil(1.1 * a_exp / mean_increment) + 8)))

    levels: list[float] | None = [] if config.record_levels else None
    level = 0.0
    iterations = 0
    while True:
        offsets = np.cumsum(rng.standard_exponential((block, k)) * weights, axis=1)
        path = level + np.cumsum(offsets[:, -1])
        hit = np.flatnonzero(path >= a_exp)

        if hit.size == 0:
            if levels is not None:
                levels.extend(path.tolist())
            iterations += block
            level = float(path[-1])
            if iterations > cap:
                raise NonTerminationError(
                    diagnostics={"cap": cap, "level": level, "threshold": a_exp, "n": n, "k": k}
                )
            continue

        i = int(hit[0])
        if levels is not None:
            levels.extend(path[: i + 1].tolist())
        start = level if i == 0 else float(path[i - 1])
        terminal = start + offsets[i]
        below = int(np.count_nonzero(terminal[: k - 1] < a_exp))
        iterations += i
        break

    if iterations > cap:
        raise NonTerminationError(diagnostics={"cap": cap, "iterations": iterations})
    return _finish(config, iterations, n - below, levels)


def run_ams_poisson(
    config: AmsConfig, dist: DistributionSpec, rng: np.random.Generator
) -> AmsResult:
    """k = 1: 수준이 강도 n의 포아송 과정이므로 J ~ Poisson(n·a'), C = 1."""
    if config.k != 1:
        raise DomainError(f"poisson 엔진은 k = 1 전용입니다: k={config.k}")
    a_exp = _exponential_threshold(config, dist)
    iterations = int(rng.poisson(config.n * a_exp))
    return _finish(config, iterations, config.n, None)


ENGINES: dict[str, Callable[[AmsConfig, DistributionSpec, np.random.Generator], AmsResult]] = {
    "exact": run_ams,
    "renewal": run_ams_renewal,
    "poisson": run_ams_poisson,
}


def resolve_engine(engine: str, *, prefer_poisson: bool = False) -> str:
    if engine == "auto":
        return "poisson" if prefer_poisson else "exact"
    if engine not in ENGINES:
        raise DomainError(f"알 수 없는 엔진: {engine!r}")
    return engine


# ---------------------------------------------------------------------------
# 반복 실행
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmsEnsemble:
    """M회 독립 실행 결과 (반복 번호 순)."""

    estimates: np.ndarray
    log_estimates: np.ndarray
    iterations: np.ndarray
    surviving_counts: np.ndarray

    @property
    def size(self) -> int:
        return int(self.estimates.size)


def ams_kernel(
    config: AmsConfig, dist: DistributionSpec, engine: str, rng: np.random.Generator
) -> tuple[float, float, float, float]:
    result = ENGINES[engine](config, dist, rng)
    return (
        result.estimate,
        result.log_estimate,
        float(result.iterations),
        float(result.surviving_count),
    )


def replicate_ams(
    config: AmsConfig,
    dist: DistributionSpec,
    reps: int,
    seed: int,
    *,
    engine: str = "exact",
    workers: int = 1,
    chunk_size: int | None = None,
) -> AmsEnsemble:
    """반복 i가 substream(seed, i)를 쓰는 M회 실행."""
    engine = resolve_engine(engine)
    if config.record_levels:
        config = config.model_copy(update={"record_levels": False})
    logger.debug(
        "AMS 반복 시작: n=%d k=%d a=%.6g 엔진=%s M=%d", config.n, config.k, config.a, engine, reps
    )
    table = replicate(
        partial(ams_kernel, config, dist, engine),
        reps,
        seed,
        width=4,
        workers=workers,
        chunk_size=chunk_size,
    )
    return AmsEnsemble(
        estimates=table[:, 0],
        log_estimates=table[:, 1],
        iterations=table[:, 2].astype(np.int64),
        surviving_counts=table[:, 3].astype(np.int64),
    )
