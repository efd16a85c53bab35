"""Pydantic 데이터 모델 모듈

알고리즘 설정과 결과, 이론 계산 결과, 실험 설정과 보고서를 이 모듈의 모델로 검증한다.
복소수 근이나 분포 객체처럼 직렬화 대상이 아닌 값은 각 계산 모듈의 dataclass에 둔다.
"""

from __future__ import annotations

import math
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from src.core.config import settings

ExperimentKind = Literal[
    "unbiasedness",
    "clt",
    "ldp-slope",
    "poisson-gof",
    "lognormal",
    "compare",
    "laplace-verify",
    "reduction",
]
EstimatorKind = Literal["ams", "crude", "fixed"]
EngineKind = Literal["auto", "exact", "renewal", "poisson"]
ReportFormat = Literal["csv", "json", "xlsx"]


# ---------------------------------------------------------------------------
# 분포 / 알고리즘
# ---------------------------------------------------------------------------


class OrderStatisticLaw(BaseModel):
    """n개 조건부 지수 표본의 k번째 순서통계량 (floor = x)."""

    model_config = {"frozen": True}

    n: int = Field(..., ge=1, description="표본 크기")
    k: int = Field(..., ge=0, description="순위 (0은 지시함수 규약)")
    floor: float = Field(default=0.0, description="조건 수준 x")

    @model_validator(mode="after")
    def _check_rank(self) -> OrderStatisticLaw:
        if self.k > self.n:
            raise ValueError(f"k={self.k} > n={self.n}")
        return self


class AmsConfig(BaseModel):
    """AMS(n, k; a, x) 설정."""

    model_config = {"frozen": True}

    n: int = Field(..., ge=2, description="복제본 수", examples=[100])
    k: int = Field(..., ge=1, description="반복마다 제거하는 복제본 수", examples=[10])
    a: float = Field(..., description="임계값", examples=[2.302585092994046])
    x: float = Field(default=0.0, description="초기 수준")
    max_iterations: int | None = Field(
        default=None, ge=1, description="반복 상한 (None이면 기대 반복 수로부터 결정)"
    )
    record_levels: bool = Field(default=False, description="수준 궤적 Z^j 기록 여부")

    @model_validator(mode="after")
    def _check_domain(self) -> AmsConfig:
        if self.k > self.n - 1:
            raise ValueError(f"k는 1..n−1 이어야 합니다: n={self.n}, k={self.k}")
        if not self.x < self.a:
            raise ValueError(f"초기 수준 x={self.x}는 임계값 a={self.a}보다 작아야 합니다")
        if not math.isfinite(self.a) or not math.isfinite(self.x):
            raise ValueError("a와 x는 유한해야 합니다")
        return self


class AmsResult(BaseModel):
    """AMS 1회 실행 결과. estimate = C·(1 − k/n)^J."""

    n: int
    k: int
    iterations: int = Field(..., ge=0, description="완료된 반복 수 J")
    surviving_count: int = Field(..., description="종료 시 a 이상인 복제본 수")
    estimate: float = Field(..., description="p̂ ∈ (0, 1]")
    log_estimate: float = Field(..., description="log p̂")
    levels: list[float] | None = Field(default=None, description="Z^1, …, Z^{J+1}")

    @model_validator(mode="after")
    def _check_survivors(self) -> AmsResult:
        if not self.n - self.k + 1 <= self.surviving_count <= self.n:
            raise ValueError(
                f"생존 수 {self.surviving_count}가 [{self.n - self.k + 1}, {self.n}] 밖입니다"
            )
        return self

    @property
    def surviving_fraction(self) -> Fraction:
        """C = (a 이상인 복제본 수) / n."""
        return Fraction(self.surviving_count, self.n)


class FixedLevelPlan(BaseModel):
    """고정 수준 분할의 수준열 a_0 < a_1 < … < a_N = a."""

    start: float = Field(default=0.0, description="a_0")
    levels: list[float] = Field(..., min_length=1, description="a_1, …, a_N")
    per_level_target: float | None = Field(
        default=None, description="최적 계획의 단계별 조건부 확률 p^{1/N}"
    )

    @model_validator(mode="after")
    def _check_monotone(self) -> FixedLevelPlan:
        chain = [self.start, *self.levels]
        if any(b <= a for a, b in zip(chain, chain[1:], strict=False)):
            raise ValueError(f"수준열이 순증가가 아닙니다: {chain}")
        return self

    @property
    def stage_count(self) -> int:
        return len(self.levels)

    @property
    def threshold(self) -> float:
        return self.levels[-1]


class FixedSplittingResult(BaseModel):
    estimate: float
    stage_fractions: list[float]

    @property
    def zero_stage(self) -> bool:
        """어떤 단계도 성공하지 못해 추정값이 0인 경우."""
        return any(f == 0.0 for f in self.stage_fractions)


# ---------------------------------------------------------------------------
# 이론 계산
# ---------------------------------------------------------------------------


class RateFunctionPoint(BaseModel):
    """율함수 값 하나. 정의역 밖이면 value = +∞."""

    model_config = {"ser_json_inf_nan": "constants"}

    name: str = Field(..., description="I, J, Lambda, Lambda*, crude, fixed, ...")
    argument: float
    p: float
    value: float
    in_domain: bool
    levels: int | None = Field(default=None, description="고정 수준 수 N")


class OdeCoefficients(BaseModel):
    """ν^k − Σ r_m ν^m = ∏_{j<k}(ν − n + j), μ = (−1)^k n(n−1)…(n−k+1)."""

    n: int
    k: int
    mu: int
    r: list[int] = Field(..., description="r_0, …, r_{k−1}")


class BoundaryDerivatives(BaseModel):
    """B[m][ℓ] = d^m/dx^m (F_{n,ℓ}(a;x) − F_{n,ℓ+1}(a;x)) at x = a. 값은 정확한 정수."""

    n: int
    k: int
    matrix: list[list[int]]

    def scaled(self, m: int, ell: int) -> float:
        """B[m][ℓ] / n^m."""
        return float(Fraction(self.matrix[m][ell], self.n**m))


class GammaEstimate(BaseModel):
    """Γ_{n,k}(λ; x) 값과 (MC 경로일 때) 표준오차."""

    route: Literal["closed", "ode", "mc"]
    value: float
    standard_error: float | None = None
    replications: int | None = None

    def band(self, multiplier: float) -> tuple[float, float]:
        se = self.standard_error or 0.0
        return self.value - multiplier * se, self.value + multiplier * se


# ---------------------------------------------------------------------------
# 실험 설정 / 보고서
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    """시드가 고정된 실험 앙상블 설명."""

    model_config = {"extra": "forbid"}

    kind: ExperimentKind
    estimator: EstimatorKind = "ams"
    n_grid: list[int] = Field(default_factory=lambda: [100], min_length=1)
    k: int = Field(default=1, ge=1)
    p: float | None = Field(default=None, description="목표 확률 (threshold와 택일)")
    threshold: float | None = Field(default=None, description="임계값 a (p와 택일)")
    dist: str = "exponential"
    reference_dist: str = Field(default="exponential", description="reduction 비교 분포")
    levels: int = Field(default=4, ge=1, description="고정 수준 수 N")
    lambda_grid: list[float] = Field(default_factory=lambda: [0.5], min_length=1)
    eps: float = Field(default=0.2, gt=0.0)
    sigma: float = Field(default=0.5, gt=0.0)
    reps: int = Field(default=10_000, ge=1, description="반복 횟수 M")
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0)
    workers: int = Field(default_factory=lambda: settings.workers, ge=1)
    chunk_size: int = Field(default_factory=lambda: settings.chunk_size, ge=1)
    engine: EngineKind = "auto"
    out: Path | None = None
    fmt: ReportFormat = "csv"
    check: bool = False

    alpha: float = Field(default_factory=lambda: settings.alpha, gt=0.0, lt=1.0)
    se_multiplier: float = Field(default_factory=lambda: settings.se_multiplier, gt=0.0)
    slope_tolerance: float = Field(default_factory=lambda: settings.slope_tolerance, gt=0.0)
    variance_tolerance: float = Field(
        default_factory=lambda: settings.variance_tolerance, gt=0.0
    )
    ks_max_distance: float = Field(default_factory=lambda: settings.ks_max_distance, gt=0.0)
    residual_tolerance: float = Field(
        default_factory=lambda: settings.residual_tolerance, gt=0.0
    )
    route_tolerance: float = Field(default_factory=lambda: settings.route_tolerance, gt=0.0)
    log_laplace_tolerance: float = Field(
        default_factory=lambda: settings.log_laplace_tolerance, gt=0.0
    )
    gamma_limit_tolerance: float = Field(
        default_factory=lambda: settings.gamma_limit_tolerance, gt=0.0
    )

    @field_validator("n_grid")
    @classmethod
    def _positive_grid(cls, value: list[int]) -> list[int]:
        if any(n < 1 for n in value):
            raise ValueError(f"n 격자는 양의 정수여야 합니다: {value}")
        return value

    @field_validator("p")
    @classmethod
    def _open_unit_interval(cls, value: float | None) -> float | None:
        if value is None:
            return value
        if value == 1.0:
            raise ValueError("p = 1은 퇴화 경우라 거부합니다 (p ∈ (0,1) 필요)")
        if not 0.0 < value < 1.0:
            raise ValueError(f"p는 (0,1) 이어야 합니다: {value}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> ExperimentConfig:
        if self.p is not None and self.threshold is not None:
            raise ValueError("p와 threshold는 동시에 지정할 수 없습니다")
        if self.threshold is not None and not self.threshold > 0.0:
            raise ValueError(f"threshold는 양수여야 합니다: {self.threshold}")
        needs_target = self.kind not in {"lognormal"}
        if needs_target and self.p is None and self.threshold is None:
            raise ValueError(f"{self.kind} 실험에는 p 또는 threshold가 필요합니다")
        uses_ams = self.estimator == "ams" or self.kind in {
            "poisson-gof",
            "lognormal",
            "reduction",
            "laplace-verify",
        }
        if uses_ams and any(self.k > n - 1 for n in self.n_grid):
            raise ValueError(f"모든 n에 대해 1 ≤ k ≤ n−1 이어야 합니다: k={self.k}")
        if self.kind in {"poisson-gof", "lognormal"} and self.k != 1:
            raise ValueError(f"{self.kind} 실험은 k = 1 전용입니다")
        if self.engine == "poisson" and self.k != 1:
            raise ValueError("poisson 엔진은 k = 1 전용입니다")
        return self


class CheckResult(BaseModel):
    """통계/수치 판정 하나."""

    model_config = {"ser_json_inf_nan": "constants"}

    name: str
    passed: bool
    observed: float | None = None
    reference: float | None = None
    tolerance: float | None = None
    detail: str = ""


class ReportMetadata(BaseModel):
    seed: int
    version: str
    workers: int
    started_at: datetime
    wall_clock_seconds: float
    config: dict[str, Any] = Field(default_factory=dict)


class ExperimentReport(BaseModel):
    """실험 셀별 행과 판정, 메타데이터."""

    model_config = {"ser_json_inf_nan": "constants"}

    kind: str
    rows: list[dict[str, Any]] = Field(default_factory=list)
    checks: list[CheckResult] = Field(default_factory=list)
    metadata: ReportMetadata

    @property
    def passed(self) -> bool | None:
        """판정이 없으면 None."""
        if not self.checks:
            return None
        return all(c.passed for c in self.checks)

    @property
    def failed_checks(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


class RunHistoryRecord(BaseModel):
    id: int | None = None
    kind: str
    seed: int
    config_json: str = "{}"
    row_count: int = 0
    passed: bool | None = None
    output_path: str = ""
    wall_clock_seconds: float = 0.0
    recorded_at: datetime = Field(default_factory=datetime.now)
