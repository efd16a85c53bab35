"""연속 분포와 조건부 표본 추출 (이상화된 설정의 오라클).

모든 분포는 X > 0 a.s. (cdf(0) = 0)를 만족한다. 조건부 표본은 역변환

    y = F⁻¹(F(x) + u(1 − F(x)))

을 생존함수 형태 y = S⁻¹(S(x)(1 − u))로 계산한다. 두 식은 대수적으로 같고,
후자는 꼬리에서 1 − F의 상쇄 오차가 없다.

지수분포 특수화의 순서통계량 밀도 f_{n,k}(·;x)와 누적분포 F_{n,k}(·;x)도 여기 있다.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import optimize, special, stats

from src.core.config import settings
from src.core.exceptions import DomainError, NumericalError
from src.core.streams import uniform_open

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from src.data.models import OrderStatisticLaw

logger = logging.getLogger(__name__)

# bisection 상한 탐색: 1에서 시작해 두 배씩, 최대 이 횟수까지
_MAX_BRACKET_DOUBLINGS = 1100


class DistributionSpec(ABC):
    """cdf(0) = 0인 연속 분포.

    하위 클래스는 `sf`와 `inverse_sf`만 구현하면 된다. 닫힌 형태의 역함수가 없는
    분포는 `BisectionInverseMixin`을 섞어 bisection으로 역함수를 얻는다.
    """

    name: str = "distribution"

    @abstractmethod
    def sf(self, x: float) -> float:
        """생존함수 S(x) = P(X > x)."""

    @abstractmethod
    def inverse_sf(self, q: float) -> float:
        """S(y) = q 인 y (q ∈ (0, 1])."""

    def cdf(self, x: float) -> float:
        return 1.0 - self.sf(x)

    def inverse_cdf(self, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise DomainError(f"inverse_cdf 인자는 (0,1) 이어야 합니다: {u}")
        return self.inverse_sf(1.0 - u)

    def log_sf(self, x: float) -> float:
        s = self.sf(x)
        return math.log(s) if s > 0.0 else -math.inf

    def inverse_log_sf(self, t: float) -> float:
        """log S(y) = t 인 y."""
        return self.inverse_sf(math.exp(t))

    def inverse_sf_array(self, q: np.ndarray) -> np.ndarray:
        return np.array([self.inverse_sf(float(v)) for v in q], dtype=np.float64)

    def sample_above(self, floor: float, rng: np.random.Generator, size: int) -> np.ndarray:
        """𝓛(X | X > floor)에서 i.i.d. 표본 `size`개.

        반올림으로 floor 이하가 나온 값은 다시 뽑는다.
        """
        s0 = self.sf(floor)
        if not s0 > 0.0:
            raise DomainError(f"{self.name}: floor={floor}가 지지집합 끝을 넘었습니다")
        out = self.inverse_sf_array(s0 * (1.0 - uniform_open(rng, size)))
        tie = out <= floor
        while tie.any():
            redraw = s0 * (1.0 - uniform_open(rng, int(tie.sum())))
            out[tie] = self.inverse_sf_array(redraw)
            tie = out <= floor
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sample_above(0.0, rng, size)

    def conditional_probability(self, x: float, a: float) -> float:
        """P(x) = P(X > a | X > x)."""
        if a <= x:
            return 1.0
        return math.exp(self.log_sf(a) - self.log_sf(x))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


class BisectionInverseMixin:
    """닫힌 형태 역함수가 없는 분포용: 생존함수에 대한 구간 bisection."""

    def inverse_sf(self, q: float) -> float:
        if not 0.0 < q <= 1.0:
            raise DomainError(f"inverse_sf 인자는 (0,1] 이어야 합니다: {q}")
        if q == 1.0:
            return 0.0

        sf = self.sf  # type: ignore[attr-defined]
        hi = 1.0
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            if sf(hi) < q:
                break
            hi *= 2.0
        else:
            raise NumericalError(
                "bisection 상한을 찾지 못했습니다", diagnostics={"q": q, "hi": hi}
            )

        try:
            return float(
                optimize.bisect(
                    lambda y: sf(y) - q,
                    0.0,
                    hi,
                    xtol=settings.bisection_tolerance,
                    maxiter=2000,
                )
            )
        except (RuntimeError, ValueError) as exc:
            raise NumericalError(
                f"역함수 bisection 실패: {exc}", diagnostics={"q": q, "hi": hi}
            ) from exc


class Exponential(DistributionSpec):
    """Exp(1). 조건부 표본은 floor + 표준 지수 난수 (무기억성)."""

    name = "exponential"

    def sf(self, x: float) -> float:
        return 1.0 if x <= 0.0 else math.exp(-x)

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else -math.expm1(-x)

    def log_sf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else -x

    def inverse_sf(self, q: float) -> float:
        if not 0.0 < q <= 1.0:
            raise DomainError(f"inverse_sf 인자는 (0,1] 이어야 합니다: {q}")
        return -math.log(q)

    def inverse_log_sf(self, t: float) -> float:
        return -t

    def inverse_sf_array(self, q: np.ndarray) -> np.ndarray:
        return -np.log(q)

    def sample_above(self, floor: float, rng: np.random.Generator, size: int) -> np.ndarray:
        out = floor + rng.standard_exponential(size)
        tie = out <= floor
        while tie.any():
            out[tie] = floor + rng.standard_exponential(int(tie.sum()))
            tie = out <= floor
        return out


class ShiftedPareto(DistributionSpec):
    """[1,∞) 위 Pareto(α)를 0에서 시작하도록 옮긴 분포: S(y) = (1 + y)^{−α}."""

    def __init__(self, alpha: float = 2.0) -> None:
        if not alpha > 0.0:
            raise DomainError(f"Pareto 지수는 양수여야 합니다: {alpha}")
        self.alpha = float(alpha)
        self.name = "pareto"

    def sf(self, x: float) -> float:
        return 1.0 if x <= 0.0 else math.exp(-self.alpha * math.log1p(x))

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else -math.expm1(-self.alpha * math.log1p(x))

    def log_sf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else -self.alpha * math.log1p(x)

    def inverse_sf(self, q: float) -> float:
        if not 0.0 < q <= 1.0:
            raise DomainError(f"inverse_sf 인자는 (0,1] 이어야 합니다: {q}")
        return math.expm1(-math.log(q) / self.alpha)

    def inverse_log_sf(self, t: float) -> float:
        return math.expm1(-t / self.alpha)

    def inverse_sf_array(self, q: np.ndarray) -> np.ndarray:
        return np.expm1(-np.log(q) / self.alpha)


class FrozenScipyLaw(BisectionInverseMixin, DistributionSpec):
    """scipy.stats의 (0, ∞) 지지 연속분포. 역함수는 bisection으로 구한다."""

    def __init__(self, name: str, frozen: Any) -> None:
        lower, _ = frozen.support()
        if lower != 0.0:
            raise DomainError(f"{name}: 지지집합 하한이 0이 아닙니다 ({lower})")
        self.name = name
        self._frozen = frozen

    def sf(self, x: float) -> float:
        return 1.0 if x <= 0.0 else float(self._frozen.sf(x))

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else float(self._frozen.cdf(x))

    def log_sf(self, x: float) -> float:
        return 0.0 if x <= 0.0 else float(self._frozen.logsf(x))


def get_distribution(name: str) -> DistributionSpec:
    """CLI/설정 파일의 분포 이름을 객체로 변환."""
    key = name.strip().lower()
    if key in {"exponential", "exp"}:
        return Exponential()
    if key in {"pareto", "shifted-pareto"}:
        return ShiftedPareto(2.0)
    if key in {"gamma2", "erlang2"}:
        return FrozenScipyLaw("gamma2", stats.gamma(a=2.0))
    if key == "weibull":
        return FrozenScipyLaw("weibull", stats.weibull_min(c=0.5))
    raise DomainError(f"알 수 없는 분포: {name!r} (exponential, pareto, gamma2, weibull)")


AVAILABLE_DISTRIBUTIONS: tuple[str, ...] = ("exponential", "pareto", "gamma2", "weibull")


# ---------------------------------------------------------------------------
# 조건부 분포
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalLaw:
    """𝓛(X | X > floor)."""

    base: DistributionSpec
    floor: float = 0.0

    def __post_init__(self) -> None:
        if not self.base.sf(self.floor) > 0.0:
            raise DomainError(
                f"{self.base.name}: floor={self.floor}에서 cdf = 1 (지지집합 밖)"
            )


def conditional_sample(law: ConditionalLaw, u: float) -> float:
    """역변환으로 𝓛(X | X > floor) 표본 하나를 만든다. u의 결정적 함수."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u는 (0,1) 이어야 합니다: {u}")
    x = law.floor
    if isinstance(law.base, Exponential):
        y = x - math.log1p(-u)
    else:
        y = law.base.inverse_sf(law.base.sf(x) * (1.0 - u))
    if y <= x:
        return math.nextafter(x, math.inf)
    return y


def conditional_cdf(law: ConditionalLaw, y: float) -> float:
    """F(y; x) = (F(y) − F(x)) / (1 − F(x)), [0,1]로 자름."""
    x = law.floor
    if y <= x:
        return 0.0
    if math.isinf(y):
        return 1.0
    if isinstance(law.base, Exponential):
        return -math.expm1(-(y - x))
    ratio = math.exp(law.base.log_sf(y) - law.base.log_sf(x))
    return min(1.0, max(0.0, 1.0 - ratio))


# ---------------------------------------------------------------------------
# 순서통계량 (지수분포 특수화)
# ---------------------------------------------------------------------------


def _exp_conditional(law: OrderStatisticLaw, y: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y, dtype=np.float64) - law.floor
    above = t >= 0.0
    t_clipped = np.where(above, t, 0.0)
    big_f = np.where(above, -np.expm1(-t_clipped), 0.0)
    small_f = np.where(above, np.exp(-t_clipped), 0.0)
    return big_f, small_f


def _as_output(values: np.ndarray, y: ArrayLike) -> float | np.ndarray:
    return float(values) if np.ndim(y) == 0 else values


def order_stat_pdf(law: OrderStatisticLaw, y: ArrayLike) -> float | np.ndarray:
    """f_{n,k}(y;x) = k·C(n,k)·F^{k−1}·f·(1−F)^{n−k}. y < x에서는 0."""
    if not 1 <= law.k <= law.n:
        raise DomainError(f"순서 k는 1..n 이어야 합니다: n={law.n}, k={law.k}")
    big_f, small_f = _exp_conditional(law, y)
    # Beta(k, n−k+1) 밀도가 k·C(n,k)·F^{k−1}(1−F)^{n−k}와 같다
    values = stats.beta.pdf(big_f, law.k, law.n - law.k + 1) * small_f
    below = np.asarray(y, dtype=np.float64) < law.floor
    values = np.where(below, 0.0, values)
    return _as_output(values, y)


def order_stat_cdf(law: OrderStatisticLaw, y: ArrayLike) -> float | np.ndarray:
    """F_{n,k}(y;x) = P(Bin(n, F(y;x)) ≥ k). 규약 F_{n,0}(y;x) = 𝟙_{y≥x}."""
    if not 0 <= law.k <= law.n:
        raise DomainError(f"순서 k는 0..n 이어야 합니다: n={law.n}, k={law.k}")
    y_arr = np.asarray(y, dtype=np.float64)
    if law.k == 0:
        return _as_output(np.where(y_arr >= law.floor, 1.0, 0.0), y)
    big_f, _ = _exp_conditional(law, y)
    # 정규화 불완전 베타 I_F(k, n−k+1)가 이항 꼬리합과 같다
    values = special.betainc(law.k, law.n - law.k + 1, big_f)
    return _as_output(np.clip(values, 0.0, 1.0), y)
