"""대편차 율함수와 점근 공식.

- AMS: I(y) = log y · log(log p / log y) + log(y/p),  J(z) = I(e^z)
- 극한 척도 로그 라플라스 Λ(λ) = −log p·(e^{−λ} − 1) 과 르장드르 변환 Λ*
- 단순 MC: 베르누이 율함수 𝓘(y)
- 고정 수준 분할: 𝓘_N (단계 확률 p^{1/N}) 과 상계 N·𝓘_N(y^{1/N})

율함수 자체(I, J, Λ*, 𝓘, 𝓘_N, 상계)는 정의역 밖에서 math.inf (확장 실수 +∞)를 돌려준다.
큰 유한 값으로 대신하지 않는다. 율함수의 차이나 도함수(D, ∂D/∂p, I', I'')는 y ∉ (0,1)에서
∞ − ∞ 꼴이 되어 값이 없으므로 DomainError를 낸다. p ∉ (0,1)은 어디서나 DomainError.
log(log p) − log(log y)는 음수의 로그를 피하려고 log(log p / log y)로 계산한다.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import mpmath
from scipy import optimize

from src.core.exceptions import DomainError
from src.data.models import RateFunctionPoint

if TYPE_CHECKING:
    from collections.abc import Callable

logger = logging.getLogger(__name__)

_PRECISE_DIGITS = 50

RATE_NAMES: tuple[str, ...] = (
    "I",
    "J",
    "Lambda",
    "Lambda*",
    "crude",
    "fixed",
    "fixed-bound",
    "D",
    "dD/dp",
    "I'",
    "I''",
)


def _check_p(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"p는 (0,1) 이어야 합니다: {p}")
    return math.log(p)


def _check_levels(levels: int) -> None:
    if levels < 1:
        raise DomainError(f"수준 수 N은 1 이상이어야 합니다: {levels}")


def _in_unit_interval(y: float) -> bool:
    return 0.0 < y < 1.0


# ---------------------------------------------------------------------------
# AMS
# ---------------------------------------------------------------------------


def rate_I(y: float, p: float) -> float:  # noqa: N802
    log_p = _check_p(p)
    if not _in_unit_interval(y):
        return math.inf
    log_y = math.log(y)
    return log_y * math.log(log_p / log_y) + (log_y - log_p)


def rate_J(z: float, p: float) -> float:  # noqa: N802
    """log p̂의 율함수. z ≥ 0이면 +∞."""
    log_p = _check_p(p)
    if z >= 0.0:
        return math.inf
    return z - log_p - z * math.log(z / log_p)


def log_laplace_limit(lam: float, p: float) -> float:
    """Λ(λ) = −log p·(e^{−λ} − 1) = log E[exp(−λR)], R ~ Poisson(−log p)."""
    log_p = _check_p(p)
    return -log_p * math.expm1(-lam)


def _legendre_objective(z: float, p: float) -> Callable[[float], float]:
    return lambda lam: lam * z - log_laplace_limit(lam, p)


def _diverges(objective: Callable[[float], float]) -> bool:
    """λ = 2^j 탐침에서 목적함수가 선형 이상으로 계속 커지는지."""
    probes = [objective(2.0**j) for j in range(0, 64, 4)]
    increasing = all(b > a for a, b in zip(probes, probes[1:], strict=False))
    return increasing and probes[-1] > 2.0**50 * (probes[1] - probes[0]) / 15.0


def lambda_star(z: float, p: float, route: str = "closed") -> float:
    """Λ*(z) = sup_λ (λz − Λ(λ)).

    route="closed"는 닫힌 형태 (= J(z)), route="numeric"은 정류점
    λ_z = −log(z / log p) 주변에서 유계 Brent 최대화로 상한을 구한다.
    z = 0에서 상한은 도달되지 않는 극한 −log p이고, numeric 경로는 이 값을 돌려준다.
    """
    log_p = _check_p(p)
    if route == "closed":
        return math.inf if z >= 0.0 else rate_J(z, p)
    if route != "numeric":
        raise DomainError(f"알 수 없는 경로: {route!r} (closed, numeric)")

    objective = _legendre_objective(z, p)
    if z > 0.0:
        if _diverges(objective):
            return math.inf
        logger.warning("Λ* 발산 탐침 실패: z=%g p=%g", z, p)
        return math.inf
    if z == 0.0:
        return -log_p

    stationary = -math.log(z / log_p)
    found = optimize.minimize_scalar(
        lambda lam: -objective(lam),
        bounds=(stationary - 1.0, stationary + 1.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(objective(float(found.x)), objective(stationary))


# ---------------------------------------------------------------------------
# 비교 기준
# ---------------------------------------------------------------------------


def _bernoulli_rate(
    y: float,
    log_y: float,
    log_q: float,
    one_minus_y: float,
    log_one_minus_y: float,
    log_one_minus_q: float,
) -> float:
    return y * (log_y - log_q) + one_minus_y * (log_one_minus_y - log_one_minus_q)


def rate_crude(y: float, p: float) -> float:
    """𝓘(y) = y log(y/p) + (1−y) log((1−y)/(1−p))."""
    log_p = _check_p(p)
    if not _in_unit_interval(y):
        return math.inf
    return _bernoulli_rate(y, math.log(y), log_p, 1.0 - y, math.log1p(-y), math.log1p(-p))


def rate_fixed_N(y: float, p: float, levels: int) -> float:  # noqa: N802
    """단계 확률 q = p^{1/N}인 베르누이 율함수 𝓘_N(y)."""
    log_p = _check_p(p)
    _check_levels(levels)
    if not _in_unit_interval(y):
        return math.inf
    log_q = log_p / levels
    return _bernoulli_rate(
        y, math.log(y), log_q, 1.0 - y, math.log1p(-y), math.log(-math.expm1(log_q))
    )


def fixed_upper_bound(y: float, p: float, levels: int) -> float:
    """N·𝓘_N(y^{1/N}). N → ∞에서 I(y)로 수렴한다."""
    log_p = _check_p(p)
    _check_levels(levels)
    if not _in_unit_interval(y):
        return math.inf
    log_root = math.log(y) / levels
    one_minus_root = -math.expm1(log_root)
    log_q = log_p / levels
    return levels * _bernoulli_rate(
        math.exp(log_root),
        log_root,
        log_q,
        one_minus_root,
        math.log(one_minus_root),
        math.log(-math.expm1(log_q)),
    )


def comparison_D(y: float, p: float) -> float:  # noqa: N802
    """D(y, p) = I(y) − 𝓘(y) ≥ 0, 등호는 y = p에서만.

    y ∉ (0,1)이면 두 율함수가 모두 +∞라 차이가 정의되지 않으므로 DomainError.
    """
    _check_p(p)
    if not _in_unit_interval(y):
        raise DomainError(f"y는 (0,1) 이어야 합니다: {y}")
    return rate_I(y, p) - rate_crude(y, p)


def comparison_D_partial_p(y: float, p: float) -> float:  # noqa: N802
    """∂D/∂p = ((1−y)/(p log p))·(log y/(1−y) − log p/(1−p))."""
    log_p = _check_p(p)
    if not _in_unit_interval(y):
        raise DomainError(f"y는 (0,1) 이어야 합니다: {y}")
    return ((1.0 - y) / (p * log_p)) * (math.log(y) / (1.0 - y) - log_p / (1.0 - p))


class SmallPRates(NamedTuple):
    ams_exact: float
    ams_asymptotic: float
    crude_exact: float
    crude_asymptotic: float

    @property
    def ams_ratio(self) -> float:
        return self.ams_exact / self.ams_asymptotic

    @property
    def crude_ratio(self) -> float:
        return self.crude_exact / self.crude_asymptotic


def small_p_relative_rates(eps: float, p: float) -> SmallPRates:
    """y = p(1+ε)에서의 두 율함수와 p → 0 점근 등가식.

    I(p(1+ε)) ~ (log(1+ε))² / (−2 log p),  𝓘(p(1+ε)) ~ p((1+ε) log(1+ε) − ε).
    """
    log_p = _check_p(p)
    if not 0.0 < eps < 1.0:
        raise DomainError(f"ε는 (0,1) 이어야 합니다: {eps}")
    y = p * (1.0 + eps)
    if y >= 1.0:
        raise DomainError(f"p(1+ε) = {y} ≥ 1")
    log_ratio = math.log1p(eps)
    return SmallPRates(
        ams_exact=rate_I(y, p),
        ams_asymptotic=log_ratio**2 / (-2.0 * log_p),
        crude_exact=rate_crude(y, p),
        crude_asymptotic=p * ((1.0 + eps) * log_ratio - eps),
    )


def rate_I_derivatives(y: float, p: float) -> tuple[float, float]:  # noqa: N802
    """(I'(y), I''(y)).

    I'(y) = log(log p / log y) / y
    I''(y) = −log(log p / log y) / y² − 1 / (y² log y)
    """
    log_p = _check_p(p)
    if not _in_unit_interval(y):
        raise DomainError(f"y는 (0,1) 이어야 합니다: {y}")
    log_y = math.log(y)
    ratio_log = math.log(log_p / log_y)
    first = ratio_log / y
    second = -ratio_log / (y * y) - 1.0 / (y * y * log_y)
    return first, second


# ---------------------------------------------------------------------------
# 점근 분산과 작업량
# ---------------------------------------------------------------------------


def ams_asymptotic_variance(p: float) -> float:
    """lim n·Var(p̂^{n,k}) = −p² log p."""
    return -p * p * _check_p(p)


def crude_variance(p: float) -> float:
    _check_p(p)
    return p * (1.0 - p)


def fixed_level_variance(p: float, levels: int) -> float:
    """최적 N단계 분할의 n·Var = p²·N·(p^{−1/N} − 1)."""
    log_p = _check_p(p)
    _check_levels(levels)
    return p * p * levels * math.expm1(-log_p / levels)


def expected_ams_iterations(n: int, k: int, p: float) -> float:
    return -n * _check_p(p) / k


# ---------------------------------------------------------------------------
# 이름 기반 평가 (CLI rate-eval)
# ---------------------------------------------------------------------------


def _float_point(name: str, arg: float, p: float, levels: int) -> float:
    if name == "I":
        return rate_I(arg, p)
    if name == "J":
        return rate_J(arg, p)
    if name == "Lambda":
        return log_laplace_limit(arg, p)
    if name == "Lambda*":
        return lambda_star(arg, p)
    if name == "crude":
        return rate_crude(arg, p)
    if name == "fixed":
        return rate_fixed_N(arg, p, levels)
    if name == "fixed-bound":
        return fixed_upper_bound(arg, p, levels)
    if name == "D":
        return comparison_D(arg, p)
    if name == "dD/dp":
        return comparison_D_partial_p(arg, p)
    if name == "I'":
        return rate_I_derivatives(arg, p)[0]
    if name == "I''":
        return rate_I_derivatives(arg, p)[1]
    raise DomainError(f"알 수 없는 율함수: {name!r} ({', '.join(RATE_NAMES)})")


def _mp_bernoulli(y: mpmath.mpf, q: mpmath.mpf) -> mpmath.mpf:
    return y * mpmath.log(y / q) + (1 - y) * mpmath.log((1 - y) / (1 - q))


def _precise_point(name: str, arg: float, p: float, levels: int) -> float:
    """50자리 mpmath 평가. 정의역 판정은 float 경로와 같다."""
    _check_p(p)
    if name not in RATE_NAMES:
        raise DomainError(f"알 수 없는 율함수: {name!r} ({', '.join(RATE_NAMES)})")
    unit_names = {"I", "crude", "fixed", "fixed-bound", "D", "dD/dp", "I'", "I''"}
    if name in unit_names and not _in_unit_interval(arg):
        if name in {"D", "dD/dp", "I'", "I''"}:
            raise DomainError(f"y는 (0,1) 이어야 합니다: {arg}")
        return math.inf
    if name in {"J", "Lambda*"} and arg >= 0.0:
        return math.inf
    if name in {"fixed", "fixed-bound"}:
        _check_levels(levels)

    with mpmath.workdps(_PRECISE_DIGITS):
        x = mpmath.mpf(arg)
        mp_p = mpmath.mpf(p)
        lp = mpmath.log(mp_p)
        if name == "I":
            ly = mpmath.log(x)
            value = ly * mpmath.log(lp / ly) + ly - lp
        elif name in {"J", "Lambda*"}:
            value = x - lp - x * mpmath.log(x / lp)
        elif name == "Lambda":
            value = -lp * mpmath.expm1(-x)
        elif name == "crude":
            value = _mp_bernoulli(x, mp_p)
        elif name == "fixed":
            value = _mp_bernoulli(x, mpmath.exp(lp / levels))
        elif name == "fixed-bound":
            value = levels * _mp_bernoulli(
                mpmath.exp(mpmath.log(x) / levels), mpmath.exp(lp / levels)
            )
        elif name == "D":
            ly = mpmath.log(x)
            value = ly * mpmath.log(lp / ly) + ly - lp - _mp_bernoulli(x, mp_p)
        elif name == "dD/dp":
            value = ((1 - x) / (mp_p * lp)) * (mpmath.log(x) / (1 - x) - lp / (1 - mp_p))
        elif name == "I'":
            value = mpmath.log(lp / mpmath.log(x)) / x
        else:
            ly = mpmath.log(x)
            value = -mpmath.log(lp / ly) / x**2 - 1 / (x**2 * ly)
        return float(value)


def evaluate_rate(
    name: str, argument: float, p: float, levels: int = 1, *, precise: bool = False
) -> RateFunctionPoint:
    """율함수 이름으로 평가해 RateFunctionPoint를 만든다."""
    if precise:
        value = _precise_point(name, argument, p, levels)
    else:
        value = _float_point(name, argument, p, levels)
    return RateFunctionPoint(
        name=name,
        argument=argument,
        p=p,
        value=value,
        in_domain=math.isfinite(value),
        levels=levels if name in {"fixed", "fixed-bound"} else None,
    )
