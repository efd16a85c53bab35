"""AMS 추정기의 라플라스 변환 Γ_{n,k}(λ; x) = E[exp(nλ log p̂^{n,k}(x))] (지수분포).

Γ는 [0, a]에서 함수방정식

    Γ(x) = c·∫_x^a Γ(y) f_{n,k}(y; x) dy + Θ_{n,k}(λ; x),   c = exp(nλ log(1 − k/n))

의 해이고, 같은 해가 k계 상수계수 선형 ODE를 만족한다. 특성방정식

    (n − ν)(n − 1 − ν)…(n − k + 1 − ν) / (n(n−1)…(n−k+1)) = c

의 근 ν^ℓ와 계수 γ^ℓ로 Γ(x) = Σ_ℓ γ^ℓ exp(ν^ℓ (x − a))가 된다. 계수는 x = a에서
Γ와 Θ의 0..k−1계 도함수가 같다는 경계조건에서 나온다.

계산은 척도 변수 ν̄ = ν/n, n^{−m}·d^mΘ에서 한다.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate
from scipy.optimize import linear_sum_assignment

from src.core.config import settings
from src.core.exceptions import (
    DomainError,
    NumericalError,
    QuadratureError,
    RootFindingError,
    SingularSystemError,
)
from src.data.models import (
    AmsConfig,
    BoundaryDerivatives,
    GammaEstimate,
    OdeCoefficients,
    OrderStatisticLaw,
)
from src.sim.dist import Exponential, order_stat_cdf, order_stat_pdf
from src.sim.splitting import replicate_ams, resolve_engine

if TYPE_CHECKING:
    from collections.abc import Callable

logger = logging.getLogger(__name__)

# 특성방정식 잔차 허용치
_ROOT_RESIDUAL = 1e-10
_MAX_CONDITION = 1e12


def _check_rank(n: int, k: int) -> None:
    if n < 2 or not 1 <= k <= n - 1:
        raise DomainError(f"1 ≤ k ≤ n−1 이어야 합니다: n={n}, k={k}")


def _check_interval(x: float, a: float) -> None:
    if not 0.0 <= x <= a:
        raise DomainError(f"0 ≤ x ≤ a 이어야 합니다: x={x}, a={a}")


def _weights(n: int, k: int, lam: float) -> np.ndarray:
    """w_ℓ = exp(nλ log(1 − ℓ/n)), ℓ = 0..k−1."""
    ell = np.arange(k, dtype=np.float64)
    return np.exp(n * lam * np.log1p(-ell / n))


def characteristic_constant(n: int, k: int, lam: float) -> float:
    return math.exp(n * lam * math.log1p(-k / n))


# ---------------------------------------------------------------------------
# Θ와 ODE 계수
# ---------------------------------------------------------------------------


def theta(n: int, k: int, lam: float, x: float, a: float) -> float:
    """Θ_{n,k}(λ; x) = Σ_{ℓ<k} w_ℓ (F_{n,ℓ}(a; x) − F_{n,ℓ+1}(a; x)).

    첫 반복 전에 알고리즘이 멈추는 사건 {J = 0}에 대한 기여분이다.
    """
    _check_rank(n, k)
    _check_interval(x, a)
    cdfs = [
        float(order_stat_cdf(OrderStatisticLaw(n=n, k=ell, floor=x), a)) for ell in range(k + 1)
    ]
    gaps = np.diff(-np.asarray(cdfs))
    return float(np.dot(_weights(n, k, lam), gaps))


def _expand_product(n: int, k: int) -> list[int]:
    """∏_{j<k}(ν − n + j)의 계수 (오름차순, 정수)."""
    coefficients = [1]
    for j in range(k):
        root = n - j
        shifted = [0, *coefficients]
        scaled = [-root * c for c in coefficients] + [0]
        coefficients = [s + t for s, t in zip(shifted, scaled, strict=True)]
    return coefficients


def ode_coefficients(n: int, k: int) -> OdeCoefficients:
    """μ^{n,k}와 r_m^{n,k}를 단계 l = 0..k−1 점화식으로 정확히 계산한다.

    r_{·,l}은 P_l(ν) = −Σ_m r_{m,l} ν^m 의 계수이고 최고차 r_{l,l} = −1 로 둔다.
    P_{l+1}(ν) = (ν − (n−k+l+1))·P_l(ν), μ_{l+1} = −(n−k+l+1)·μ_l.
    결과는 전개식 ∏(ν − n + j)와 비교해 검증한다.
    """
    _check_rank(n, k)
    mu = 1
    r = [-1]
    for step in range(k):
        factor = n - k + step + 1
        updated = [(r[m - 1] if m >= 1 else 0) - factor * r[m] for m in range(step + 1)]
        r = [*updated, -1]
        mu = -factor * mu

    lower = r[:k]
    expected = _expand_product(n, k)
    recovered = [-c for c in lower] + [1]
    if recovered != expected:
        raise NumericalError(
            "ODE 계수 점화식이 다항식 전개와 다릅니다",
            diagnostics={"n": n, "k": k, "recursion": recovered, "expansion": expected},
        )
    return OdeCoefficients(n=n, k=k, mu=mu, r=lower)


def characteristic_polynomial(n: int, k: int, lam: float) -> np.ndarray:
    """ν̄의 모닉 특성다항식 계수 (내림차순)."""
    _check_rank(n, k)
    bases = 1.0 - np.arange(k, dtype=np.float64) / n
    coefficients = np.poly(bases).astype(np.float64)
    coefficients[-1] -= (-1) ** k * characteristic_constant(n, k, lam) * float(np.prod(bases))
    return coefficients


# ---------------------------------------------------------------------------
# 경계 도함수
# ---------------------------------------------------------------------------


def _differentiate(coef: list[int], n: int) -> list[int]:
    """Σ c_j f_{n,j} 의 x 도함수. d/dx f_j = (n−j+1)(f_j − f_{j−1}), f_0 = 0."""
    out = [0] * len(coef)
    for j in range(1, len(coef)):
        if coef[j] == 0:
            continue
        factor = (n - j + 1) * coef[j]
        out[j] += factor
        if j >= 2:
            out[j - 1] -= factor
    return out


def boundary_derivatives(n: int, k: int, lam: float) -> tuple[BoundaryDerivatives, list[float]]:
    """B[m][ℓ]와 d^mΘ/dx^m|_{x=a} (m = 0..k−1).

    G_ℓ = F_{n,ℓ} − F_{n,ℓ+1}을 f_{n,1..k}의 정수 선형결합으로 두고 도함수를
    반복 적용한 뒤, f_{n,j}(a; a) = n·𝟙_{j=1}로 평가한다. 지수분포의 평행이동
    불변성 때문에 결과는 a와 무관하다.
    """
    _check_rank(n, k)
    matrix = [[0] * k for _ in range(k)]
    matrix[0][0] = 1
    for ell in range(k):
        # dG_ℓ/dx = f_{ℓ+1} − f_ℓ
        coef = [0] * (k + 1)
        coef[ell + 1] += 1
        if ell >= 1:
            coef[ell] -= 1
        for m in range(1, k):
            matrix[m][ell] = n * coef[1]
            coef = _differentiate(coef, n)

    weights = _weights(n, k, lam)
    derivatives = [
        float(sum(float(w) * b for w, b in zip(weights, row, strict=True))) for row in matrix
    ]
    return BoundaryDerivatives(n=n, k=k, matrix=matrix), derivatives


def _scaled_derivatives(table: BoundaryDerivatives, lam: float) -> np.ndarray:
    """n^{−m}·d^mΘ. B[m][ℓ]/n^m을 유리수로 나눈 뒤 가중합한다."""
    weights = _weights(table.n, table.k, lam)
    return np.array(
        [
            sum(
                float(w) * float(Fraction(b, table.n**m))
                for w, b in zip(weights, row, strict=True)
            )
            for m, row in enumerate(table.matrix)
        ],
        dtype=np.float64,
    )


# ---------------------------------------------------------------------------
# 특성근과 계수
# ---------------------------------------------------------------------------


def root_limits(k: int, lam: float) -> np.ndarray:
    """ν̄^ℓ의 극한 1 − e^{−λ} e^{i2πℓ/k}, ℓ = 0..k−1."""
    angles = 2.0 * np.pi * np.arange(k) / k
    return 1.0 - np.exp(-lam) * np.exp(1j * angles)


def _scaled_residual(n: int, k: int, lam: float, scaled_roots: np.ndarray) -> np.ndarray:
    bases = 1.0 - np.arange(k, dtype=np.float64) / n
    ratio = np.prod((bases[None, :] - scaled_roots[:, None]) / bases[None, :], axis=1)
    return np.abs(ratio - characteristic_constant(n, k, lam))


def _durand_kerner(
    bases: np.ndarray, constant: complex, start: np.ndarray
) -> tuple[np.ndarray, int, float]:
    z = start.astype(np.complex128)
    step = math.inf
    for iteration in range(1, settings.root_max_iterations + 1):
        value = np.prod(z[:, None] - bases[None, :], axis=1) - constant
        spread = z[:, None] - z[None, :]
        np.fill_diagonal(spread, 1.0)
        delta = value / np.prod(spread, axis=1)
        z = z - delta
        step = float(np.max(np.abs(delta)))
        if step <= settings.root_tolerance * max(1.0, float(np.max(np.abs(z)))):
            return z, iteration, step
    raise RootFindingError(
        "Durand–Kerner 반복이 수렴하지 않았습니다",
        diagnostics={"iterations": settings.root_max_iterations, "last_step": step},
    )


def characteristic_roots(n: int, k: int, lam: float) -> np.ndarray:
    """특성근 ν^ℓ (ℓ = 0..k−1). 극한점 n(1 − e^{−λ}e^{i2πℓ/k})과 짝지어 정렬한다.

    Raises:
        RootFindingError: 반복 미수렴 또는 잔차가 1e−10 이상.
    """
    _check_rank(n, k)
    if k == 1:
        return np.array([-n * math.expm1(n * lam * math.log1p(-1.0 / n))], dtype=np.complex128)

    bases = 1.0 - np.arange(k, dtype=np.float64) / n
    constant = (-1) ** k * characteristic_constant(n, k, lam) * float(np.prod(bases))
    limits = root_limits(k, lam)
    scaled, iterations, step = _durand_kerner(bases, constant, limits)

    cost = np.abs(scaled[:, None] - limits[None, :])
    rows, cols = linear_sum_assignment(cost)
    ordered = np.empty(k, dtype=np.complex128)
    ordered[cols] = scaled[rows]

    residual = _scaled_residual(n, k, lam, ordered)
    if float(residual.max()) >= _ROOT_RESIDUAL:
        raise RootFindingError(
            "특성방정식 잔차가 허용치를 넘었습니다",
            diagnostics={"n": n, "k": k, "lambda": lam, "residual": float(residual.max())},
        )
    logger.debug("특성근: n=%d k=%d λ=%g 반복=%d 마지막 보정=%.2e", n, k, lam, iterations, step)
    return n * ordered


def solve_gamma(
    roots: np.ndarray, theta_derivatives: list[float] | np.ndarray, n: int
) -> np.ndarray:
    """Σ_ℓ γ^ℓ (ν̄^ℓ)^m = n^{−m}·d^mΘ (m = 0..k−1)를 푼다.

    Raises:
        SingularSystemError: 근이 겹치거나 방정식이 특이에 가까울 때.
    """
    scaled = np.asarray(roots, dtype=np.complex128) / n
    k = scaled.size
    rhs = np.asarray(theta_derivatives, dtype=np.float64) / float(n) ** np.arange(k)
    return _solve_scaled(scaled, rhs)


def _solve_scaled(scaled: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = scaled.size
    if k > 1:
        spread = np.abs(scaled[:, None] - scaled[None, :]) + np.eye(k)
        if float(spread.min()) < 1e-12:
            raise SingularSystemError(
                "특성근이 겹칩니다", diagnostics={"min_gap": float(spread.min())}
            )
    system = np.vander(scaled, k, increasing=True).T
    condition = float(np.linalg.cond(system))
    if not condition < _MAX_CONDITION:
        raise SingularSystemError(
            "계수 연립방정식이 특이에 가깝습니다", diagnostics={"condition": condition}
        )
    try:
        return np.linalg.solve(system, rhs.astype(np.complex128))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"선형 풀이 실패: {exc}") from exc


@dataclass(frozen=True)
class CharacteristicSolution:
    """ODE 해 Γ(x) = Σ γ^ℓ exp(ν^ℓ (x − a))."""

    n: int
    k: int
    lam: float
    roots: tuple[complex, ...]
    coefficients: tuple[complex, ...]

    def _terms(self, x: float | np.ndarray, a: float, order: int = 0) -> np.ndarray:
        nu = np.asarray(self.roots, dtype=np.complex128)
        gamma = np.asarray(self.coefficients, dtype=np.complex128)
        shift = np.asarray(x, dtype=np.float64)[..., None] - a
        return gamma * nu**order * np.exp(nu * shift)

    def _real(self, value: np.ndarray) -> np.ndarray:
        residue = float(np.max(np.abs(value.imag))) if value.size else 0.0
        scale = max(1.0, float(np.max(np.abs(value.real)))) if value.size else 1.0
        if residue >= settings.imag_tolerance * scale:
            raise NumericalError(
                "Γ 재구성의 허수부가 허용치를 넘었습니다",
                diagnostics={"imag": residue, "n": self.n, "k": self.k, "lambda": self.lam},
            )
        return value.real

    def evaluate(self, x: float | np.ndarray, a: float) -> float | np.ndarray:
        values = self._real(np.sum(self._terms(x, a), axis=-1))
        return float(values) if np.ndim(x) == 0 else values

    def derivative(self, order: int, x: float | np.ndarray, a: float) -> float | np.ndarray:
        values = self._real(np.sum(self._terms(x, a, order), axis=-1))
        return float(values) if np.ndim(x) == 0 else values

    def log_evaluate(self, x: float, a: float) -> float:
        """log Γ(x). 주 근 ν^0을 인수로 빼내 큰 n에서도 언더플로 없이 계산한다."""
        nu = np.asarray(self.roots, dtype=np.complex128)
        gamma = np.asarray(self.coefficients, dtype=np.complex128)
        shift = x - a
        inner = np.sum(gamma * np.exp((nu - nu[0]) * shift))
        inner_real = float(self._real(np.array([inner]))[0])
        if not inner_real > 0.0:
            raise NumericalError(
                "log Γ 인수가 양수가 아닙니다", diagnostics={"inner": inner_real, "x": x}
            )
        return float(nu[0].real) * shift + math.log(inner_real)


def characteristic_solution(n: int, k: int, lam: float) -> CharacteristicSolution:
    roots = characteristic_roots(n, k, lam)
    table, _ = boundary_derivatives(n, k, lam)
    coefficients = _solve_scaled(roots / n, _scaled_derivatives(table, lam))
    return CharacteristicSolution(
        n=n,
        k=k,
        lam=lam,
        roots=tuple(complex(v) for v in roots),
        coefficients=tuple(complex(v) for v in coefficients),
    )


# ---------------------------------------------------------------------------
# Γ 세 경로
# ---------------------------------------------------------------------------


def gamma_transform(
    n: int,
    k: int,
    lam: float,
    x: float,
    a: float,
    route: str = "ode",
    *,
    reps: int = 100_000,
    seed: int | None = None,
    engine: str = "auto",
    workers: int = 1,
    chunk_size: int | None = None,
) -> GammaEstimate:
    """Γ_{n,k}(λ; x).

    route:
        closed: k = 1 전용 exp(ν(x − a)), ν = n(1 − exp(nλ log(1 − 1/n))).
        ode: 특성근 표현.
        mc: M회 AMS 실행의 exp(nλ log p̂) 표본평균과 표준오차.
            auto는 exact로 풀린다. poisson 엔진은 닫힌꼴 법칙에서 J를 뽑으므로 받지 않는다.
    """
    _check_rank(n, k)
    _check_interval(x, a)
    if route not in {"closed", "ode", "mc"}:
        raise DomainError(f"알 수 없는 경로: {route!r} (closed, ode, mc)")

    if x == a or lam == 0.0:
        return GammaEstimate(route=route, value=1.0, standard_error=0.0 if route == "mc" else None)

    if route == "closed":
        if k != 1:
            raise DomainError(f"closed 경로는 k = 1 전용입니다: k={k}")
        nu = float(characteristic_roots(n, 1, lam)[0].real)
        return GammaEstimate(route="closed", value=math.exp(nu * (x - a)))

    if route == "ode":
        solution = characteristic_solution(n, k, lam)
        return GammaEstimate(route="ode", value=float(solution.evaluate(x, a)))

    resolved = resolve_engine(engine)
    if resolved == "poisson":
        raise DomainError("mc 경로는 반복 실행 엔진(exact, renewal)만 씁니다: poisson")
    ensemble = replicate_ams(
        AmsConfig(n=n, k=k, a=a, x=x),
        Exponential(),
        reps,
        settings.default_seed if seed is None else seed,
        engine=resolved,
        workers=workers,
        chunk_size=chunk_size,
    )
    samples = np.exp(n * lam * ensemble.log_estimates)
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    if not se < 0.5 * abs(mean):
        logger.warning(
            "Γ MC 추정의 상대 표준오차가 큽니다: 평균=%.4g SE=%.4g (n=%d k=%d λ=%g)",
            mean,
            se,
            n,
            k,
            lam,
        )
    return GammaEstimate(route="mc", value=mean, standard_error=se, replications=reps)


def functional_equation_residual(
    n: int,
    k: int,
    lam: float,
    a: float,
    gamma: Callable[[float], float],
    *,
    grid_points: int = 21,
) -> float:
    """max_x |Γ(x) − c∫_x^a Γ(y) f_{n,k}(y; x) dy − Θ(x)| (x는 [0, a] 등간격 격자).

    Raises:
        QuadratureError: 적분이 허용 오차 안에서 수렴하지 않을 때.
    """
    _check_rank(n, k)
    constant = characteristic_constant(n, k, lam)
    worst = 0.0
    for x in np.linspace(0.0, a, grid_points):
        x = float(x)
        law = OrderStatisticLaw(n=n, k=k, floor=x)
        integral = 0.0
        if x < a:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", integrate.IntegrationWarning)
                    integral, _ = integrate.quad(
                        lambda y, law=law: gamma(y) * float(order_stat_pdf(law, y)),
                        x,
                        a,
                        epsabs=settings.quad_tolerance,
                        epsrel=settings.quad_tolerance,
                        limit=200,
                    )
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(
                    f"적분 미수렴: {exc}", diagnostics={"x": x, "n": n, "k": k, "lambda": lam}
                ) from exc
        residual = abs(gamma(x) - constant * integral - theta(n, k, lam, x, a))
        worst = max(worst, residual)
    return worst


def scaled_log_laplace(n: int, k: int, lam: float, p: float) -> float:
    """(1/n)·log Γ_{n,k}(λ; 0), a = −log p. n → ∞에서 Λ(λ)로 수렴한다."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p는 (0,1) 이어야 합니다: {p}")
    _check_rank(n, k)
    if lam == 0.0:
        return 0.0
    solution = characteristic_solution(n, k, lam)
    return solution.log_evaluate(0.0, -math.log(p)) / n
