"""커스텀 예외 클래스 모듈

라이브러리와 CLI에서 발생하는 모든 예외의 계층 구조를 정의한다.
각 클래스의 `exit_code`는 CLI 종료 코드로 그대로 쓰인다.
"""

from __future__ import annotations

from typing import Any


class AmsError(Exception):
    """패키지 전체 기본 예외

    모든 커스텀 예외의 부모 클래스.
    """

    exit_code: int = 1

    def __init__(self, message: str = "알 수 없는 오류가 발생했습니다.") -> None:
        self.message = message
        super().__init__(self.message)


class DomainError(AmsError, ValueError):
    """정의역 위반

    p ∉ (0,1), k ∉ {1,…,n−1}, 지지집합 끝을 넘는 floor 등.
    """

    exit_code = 2

    def __init__(self, message: str = "입력값이 정의역을 벗어났습니다.") -> None:
        super().__init__(message)


class ConfigError(DomainError):
    """실험 설정 파일 읽기/검증 실패."""

    def __init__(self, message: str = "실험 설정을 해석할 수 없습니다.") -> None:
        super().__init__(message)


class NumericalError(AmsError):
    """수치 계산 실패

    진단 정보(반복 횟수, 잔차 등)를 `diagnostics`에 담는다.
    """

    exit_code = 3

    def __init__(
        self,
        message: str = "수치 계산 중 오류가 발생했습니다.",
        diagnostics: dict[str, Any] | None = None,
    ) -> None:
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class NonTerminationError(NumericalError):
    """AMS 반복 상한 초과 (P(x) = 0 이거나 수치적 병리)."""

    def __init__(
        self,
        message: str = "AMS가 반복 상한 안에 종료되지 않았습니다.",
        diagnostics: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, diagnostics)


class RootFindingError(NumericalError):
    """특성방정식 근 계산 실패."""

    def __init__(
        self,
        message: str = "특성방정식의 근을 찾지 못했습니다.",
        diagnostics: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, diagnostics)


class SingularSystemError(NumericalError):
    """근 충돌 또는 특이에 가까운 Vandermonde 계."""

    def __init__(
        self,
        message: str = "선형계가 특이에 가깝습니다.",
        diagnostics: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, diagnostics)


class QuadratureError(NumericalError):
    """적응 구적 수렴 실패."""

    def __init__(
        self,
        message: str = "수치 적분이 수렴하지 않았습니다.",
        diagnostics: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, diagnostics)


class AcceptanceError(AmsError):
    """`--check` 모드에서 통계 판정 실패."""

    exit_code = 4

    def __init__(self, message: str = "통계 수용 기준을 통과하지 못했습니다.") -> None:
        super().__init__(message)


class ExportError(AmsError):
    def __init__(self, message: str = "결과 보고서를 저장하지 못했습니다.") -> None:
        super().__init__(message)


class HistoryDBError(AmsError):
    def __init__(
        self,
        message: str = "실행 이력 DB 처리 중 오류가 발생했습니다.",
    ) -> None:
        super().__init__(message)
