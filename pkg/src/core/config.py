"""실험 도구 전역 설정.

값은 OS 환경변수(프로젝트 루트 `.env` 포함), 프로젝트 루트 `ams.toml`,
코드 기본값 순서로 찾는다. 통계 판정 임계값과 수치 허용 오차는 모두 여기서 오며
ExperimentConfig 필드의 기본값도 이 값을 따른다.
"""

from __future__ import annotations

import os
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, TypeVar

from dotenv import load_dotenv

if TYPE_CHECKING:
    from collections.abc import Callable

T = TypeVar("T")

_ROOT = Path(__file__).resolve().parents[2]
load_dotenv(_ROOT / ".env")


def _read_ams_toml() -> dict[str, Any]:
    # 파일이 없거나 깨졌으면 조용히 기본값으로 간다
    try:
        with (_ROOT / "ams.toml").open("rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError):
        return {}


_TOML_SETTINGS = _read_ams_toml()


def _lookup(key: str) -> str | None:
    if (raw := os.environ.get(key)) is not None:
        return raw.strip()
    stored = _TOML_SETTINGS.get(key)
    if isinstance(stored, bool):
        return "true" if stored else "false"
    if isinstance(stored, (str, int, float)):
        return str(stored).strip()
    return None


def _as_int(raw: str) -> int:
    return int(float(raw))


def _as_flag(raw: str) -> bool:
    return raw.lower() in {"1", "true", "yes", "on"}


def _as_path(raw: str) -> Path:
    path = Path(raw)
    return path if path.is_absolute() else _ROOT / path


def _env(key: str, default: T, cast: Callable[[str], T]) -> Callable[[], T]:
    """default_factory용 지연 조회. 변환 실패나 빈 값은 기본값."""

    def factory() -> T:
        raw = _lookup(key)
        if not raw:
            return default
        try:
            return cast(raw)
        except ValueError:
            return default

    return factory


@dataclass(frozen=True)
class Settings:
    """프로세스 전역 설정 (불변)."""

    debug: bool = field(default_factory=_env("AMS_DEBUG", False, _as_flag))

    # 재현성
    default_seed: int = field(default_factory=_env("AMS_SEED", 20150101, _as_int))
    workers: int = field(default_factory=_env("AMS_WORKERS", 1, _as_int))
    chunk_size: int = field(default_factory=_env("AMS_CHUNK_SIZE", 2000, _as_int))

    history_db_path: Path = field(
        default_factory=_env("AMS_HISTORY_DB", _ROOT / "data" / "history.db", _as_path)
    )
    history_enabled: bool = field(
        default_factory=_env("AMS_HISTORY_ENABLED", True, lambda raw: raw.lower() != "false")
    )

    # 통계 판정
    alpha: float = field(default_factory=_env("AMS_ALPHA", 0.01, float))
    se_multiplier: float = field(default_factory=_env("AMS_SE_MULTIPLIER", 4.0, float))
    slope_tolerance: float = field(default_factory=_env("AMS_SLOPE_TOLERANCE", 0.20, float))
    variance_tolerance: float = field(
        default_factory=_env("AMS_VARIANCE_TOLERANCE", 0.10, float)
    )
    ks_max_distance: float = field(default_factory=_env("AMS_KS_MAX_DISTANCE", 0.02, float))
    residual_tolerance: float = field(
        default_factory=_env("AMS_RESIDUAL_TOLERANCE", 1e-8, float)
    )
    route_tolerance: float = field(default_factory=_env("AMS_ROUTE_TOLERANCE", 1e-10, float))
    log_laplace_tolerance: float = field(
        default_factory=_env("AMS_LOG_LAPLACE_TOLERANCE", 0.02, float)
    )
    gamma_limit_tolerance: float = field(
        default_factory=_env("AMS_GAMMA_LIMIT_TOLERANCE", 0.05, float)
    )

    # 수치 계산
    bisection_tolerance: float = field(
        default_factory=_env("AMS_BISECTION_TOLERANCE", 1e-12, float)
    )
    root_tolerance: float = field(default_factory=_env("AMS_ROOT_TOLERANCE", 1e-13, float))
    root_max_iterations: int = field(
        default_factory=_env("AMS_ROOT_MAX_ITERATIONS", 500, _as_int)
    )
    quad_tolerance: float = field(default_factory=_env("AMS_QUAD_TOLERANCE", 1e-11, float))
    imag_tolerance: float = field(default_factory=_env("AMS_IMAG_TOLERANCE", 1e-10, float))
    max_iterations_fallback: int = field(
        default_factory=_env("AMS_MAX_ITERATIONS_FALLBACK", 10**8, _as_int)
    )


settings = Settings()

VERSION = "0.1.0"
