"""실험 설정 파일 로더 — 평면 TOML/JSON 문서를 ExperimentConfig로 변환.

키 이름은 CLI 플래그, 기호 표기, snake_case 등 여러 형태를 허용한다.
CLI에서 준 값이 파일 값을 덮어쓴다.
"""

from __future__ import annotations

import json
import logging
import tomllib
from typing import TYPE_CHECKING, Any

from pydantic import ValidationError

from src.core.exceptions import ConfigError
from src.data.models import ExperimentConfig

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path

logger = logging.getLogger(__name__)

# ExperimentConfig 필드명 → 허용하는 키 이름
_KEY_ALIASES: dict[str, list[str]] = {
    "kind": ["kind", "experiment", "command"],
    "estimator": ["estimator", "method"],
    "n_grid": ["n_grid", "n", "ns", "n-grid"],
    "k": ["k"],
    "p": ["p", "probability", "target_p"],
    "threshold": ["threshold", "a"],
    "dist": ["dist", "distribution"],
    "reference_dist": ["reference_dist", "reference-dist", "reference"],
    "levels": ["levels", "N", "fixed_levels"],
    "lambda_grid": ["lambda_grid", "lambda", "lam", "lambdas"],
    "eps": ["eps", "epsilon", "ε"],
    "sigma": ["sigma", "σ"],
    "reps": ["reps", "M", "replications"],
    "seed": ["seed", "master_seed"],
    "workers": ["workers", "jobs"],
    "chunk_size": ["chunk_size", "chunk-size"],
    "engine": ["engine"],
    "out": ["out", "output"],
    "fmt": ["fmt", "format"],
    "check": ["check"],
    "alpha": ["alpha", "α"],
    "se_multiplier": ["se_multiplier", "se-multiplier"],
    "slope_tolerance": ["slope_tolerance", "slope-tolerance"],
    "variance_tolerance": ["variance_tolerance", "variance-tolerance"],
    "ks_max_distance": ["ks_max_distance", "ks-max-distance", "ks_max"],
    "residual_tolerance": ["residual_tolerance", "residual-tolerance"],
    "route_tolerance": ["route_tolerance", "route-tolerance"],
    "log_laplace_tolerance": ["log_laplace_tolerance", "log-laplace-tolerance"],
    "gamma_limit_tolerance": ["gamma_limit_tolerance", "gamma-limit-tolerance"],
}

_GRID_KEYS = {"n_grid", "lambda_grid"}

_ALIAS_TO_FIELD: dict[str, str] = {
    alias: field for field, aliases in _KEY_ALIASES.items() for alias in aliases
}


def _read_document(path: Path) -> dict[str, Any]:
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"설정 파일을 읽을 수 없습니다: {path}: {exc}") from exc

    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            data: Any = tomllib.loads(content)
        elif suffix == ".json":
            data = json.loads(content)
        else:
            raise ConfigError(f"지원하지 않는 설정 형식: {path.name} (.toml, .json)")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"설정 파일 구문 오류: {path}: {exc}") from exc

    if not isinstance(data, dict):
        raise ConfigError(f"설정 파일 최상위는 키-값 표여야 합니다: {path}")
    return data


def normalize_keys(raw: Mapping[str, Any]) -> dict[str, Any]:
    """별칭을 필드명으로 바꾸고, 격자 키의 스칼라 값을 한 원소 목록으로 올린다."""
    out: dict[str, Any] = {}
    for key, value in raw.items():
        field = _ALIAS_TO_FIELD.get(str(key).strip())
        if field is None:
            raise ConfigError(f"알 수 없는 설정 키: {key!r}")
        if field in out:
            raise ConfigError(f"같은 설정이 여러 키로 지정되었습니다: {field} ({key!r})")
        if isinstance(value, dict):
            raise ConfigError(f"설정 값은 스칼라나 목록이어야 합니다: {key!r}")
        if field in _GRID_KEYS and not isinstance(value, list):
            value = [value]
        out[field] = value
    return out


def load_experiment_config(
    path: Path | None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """설정 파일(선택)과 CLI 덮어쓰기 값을 합쳐 ExperimentConfig를 만든다.

    Raises:
        ConfigError: 파일 읽기/구문 오류, 알 수 없는 키, 검증 실패.
    """
    merged: dict[str, Any] = {}
    if path is not None:
        merged.update(normalize_keys(_read_document(path)))
        logger.debug("설정 파일 로드: %s (%d개 키)", path, len(merged))
    if overrides:
        merged.update(normalize_keys({k: v for k, v in overrides.items() if v is not None}))

    try:
        return ExperimentConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(f"실험 설정 검증 실패: {exc}") from exc
