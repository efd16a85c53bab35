"""ams-bench 명령행 진입점.

표준출력에는 CSV/JSON 결과만 쓰고, 로그는 표준오류로 보낸다.
종료 코드: 0 성공, 2 설정 오류, 3 수치 오류, 4 `--check` 판정 실패.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd
from pydantic import ValidationError

from src.bench.experiments import run_experiment
from src.core.config import VERSION, settings
from src.core.exceptions import AcceptanceError, AmsError, ConfigError, HistoryDBError
from src.data.config_loader import load_experiment_config
from src.data.history_db import RunHistoryRepository
from src.data.models import ExperimentReport, ReportMetadata, RunHistoryRecord
from src.sim.dist import AVAILABLE_DISTRIBUTIONS
from src.theory.rates import RATE_NAMES, evaluate_rate
from src.utils.export import render_report, write_report

if TYPE_CHECKING:
    from collections.abc import Sequence

    from src.data.models import ExperimentConfig

logger = logging.getLogger(__name__)

# 하위 명령 → (실험 종류, 고정 추정기)
_EXPERIMENT_COMMANDS: dict[str, tuple[str, str | None]] = {
    "ams-run": ("unbiasedness", "ams"),
    "mc-run": ("unbiasedness", "crude"),
    "fixed-run": ("unbiasedness", "fixed"),
    "unbiasedness": ("unbiasedness", None),
    "clt": ("clt", None),
    "ldp-slope": ("ldp-slope", None),
    "poisson-gof": ("poisson-gof", None),
    "lognormal": ("lognormal", None),
    "compare": ("compare", None),
    "laplace-verify": ("laplace-verify", None),
    "reduction": ("reduction", None),
}

# argparse dest → ExperimentConfig 필드
_OVERRIDE_FIELDS = (
    "estimator",
    "n_grid",
    "k",
    "p",
    "threshold",
    "dist",
    "reference_dist",
    "levels",
    "lambda_grid",
    "eps",
    "sigma",
    "reps",
    "seed",
    "workers",
    "chunk_size",
    "engine",
    "out",
    "fmt",
    "alpha",
    "se_multiplier",
)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if settings.debug or verbose else logging.INFO,
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        stream=sys.stderr,
    )


def _add_common_flags(parser: argparse.ArgumentParser, *, fixed_estimator: bool) -> None:
    parser.add_argument("--config", type=Path, help="평면 TOML/JSON 실험 설정 파일")
    parser.add_argument("--n", dest="n_grid", type=int, nargs="+", help="n 격자")
    parser.add_argument("--k", type=int, help="반복마다 제거하는 복제본 수")
    target = parser.add_mutually_exclusive_group()
    target.add_argument("--p", type=float, help="목표 확률 p ∈ (0,1)")
    target.add_argument("--threshold", type=float, help="임계값 a (--dist와 함께)")
    parser.add_argument("--dist", choices=AVAILABLE_DISTRIBUTIONS)
    parser.add_argument("--reference-dist", dest="reference_dist", choices=AVAILABLE_DISTRIBUTIONS)
    parser.add_argument("--levels", type=int, help="고정 수준 수 N")
    parser.add_argument("--lambda", dest="lambda_grid", type=float, nargs="+", help="λ 격자")
    parser.add_argument("--eps", type=float, help="편차 ε")
    parser.add_argument("--sigma", type=float, help="로그정규 체제의 σ")
    parser.add_argument("--reps", type=int, help="반복 횟수 M")
    parser.add_argument("--seed", type=int, help="마스터 시드")
    parser.add_argument("--workers", type=int, help="작업자 프로세스 수")
    parser.add_argument("--chunk-size", dest="chunk_size", type=int)
    parser.add_argument("--engine", choices=["auto", "exact", "renewal", "poisson"])
    if not fixed_estimator:
        parser.add_argument("--estimator", choices=["ams", "crude", "fixed"])
    parser.add_argument("--out", type=Path, help="결과 파일 경로 (없으면 표준출력)")
    parser.add_argument("--format", dest="fmt", choices=["csv", "json", "xlsx"])
    parser.add_argument("--alpha", type=float, help="적합도 검정 유의수준")
    parser.add_argument("--se-multiplier", dest="se_multiplier", type=float)
    parser.add_argument("--check", action="store_true", help="판정 실패 시 종료 코드 4")
    parser.add_argument("--no-history", dest="no_history", action="store_true")
    parser.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ams-bench",
        description="적응형 다단계 분할(AMS) 추정기 실험과 대편차 율함수 계산",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    for command, (_, estimator) in _EXPERIMENT_COMMANDS.items():
        child = sub.add_parser(command, help=f"{command} 실험")
        _add_common_flags(child, fixed_estimator=estimator is not None)

    rate = sub.add_parser("rate-eval", help="율함수 값 계산")
    rate.add_argument("--name", required=True, choices=RATE_NAMES)
    rate.add_argument("--arg", dest="arguments", type=float, nargs="+", required=True)
    rate.add_argument("--p", type=float, required=True)
    rate.add_argument("--levels", type=int, default=1)
    rate.add_argument("--precise", action="store_true", help="mpmath 50자리 평가")
    rate.add_argument("--out", type=Path)
    rate.add_argument("--format", dest="fmt", choices=["csv", "json", "xlsx"], default="csv")
    rate.add_argument("--verbose", "-v", action="store_true")

    history = sub.add_parser("history", help="최근 실험 실행 이력")
    history.add_argument("--limit", type=int, default=20)
    history.add_argument("--verbose", "-v", action="store_true")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    kind, estimator = _EXPERIMENT_COMMANDS[args.command]
    values: dict[str, Any] = {"kind": kind}
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    if estimator is not None:
        values["estimator"] = estimator
    if args.check:
        values["check"] = True
    return values


def _emit(report: ExperimentReport, out: Path | None, fmt: str) -> None:
    if out is not None:
        write_report(report, out, fmt)
        return
    if fmt == "xlsx":
        raise ConfigError("xlsx 형식은 --out 경로가 필요합니다")
    sys.stdout.buffer.write(render_report(report, fmt))
    sys.stdout.flush()


def _record_history(config: ExperimentConfig, report: ExperimentReport) -> None:
    record = RunHistoryRecord(
        kind=report.kind,
        seed=config.seed,
        config_json=json.dumps(report.metadata.config, ensure_ascii=False, sort_keys=True),
        row_count=len(report.rows),
        passed=report.passed,
        output_path=str(config.out or ""),
        wall_clock_seconds=report.metadata.wall_clock_seconds,
    )
    try:
        RunHistoryRepository().save(record)
    except HistoryDBError as exc:
        logger.warning("실행 이력 저장을 건너뜁니다: %s", exc)


def _run_experiment_command(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config, _overrides(args))
    report = run_experiment(config)
    _emit(report, config.out, config.fmt)

    if settings.history_enabled and not args.no_history:
        _record_history(config, report)

    if config.check and report.passed is False:
        names = ", ".join(c.name for c in report.failed_checks)
        raise AcceptanceError(f"판정 실패 {len(report.failed_checks)}건: {names}")
    return 0


def _run_rate_eval(args: argparse.Namespace) -> int:
    points = [
        evaluate_rate(args.name, value, args.p, args.levels, precise=args.precise)
        for value in args.arguments
    ]
    report = ExperimentReport(
        kind="rate-eval",
        rows=[point.model_dump() for point in points],
        metadata=ReportMetadata(
            seed=settings.default_seed,
            version=VERSION,
            workers=1,
            started_at=datetime.now(),
            wall_clock_seconds=0.0,
            config={
                "name": args.name,
                "p": args.p,
                "levels": args.levels,
                "precise": args.precise,
            },
        ),
    )
    _emit(report, args.out, args.fmt)
    return 0


def _run_history(args: argparse.Namespace) -> int:
    records = RunHistoryRepository().list_recent(args.limit)
    frame = pd.DataFrame([r.model_dump(mode="json") for r in records])
    sys.stdout.write(frame.to_csv(index=False))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "rate-eval":
            return _run_rate_eval(args)
        if args.command == "history":
            return _run_history(args)
        return _run_experiment_command(args)
    except ValidationError as exc:
        logger.error("설정 검증 실패: %s", exc)
        return ConfigError.exit_code
    except AmsError as exc:
        logger.error("%s: %s", type(exc).__name__, exc.message)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
