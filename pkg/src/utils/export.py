"""실험 보고서 CSV/JSON/Excel 내보내기 유틸리티."""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd

from src.core.exceptions import ExportError

if TYPE_CHECKING:
    from src.data.models import ExperimentReport

logger = logging.getLogger(__name__)

_FLOAT_FORMAT = "%.17g"


def report_to_dataframe(report: ExperimentReport) -> pd.DataFrame:
    """셀별 행을 DataFrame으로 변환. 열 순서는 처음 나타난 순서를 따른다."""
    columns: list[str] = []
    for row in report.rows:
        columns.extend(key for key in row if key not in columns)
    return pd.DataFrame(report.rows, columns=columns)


def _checks_to_dataframe(report: ExperimentReport) -> pd.DataFrame:
    return pd.DataFrame([check.model_dump() for check in report.checks])


def render_report(report: ExperimentReport, fmt: str = "csv") -> bytes:
    """보고서를 바이트로 직렬화.

    csv: 행만, 17자리 부동소수점, CRLF (벽시계 시간 없음)
    json: 행 + 판정 + 메타데이터, ±∞는 Infinity / -Infinity
    xlsx: rows / checks 두 시트
    """
    if fmt == "csv":
        text = report_to_dataframe(report).to_csv(
            index=False, float_format=_FLOAT_FORMAT, lineterminator="\r\n"
        )
        return text.encode("utf-8")
    if fmt == "json":
        return report.model_dump_json(indent=2).encode("utf-8")
    if fmt == "xlsx":
        buffer = io.BytesIO()
        with pd.ExcelWriter(buffer, engine="openpyxl") as writer:
            report_to_dataframe(report).to_excel(writer, index=False, sheet_name="rows")
            _checks_to_dataframe(report).to_excel(writer, index=False, sheet_name="checks")
        return buffer.getvalue()
    raise ExportError(f"지원하지 않는 형식: {fmt!r} (csv, json, xlsx)")


def write_report(report: ExperimentReport, path: Path, fmt: str = "csv") -> Path:
    payload = render_report(report, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        logger.exception("보고서 저장 실패: %s", path)
        raise ExportError(f"보고서 저장 실패: {path}: {exc}") from exc
    logger.info("보고서 저장 완료: %s (%s, %d bytes)", path, fmt, len(payload))
    return path
