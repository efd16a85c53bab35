"""보고서 직렬화 테스트."""

from __future__ import annotations

import json
import math
from datetime import datetime
from typing import TYPE_CHECKING

import pytest

from src.core.exceptions import ExportError
from src.data.models import CheckResult, ExperimentReport, ReportMetadata
from src.utils.export import render_report, report_to_dataframe, write_report

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture
def report() -> ExperimentReport:
    return ExperimentReport(
        kind="ldp-slope",
        rows=[
            {"n": 10, "q_upper": 0.1, "rate_upper": 1.0 / 3.0},
            {"n": 20, "q_upper": 0.0, "rate_upper": math.inf, "flagged": True},
        ],
        checks=[CheckResult(name="ldp-slope[ams upper]", passed=False, reference=0.128)],
        metadata=ReportMetadata(
            seed=11,
            version="0.1.0",
            workers=2,
            started_at=datetime(2026, 3, 1, 12, 0, 0),
            wall_clock_seconds=3.5,
        ),
    )


class TestDataFrame:
    def test_column_order_follows_first_appearance(self, report: ExperimentReport) -> None:
        frame = report_to_dataframe(report)
        assert list(frame.columns) == ["n", "q_upper", "rate_upper", "flagged"]
        assert len(frame) == 2


class TestRenderCsv:
    def test_crlf_and_header(self, report: ExperimentReport) -> None:
        payload = render_report(report, "csv")
        lines = payload.split(b"\r\n")
        assert lines[0] == b"n,q_upper,rate_upper,flagged"
        assert lines[-1] == b""
        assert b"\n" not in payload.replace(b"\r\n", b"")

    def test_seventeen_significant_digits(self, report: ExperimentReport) -> None:
        first_row = render_report(report, "csv").split(b"\r\n")[1].decode()
        assert "0.33333333333333331" in first_row
        assert float(first_row.split(",")[2]) == 1.0 / 3.0

    def test_no_wall_clock(self, report: ExperimentReport) -> None:
        assert b"3.5" not in render_report(report, "csv")

    def test_deterministic(self, report: ExperimentReport) -> None:
        assert render_report(report, "csv") == render_report(report, "csv")


class TestRenderJson:
    def test_infinity_constant(self, report: ExperimentReport) -> None:
        text = render_report(report, "json").decode("utf-8")
        assert "Infinity" in text
        payload = json.loads(text)
        assert payload["rows"][1]["rate_upper"] == math.inf
        assert payload["checks"][0]["passed"] is False
        assert payload["metadata"]["seed"] == 11


class TestRenderXlsx:
    def test_zip_container(self, report: ExperimentReport) -> None:
        assert render_report(report, "xlsx")[:2] == b"PK"


class TestUnknownFormat:
    def test_raises(self, report: ExperimentReport) -> None:
        with pytest.raises(ExportError):
            render_report(report, "parquet")


class TestWriteReport:
    def test_creates_parent_dirs(self, report: ExperimentReport, tmp_path: Path) -> None:
        path = write_report(report, tmp_path / "a" / "b" / "out.csv")
        assert path.read_bytes() == render_report(report, "csv")

    def test_directory_target(self, report: ExperimentReport, tmp_path: Path) -> None:
        with pytest.raises(ExportError):
            write_report(report, tmp_path)
