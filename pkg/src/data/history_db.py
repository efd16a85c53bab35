"""실험 실행 이력 sqlite 저장소."""

from __future__ import annotations

import logging
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from typing import TYPE_CHECKING

from src.core.config import settings
from src.core.exceptions import HistoryDBError
from src.data.models import RunHistoryRecord

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path

logger = logging.getLogger(__name__)

_TABLE = "experiment_runs"

_CREATE_TABLE_SQL = f"""
CREATE TABLE IF NOT EXISTS {_TABLE} (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    kind        TEXT    NOT NULL,
    seed        INTEGER NOT NULL,
    recorded_at TEXT    NOT NULL
);
"""

# 초기 스키마 이후 추가된 컬럼. 새 DB도 같은 경로로 만든다.
_ADDED_COLUMNS: dict[str, str] = {
    "config_json": "TEXT NOT NULL DEFAULT '{}'",
    "row_count": "INTEGER NOT NULL DEFAULT 0",
    "passed": "INTEGER",
    "output_path": "TEXT NOT NULL DEFAULT ''",
    "wall_clock_seconds": "REAL NOT NULL DEFAULT 0",
}

_INSERT_COLUMNS = (
    "kind",
    "seed",
    "config_json",
    "row_count",
    "passed",
    "output_path",
    "wall_clock_seconds",
    "recorded_at",
)


class RunHistoryRepository:
    """실행 하나 = 행 하나. 최근 순 조회, 삭제, 건수."""

    def __init__(self, db_path: Path | None = None) -> None:
        self._db_path = db_path or settings.history_db_path
        with self._session("테이블 생성") as conn:
            conn.execute(_CREATE_TABLE_SQL)
            self._migrate(conn)

    @contextmanager
    def _session(self, action: str) -> Iterator[sqlite3.Connection]:
        """연결을 열고 성공 시 commit. sqlite 오류는 HistoryDBError로 바꾼다."""
        try:
            self._db_path.parent.mkdir(parents=True, exist_ok=True)
            conn = sqlite3.connect(str(self._db_path))
        except (OSError, sqlite3.Error) as exc:
            raise HistoryDBError(f"{action} 실패: {self._db_path}: {exc}") from exc

        conn.row_factory = sqlite3.Row
        try:
            yield conn
            conn.commit()
        except sqlite3.Error as exc:
            logger.exception("실행 이력 %s 실패", action)
            raise HistoryDBError(f"{action} 실패: {exc}") from exc
        finally:
            conn.close()

    @staticmethod
    def _migrate(conn: sqlite3.Connection) -> None:
        """누락된 컬럼만 ALTER TABLE로 추가 (기존 행 보존)."""
        existing = {str(row[1]) for row in conn.execute(f"PRAGMA table_info({_TABLE})")}
        for name, sql_type in _ADDED_COLUMNS.items():
            if name not in existing:
                logger.info("실행 이력 컬럼 추가: %s", name)
                conn.execute(f"ALTER TABLE {_TABLE} ADD COLUMN {name} {sql_type}")

    def save(self, record: RunHistoryRecord) -> int:
        placeholders = ", ".join("?" for _ in _INSERT_COLUMNS)
        sql = f"INSERT INTO {_TABLE} ({', '.join(_INSERT_COLUMNS)}) VALUES ({placeholders})"
        values = (
            record.kind,
            record.seed,
            record.config_json,
            record.row_count,
            None if record.passed is None else int(record.passed),
            record.output_path,
            record.wall_clock_seconds,
            record.recorded_at.isoformat(),
        )
        with self._session("이력 저장") as conn:
            row_id = conn.execute(sql, values).lastrowid
        if row_id is None:
            raise HistoryDBError("저장된 행 번호를 받지 못했습니다")
        logger.debug("실행 이력 저장: id=%d kind=%s", row_id, record.kind)
        return row_id

    def list_recent(self, limit: int = 20) -> list[RunHistoryRecord]:
        sql = f"SELECT * FROM {_TABLE} ORDER BY recorded_at DESC, id DESC LIMIT ?"
        with self._session("이력 조회") as conn:
            rows = conn.execute(sql, (limit,)).fetchall()
        return [_row_to_record(row) for row in rows]

    def delete(self, record_id: int) -> bool:
        with self._session("이력 삭제") as conn:
            deleted = conn.execute(f"DELETE FROM {_TABLE} WHERE id = ?", (record_id,)).rowcount
        return deleted > 0

    def count(self) -> int:
        with self._session("이력 건수 조회") as conn:
            (total,) = conn.execute(f"SELECT COUNT(*) FROM {_TABLE}").fetchone()
        return int(total)


def _row_to_record(row: sqlite3.Row) -> RunHistoryRecord:
    values = {key: value for key, value in dict(row).items() if value is not None}
    if "passed" in values:
        values["passed"] = bool(values["passed"])
    values["recorded_at"] = datetime.fromisoformat(values["recorded_at"])
    return RunHistoryRecord.model_validate(values)
