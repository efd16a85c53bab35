from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np
import pytest

from src.core.streams import substream
from src.data.history_db import RunHistoryRepository
from src.data.models import ExperimentConfig
from src.sim.dist import Exponential, ShiftedPareto

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

TEST_SEED = 20240611


@pytest.fixture
def exponential() -> Exponential:
    return Exponential()


@pytest.fixture
def pareto() -> ShiftedPareto:
    return ShiftedPareto(2.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return substream(TEST_SEED, 0)


@pytest.fixture
def history_repo(tmp_path: Path) -> RunHistoryRepository:
    return RunHistoryRepository(db_path=tmp_path / "history.db")


@pytest.fixture
def make_config() -> Callable[..., ExperimentConfig]:
    """작은 반복 수의 실험 설정. 키워드 인자로 필드를 덮어쓴다."""

    def _make(**overrides: Any) -> ExperimentConfig:
        values: dict[str, Any] = {
            "kind": "unbiasedness",
            "n_grid": [10],
            "k": 1,
            "p": 0.5,
            "reps": 500,
            "seed": TEST_SEED,
            "workers": 1,
            "chunk_size": 250,
        }
        values.update(overrides)
        return ExperimentConfig(**values)

    return _make
