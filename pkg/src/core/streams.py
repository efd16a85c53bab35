"""재현 가능한 난수 스트림과 반복 실행 풀.

반복 i의 난수열은 (마스터 시드, i)의 순수 함수다. Philox는 카운터 기반 생성기이고
SeedSequence의 spawn_key로 반복 번호를 넣으므로, 작업자 수나 청크 크기와 무관하게
같은 반복은 같은 난수를 받는다.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import TYPE_CHECKING

import numpy as np

from src.core.config import settings
from src.core.exceptions import DomainError

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = logging.getLogger(__name__)

_CELL_NAMESPACE = 1 << 32


def substream(master_seed: int, index: int) -> np.random.Generator:
    """반복 번호 `index`에 대응하는 독립 난수 생성기."""
    if master_seed < 0 or index < 0:
        raise DomainError(f"시드와 반복 번호는 음이 아니어야 합니다: {master_seed}, {index}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def cell_seed(master_seed: int, cell: int) -> int:
    """실험 셀별 마스터 시드. 반복 스트림과 겹치지 않는 spawn_key 영역을 쓴다."""
    if master_seed < 0 or cell < 0:
        raise DomainError(f"시드와 셀 번호는 음이 아니어야 합니다: {master_seed}, {cell}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(_CELL_NAMESPACE, cell))
    return int(seq.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def uniform_open(rng: np.random.Generator, size: int) -> np.ndarray:
    """(0, 1) 개구간 균등 난수. 정확히 0이 나오면 다시 뽑는다."""
    u = rng.random(size)
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return u


def _run_chunk(
    kernel: Callable[[np.random.Generator], Sequence[float]],
    seed: int,
    start: int,
    stop: int,
    width: int,
) -> np.ndarray:
    out = np.empty((stop - start, width), dtype=np.float64)
    for row, index in enumerate(range(start, stop)):
        out[row] = kernel(substream(seed, index))
    return out


def chunk_bounds(reps: int, chunk_size: int) -> list[tuple[int, int]]:
    if reps < 1:
        raise DomainError(f"반복 횟수는 1 이상이어야 합니다: {reps}")
    if chunk_size < 1:
        raise DomainError(f"청크 크기는 1 이상이어야 합니다: {chunk_size}")
    return [(lo, min(lo + chunk_size, reps)) for lo in range(0, reps, chunk_size)]


def replicate(
    kernel: Callable[[np.random.Generator], Sequence[float]],
    reps: int,
    seed: int,
    *,
    width: int,
    workers: int = 1,
    chunk_size: int | None = None,
) -> np.ndarray:
    """`kernel`을 `reps`번 실행해 (reps, width) 배열을 반복 번호 순서로 돌려준다.

    Args:
        kernel: 생성기 하나를 받아 길이 `width`의 수치 행을 돌려주는 함수.
            작업자 프로세스로 보내지므로 pickle 가능해야 한다 (모듈 수준 함수 + partial).
        reps: 반복 횟수 M.
        seed: 마스터 시드.
        width: 행 길이.
        workers: 프로세스 수. 1이면 현재 프로세스에서 실행.
        chunk_size: 작업 단위당 반복 수. 기본값은 settings.chunk_size.

    Returns:
        행 i가 `substream(seed, i)`로 계산된 배열. 작업자 수와 무관하게 동일하다.
    """
    bounds = chunk_bounds(reps, chunk_size or settings.chunk_size)
    los = [lo for lo, _ in bounds]
    his = [hi for _, hi in bounds]

    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(kernel, seed, lo, hi, width) for lo, hi in bounds]
    else:
        logger.debug("반복 %d회를 %d개 작업자에 %d청크로 분배", reps, workers, len(bounds))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(_run_chunk, repeat(kernel), repeat(seed), los, his, repeat(width))
            )

    return np.concatenate(parts, axis=0)
