from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Spawn-key tags for the independent random streams of one replicate.
CELL_STREAM = 0
INITIAL_STREAM = 1
ESTIMATE_STREAM = 2
RESAMPLE_STREAM = 3
VALIDATE_STREAM = 4


def worker_count() -> int:
    raw = os.environ.get("BRT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError("BRT_THREADS must be an integer") from None
    return max(1, value)


def log_level() -> int:
    raw = os.environ.get("BRT_LOG_LEVEL", "WARNING").strip().upper()
    level = logging.getLevelName(raw)
    return level if isinstance(level, int) else logging.WARNING


@dataclass(frozen=True)
class RandomStreams:
    """Splittable source of reproducible random generators.

    Every stream is a Philox (counter-based) generator keyed by the run seed and a
    spawn key, so parallel replicates and sequential replay draw identical numbers.
    """

    seed: int
    key: tuple[int, ...] = ()

    def child(self, *keys: int) -> RandomStreams:
        return RandomStreams(self.seed, self.key + tuple(int(k) for k in keys))

    def replicate(self, index: int) -> RandomStreams:
        return self.child(index)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(seq))


def map_replicates(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class Accumulator:
    """(count, sum, sum of squares) of i.i.d. replicate values; merging is associative."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, value: float) -> Accumulator:
        return Accumulator(self.count + 1, self.total + value, self.total_sq + value * value)

    def merge(self, other: Accumulator) -> Accumulator:
        return Accumulator(
            self.count + other.count,
            self.total + other.total,
            self.total_sq + other.total_sq,
        )

    @property
    def mean(self) -> float:
        if self.count == 0:
            return 0.0
        return self.total / self.count

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return 0.0
        mean = self.mean
        var = (self.total_sq - self.count * mean * mean) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)


def accumulate(values: Iterable[float]) -> Accumulator:
    acc = Accumulator()
    for v in values:
        acc = acc.add(float(v))
    return acc


def fmt_float(value: float) -> str:
    return repr(float(value))
