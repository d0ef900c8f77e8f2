# app/models.py
"""
Shared data model: descriptor sequences, temporal filters, pyramids and
pooling operator selections. Nothing here touches the database; every type
is an immutable value object.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    FilterBoundsError,
    InfeasiblePyramidError,
    NonFiniteError,
)

L1_TOLERANCE = 1e-6


# ============================================================
# DESCRIPTOR SEQUENCE
# ============================================================
@dataclass(frozen=True, eq=False)
class DescriptorSequence:
    """
    Per-frame descriptors of one video and one channel.

    ``values`` has one row per frame (m) and one column per descriptor
    dimension (n); column i read top to bottom is the time series f_i(t).
    """

    video_id: str
    channel: str
    values: np.ndarray
    l1_normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatchError(
                f"{self.video_id}/{self.channel}: expected an m x n matrix, got shape {values.shape}"
            )
        m, n = values.shape
        if m < 1 or n < 1:
            raise DimensionMismatchError(
                f"{self.video_id}/{self.channel}: empty descriptor matrix {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            row = int(np.argwhere(~np.isfinite(values))[0][0]) + 1
            raise NonFiniteError(f"{self.video_id}/{self.channel}: non-finite value in frame {row}")
        if self.l1_normalized:
            sums = np.abs(values).sum(axis=1)
            bad = ~((np.abs(sums - 1.0) <= L1_TOLERANCE) | (sums == 0.0))
            if bad.any():
                row = int(np.flatnonzero(bad)[0]) + 1
                raise DimensionMismatchError(
                    f"{self.video_id}/{self.channel}: frame {row} is not L1-normalized (sum={sums[row - 1]:.6g})"
                )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def series(self, i: int) -> np.ndarray:
        """Time series f_i (1-based i)."""
        return self.values[:, i - 1]

    def frames(self, flt: "TemporalFilter") -> np.ndarray:
        """Rows inside a filter."""
        flt.check(self.frame_count)
        return self.values[flt.start - 1:flt.end]

    def __repr__(self):
        return f"DescriptorSequence({self.video_id!r}, {self.channel!r}, m={self.frame_count}, n={self.dim})"


# ============================================================
# TEMPORAL FILTERS / PYRAMID
# ============================================================
@dataclass(frozen=True, order=True)
class TemporalFilter:
    """Inclusive 1-based frame interval [start, end]."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 1 or self.end < self.start:
            raise FilterBoundsError(f"invalid temporal filter [{self.start}, {self.end}]")

    def check(self, frame_count: int) -> None:
        if self.end > frame_count:
            raise FilterBoundsError(
                f"temporal filter [{self.start}, {self.end}] exceeds sequence length {frame_count}"
            )

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def split_bounds(length: int, parts: int) -> list[tuple[int, int]]:
    """
    Floor-split [1, length] into ``parts`` contiguous segments.

    Segment j covers [floor((j-1)*length/parts) + 1, floor(j*length/parts)].
    The same rule lays out the spatial cells of the frame descriptors.
    """
    return [
        ((j - 1) * length // parts + 1, j * length // parts)
        for j in range(1, parts + 1)
    ]


@dataclass(frozen=True)
class TemporalPyramid:
    levels: int
    frame_count: int
    filters: tuple[TemporalFilter, ...]

    def __len__(self):
        return len(self.filters)

    def __iter__(self):
        return iter(self.filters)

    def level_filters(self, level: int) -> tuple[TemporalFilter, ...]:
        first = 2 ** (level - 1) - 1
        return self.filters[first:first + 2 ** (level - 1)]


def build_pyramid(levels: int, frame_count: int) -> TemporalPyramid:
    """
    Levels 1..L, level-major then left to right; 2**L - 1 filters in total.
    """
    if levels < 1:
        raise FilterBoundsError(f"pyramid levels must be >= 1, got {levels}")
    if frame_count < 1:
        raise FilterBoundsError(f"frame count must be >= 1, got {frame_count}")

    filters = []
    for level in range(1, levels + 1):
        parts = 2 ** (level - 1)
        if parts > frame_count:
            raise InfeasiblePyramidError(level, frame_count)
        filters.extend(TemporalFilter(s, e) for s, e in split_bounds(frame_count, parts))
    return TemporalPyramid(levels=levels, frame_count=frame_count, filters=tuple(filters))


# ============================================================
# POOLING OPERATORS
# ============================================================
class Operator(enum.Enum):
    SUM = "sum"
    MAX = "max"
    GRAD1 = "d1"
    GRAD2 = "d2"

    @property
    def width(self) -> int:
        return 2 if self in (Operator.GRAD1, Operator.GRAD2) else 1

    @property
    def slots(self) -> tuple[str, ...]:
        return ("+", "-") if self.width == 2 else ("",)


@dataclass(frozen=True)
class OperatorSet:
    operators: tuple[Operator, ...]

    def __post_init__(self):
        ops = tuple(Operator(op) for op in self.operators)
        if not ops:
            raise ValueError("operator set must not be empty")
        if len(set(ops)) != len(ops):
            raise ValueError(f"duplicate operators in {[op.value for op in ops]}")
        object.__setattr__(self, "operators", ops)

    @classmethod
    def parse(cls, value: str | Iterable[str]) -> "OperatorSet":
        """Accepts ``"sum,max,d1"`` or an iterable of names."""
        if isinstance(value, str):
            value = [part.strip() for part in value.split(",") if part.strip()]
        return cls(tuple(Operator(v) for v in value))

    @property
    def width(self) -> int:
        return sum(op.width for op in self.operators)

    @property
    def label(self) -> str:
        return ",".join(op.value for op in self.operators)

    def __iter__(self):
        return iter(self.operators)

    def __len__(self):
        return len(self.operators)


ALL_OPERATORS = OperatorSet((Operator.SUM, Operator.MAX, Operator.GRAD1, Operator.GRAD2))


def pot_dimension(n: int, pyramid: TemporalPyramid | Sequence[TemporalFilter], ops: OperatorSet) -> int:
    return n * len(pyramid) * ops.width


# ============================================================
# POT VECTOR
# ============================================================
@dataclass(frozen=True, eq=False)
class PotVector:
    video_id: str
    channel: str
    values: np.ndarray
    n: int
    filters: tuple[TemporalFilter, ...]
    ops: OperatorSet
    normalized: bool = field(default=False)

    def __len__(self):
        return self.values.shape[0]

    def layout(self) -> list[tuple[int, int, Operator, str]]:
        """(series index, filter index, operator, sign slot) per position, 1-based indices."""
        return [
            (i, k, op, slot)
            for i in range(1, self.n + 1)
            for k in range(1, len(self.filters) + 1)
            for op in self.ops
            for slot in op.slots
        ]
