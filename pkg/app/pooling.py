# app/pooling.py
"""
Temporal pooling of descriptor time series and assembly of the pooled
time series (PoT) vector.

For every series f_i and every temporal filter [t_s, t_e]:

    max   -> max f_i(t)
    sum   -> sum f_i(t)
    d1    -> (#{t : f_i(t) - f_i(t-1) > 0}, #{t : f_i(t) - f_i(t-1) < 0})
    d2    -> (sum of positive differences, sum of negative difference magnitudes)

Gradients range over max(t_s, 2) <= t <= t_e, so the difference at the left
edge of a filter reads the frame just before it; frame 1 has no predecessor.
Zero differences count as neither sign.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import FilterBoundsError, NonFiniteError
from .models import (
    DescriptorSequence,
    Operator,
    OperatorSet,
    PotVector,
    TemporalFilter,
    TemporalPyramid,
    pot_dimension,
)


def _window(series, flt: TemporalFilter) -> np.ndarray:
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise FilterBoundsError(f"expected a 1-D series, got shape {series.shape}")
    flt.check(series.shape[0])
    return series


def _differences(series: np.ndarray, flt: TemporalFilter) -> np.ndarray:
    lo = max(flt.start, 2)
    if lo > flt.end:
        return np.empty((0,) + series.shape[1:])
    # 1-based t in [lo, t_e] -> f(t) - f(t-1)
    return series[lo - 1:flt.end] - series[lo - 2:flt.end - 1]


def pool_max(series, flt: TemporalFilter) -> float:
    f = _window(series, flt)
    return float(f[flt.start - 1:flt.end].max())


def pool_sum(series, flt: TemporalFilter) -> float:
    f = _window(series, flt)
    return float(f[flt.start - 1:flt.end].sum())


def pool_grad1(series, flt: TemporalFilter) -> tuple[float, float]:
    diffs = _differences(_window(series, flt), flt)
    return float(np.count_nonzero(diffs > 0)), float(np.count_nonzero(diffs < 0))


def pool_grad2(series, flt: TemporalFilter) -> tuple[float, float]:
    diffs = _differences(_window(series, flt), flt)
    return float(diffs[diffs > 0].sum()), float(-diffs[diffs < 0].sum())


# ------------------------------------------------------------
# Vectorized over all n series of a filter: each returns (n, width)
# ------------------------------------------------------------
def _block(values: np.ndarray, flt: TemporalFilter, op: Operator) -> np.ndarray:
    window = values[flt.start - 1:flt.end]
    if op is Operator.SUM:
        return window.sum(axis=0)[:, None]
    if op is Operator.MAX:
        return window.max(axis=0)[:, None]

    diffs = _differences(values, flt)
    if op is Operator.GRAD1:
        return np.stack([(diffs > 0).sum(axis=0), (diffs < 0).sum(axis=0)], axis=1).astype(np.float64)
    positive = np.where(diffs > 0, diffs, 0.0).sum(axis=0)
    negative = np.where(diffs < 0, -diffs, 0.0).sum(axis=0)
    return np.stack([positive, negative], axis=1)


def build_pot(
    seq: DescriptorSequence,
    pyramid: TemporalPyramid | Sequence[TemporalFilter],
    ops: OperatorSet,
    normalize: bool = False,
) -> PotVector:
    """
    Concatenate pooled values series-major, then filter, then operator.

    ``normalize`` L1-normalizes the final vector (off by default).
    """
    values = seq.values
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{seq.video_id}/{seq.channel}: non-finite descriptor values")
    if isinstance(pyramid, TemporalPyramid) and pyramid.frame_count != seq.frame_count:
        raise FilterBoundsError(
            f"{seq.video_id}/{seq.channel}: pyramid built for {pyramid.frame_count} frames, "
            f"sequence has {seq.frame_count}"
        )
    filters = tuple(pyramid)
    for flt in filters:
        flt.check(seq.frame_count)

    # (n, k, width)
    pooled = np.stack(
        [np.concatenate([_block(values, flt, op) for op in ops], axis=1) for flt in filters],
        axis=1,
    )
    vector = pooled.reshape(-1)
    if normalize:
        total = np.abs(vector).sum()
        if total > 0:
            vector = vector / total

    assert vector.shape[0] == pot_dimension(seq.dim, filters, ops)
    vector.setflags(write=False)
    return PotVector(
        video_id=seq.video_id,
        channel=seq.channel,
        values=vector,
        n=seq.dim,
        filters=filters,
        ops=ops,
        normalized=normalize,
    )
