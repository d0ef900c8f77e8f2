# app/descriptors.py
"""
Per-frame descriptors: HOG from frames, HOF and MBH from optical flow
between consecutive frames, and ingestion of precomputed descriptors
(e.g. CNN activations) from POT-DESC files.

All histograms use a 5x5 spatial grid (floor-split cells) and 8 signed
orientation bins of 45 degrees, bin 1 centred on 0 degrees (rightward),
with hard magnitude-weighted votes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.ndimage import gaussian_filter

from .conf import pot_settings
from .exceptions import DimensionMismatchError, FrameRangeError, NonFiniteError
from .models import DescriptorSequence, split_bounds
from .storage import read_matrix

logger = logging.getLogger(__name__)

COMPUTED_CHANNELS = ("hof", "hog", "mbh")
FLOW_CHANNELS = ("hof", "mbh")
RANGE_TOLERANCE = 1e-9


# ============================================================
# TYPES
# ============================================================
@dataclass(frozen=True, eq=False)
class FrameSequence:
    video_id: str
    frames: np.ndarray  # (m, H, W), values in [0, 1]

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 4 and frames.shape[-1] == 3:
            frames = frames @ np.array([0.299, 0.587, 0.114])
        if frames.ndim != 3:
            raise DimensionMismatchError(f"{self.video_id}: frames must be (m, H, W), got {frames.shape}")
        grid = pot_settings.GRID
        if frames.shape[1] < grid or frames.shape[2] < grid:
            raise DimensionMismatchError(
                f"{self.video_id}: frames of {frames.shape[2]}x{frames.shape[1]} are smaller than the {grid}x{grid} grid"
            )
        if not np.isfinite(frames).all():
            raise NonFiniteError(f"{self.video_id}: frames contain NaN or infinite intensities")
        low, high = frames.min(initial=0.0), frames.max(initial=0.0)
        if low < -RANGE_TOLERANCE or high > 1 + RANGE_TOLERANCE:
            raise FrameRangeError(f"{self.video_id}: intensities span [{low:g}, {high:g}], expected [0, 1]")
        object.__setattr__(self, "frames", np.clip(frames, 0.0, 1.0))

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement (u, v) in pixels/frame; next(y+v, x+u) ~ prev(y, x)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.u.shape


# ============================================================
# OPTICAL FLOW (coarse-to-fine block matching)
# ============================================================
def _downsample(image: np.ndarray) -> np.ndarray:
    image = gaussian_filter(image, sigma=pot_settings.FLOW_SIGMA, mode="nearest")
    h, w = (image.shape[0] // 2) * 2, (image.shape[1] // 2) * 2
    return image[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _candidates(radius: int) -> list[tuple[int, int]]:
    # nearest displacements first so ties resolve towards the window centre
    offsets = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    return sorted(offsets, key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


def _match_level(prev, nxt, predicted, block, radius):
    """
    Sum-of-absolute-differences block matching. Each block searches a window
    around its predicted (u, v) and a window around zero motion, and keeps
    the lower cost; ties keep the prediction. Targets may leave the frame as
    long as half the block still overlaps it, scored by mean absolute
    difference over the overlap.
    """
    height, width = prev.shape
    b = max(1, min(block, height, width))
    nby, nbx = height // b, width // b
    min_overlap = (b * b + 1) // 2

    pred = predicted[:nby * b, :nbx * b].reshape(nby, b, nbx, b, 2).mean(axis=(1, 3))
    pred = np.rint(pred).astype(np.int64)
    centres = [(pred[..., 0], pred[..., 1])]
    if pred.any():
        centres.append((np.zeros_like(pred[..., 0]), np.zeros_like(pred[..., 1])))

    reach = int(np.abs(pred).max(initial=0)) + radius
    padded = np.pad(nxt, reach, constant_values=np.nan)
    inside = ~np.isnan(padded)
    filled = np.where(inside, padded, 0.0)

    patches = prev[:nby * b, :nbx * b].reshape(nby, b, nbx, b).transpose(0, 2, 1, 3)
    ys = (np.arange(nby) * b)[:, None] + reach
    xs = (np.arange(nbx) * b)[None, :] + reach
    offs = np.arange(b)

    best_cost = np.full((nby, nbx), np.inf)
    best_u = pred[..., 0].copy()
    best_v = pred[..., 1].copy()
    for centre_u, centre_v in centres:
        for dy, dx in _candidates(radius):
            rows = (ys + centre_v + dy)[..., None, None] + offs[None, None, :, None]
            cols = (xs + centre_u + dx)[..., None, None] + offs[None, None, None, :]
            mask = inside[rows, cols]
            count = mask.sum(axis=(2, 3))
            total = (np.abs(filled[rows, cols] - patches) * mask).sum(axis=(2, 3))
            cost = np.where(count >= min_overlap, total / np.maximum(count, 1), np.inf)
            better = cost < best_cost
            best_cost[better] = cost[better]
            best_u[better] = centre_u[better] + dx
            best_v[better] = centre_v[better] + dy

    flow = np.stack([best_u, best_v], axis=-1).astype(np.float64)
    flow = np.repeat(np.repeat(flow, b, axis=0), b, axis=1)
    pad = ((0, height - flow.shape[0]), (0, width - flow.shape[1]), (0, 0))
    return np.pad(flow, pad, mode="edge")


def compute_flow(prev, nxt, levels=None, block=None, radius=None) -> FlowField:
    prev = np.asarray(prev, dtype=np.float64)
    nxt = np.asarray(nxt, dtype=np.float64)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise DimensionMismatchError(f"frame shapes differ: {prev.shape} vs {nxt.shape}")
    levels = pot_settings.FLOW_LEVELS if levels is None else int(levels)
    block = pot_settings.FLOW_BLOCK if block is None else int(block)
    radius = pot_settings.FLOW_RADIUS if radius is None else int(radius)
    if levels < 1 or block < 1 or radius < 0:
        raise ValueError(f"flow needs levels >= 1, block >= 1 and radius >= 0, got {levels}, {block}, {radius}")

    pyramid = [(prev, nxt)]
    while len(pyramid) < levels:
        a, b = pyramid[-1]
        if min(a.shape) < 2 * block:
            break
        pyramid.append((_downsample(a), _downsample(b)))

    flow = np.zeros(pyramid[-1][0].shape + (2,))
    for depth in range(len(pyramid) - 1, -1, -1):
        a, b = pyramid[depth]
        if flow.shape[:2] != a.shape:
            up = np.repeat(np.repeat(flow * 2.0, 2, axis=0), 2, axis=1)[:a.shape[0], :a.shape[1]]
            pad = ((0, a.shape[0] - up.shape[0]), (0, a.shape[1] - up.shape[1]), (0, 0))
            flow = np.pad(up, pad, mode="edge")
        flow = _match_level(a, b, flow, block, radius)
    return FlowField(u=flow[..., 0], v=flow[..., 1])


# ============================================================
# ORIENTATION HISTOGRAMS
# ============================================================
def _cell_index(height: int, width: int, grid: int) -> np.ndarray:
    rows = np.empty(height, dtype=np.int64)
    for j, (s, e) in enumerate(split_bounds(height, grid)):
        rows[s - 1:e] = j
    cols = np.empty(width, dtype=np.int64)
    for j, (s, e) in enumerate(split_bounds(width, grid)):
        cols[s - 1:e] = j
    return rows[:, None] * grid + cols[None, :]


def orientation_histogram(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Unnormalized grid x grid x bins histogram of the vector field (dx, dy)."""
    grid, bins = pot_settings.GRID, pot_settings.ORIENTATIONS
    magnitude = np.hypot(dx, dy)
    angle = np.mod(np.arctan2(dy, dx), 2 * np.pi)
    width = 2 * np.pi / bins
    orientation = np.floor((angle + width / 2) / width).astype(np.int64) % bins
    index = _cell_index(*dx.shape, grid) * bins + orientation
    return np.bincount(index.ravel(), weights=magnitude.ravel(), minlength=grid * grid * bins)


def l1_normalize(vector: np.ndarray) -> np.ndarray:
    total = np.abs(vector).sum()
    if total <= 0:
        return np.zeros_like(vector, dtype=np.float64)
    return vector / total


def _gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(np.asarray(image, dtype=np.float64))
    return gx, gy


def hof_descriptor(flow: FlowField) -> np.ndarray:
    return l1_normalize(orientation_histogram(flow.u, flow.v))


def hog_descriptor(frame) -> np.ndarray:
    gx, gy = _gradients(frame)
    return l1_normalize(orientation_histogram(gx, gy))


def mbh_descriptor(flow: FlowField) -> np.ndarray:
    halves = []
    for component in (flow.u, flow.v):
        gx, gy = _gradients(component)
        halves.append(l1_normalize(orientation_histogram(gx, gy)))
    return np.concatenate(halves)


# ============================================================
# CHANNEL EXTRACTION
# ============================================================
def extract_channels(video: FrameSequence, channels: Iterable[str]) -> dict[str, DescriptorSequence]:
    """
    Extract several computed channels of one video, sharing optical flow
    between HOF and MBH. HOG yields m rows, HOF/MBH m - 1.
    """
    channels = list(dict.fromkeys(channels))
    unknown = [c for c in channels if c not in COMPUTED_CHANNELS]
    if unknown:
        raise ValueError(f"unknown computed channel(s): {', '.join(unknown)}")
    if any(c in FLOW_CHANNELS for c in channels) and len(video) < 2:
        raise DimensionMismatchError(f"{video.video_id}: flow channels need >=2 frames, got {len(video)}")

    rows = {c: [] for c in channels}
    if "hog" in channels:
        rows["hog"] = [hog_descriptor(frame) for frame in video.frames]
    if any(c in FLOW_CHANNELS for c in channels):
        for prev, nxt in zip(video.frames[:-1], video.frames[1:]):
            flow = compute_flow(prev, nxt)
            if "hof" in rows:
                rows["hof"].append(hof_descriptor(flow))
            if "mbh" in rows:
                rows["mbh"].append(mbh_descriptor(flow))

    logger.debug("%s: extracted %s from %d frames", video.video_id, ",".join(channels), len(video))
    # MBH is normalized per 200-D half, so its rows sum to 0, 1 or 2
    return {
        c: DescriptorSequence(video.video_id, c, np.vstack(rows[c]), l1_normalized=(c != "mbh"))
        for c in channels
    }


def extract_channel(video: FrameSequence, channel: str) -> DescriptorSequence:
    return extract_channels(video, [channel])[channel]


# ============================================================
# PRECOMPUTED DESCRIPTORS
# ============================================================
def load_precomputed(path, expected_dim=None, l1_normalize_rows=None, video_id=None, channel=None) -> DescriptorSequence:
    """
    Load a POT-DESC descriptor file (text or binary). Rows are L1-normalized
    unless ``l1_normalize_rows`` is False (default from settings).
    """
    if l1_normalize_rows is None:
        l1_normalize_rows = pot_settings.L1_PRECOMPUTED
    data = read_matrix(path, channel=channel)
    values = data.values
    if expected_dim is not None and values.shape[1] != int(expected_dim):
        raise DimensionMismatchError(
            f"{path}: descriptor dimension {values.shape[1]} does not match expected {expected_dim}"
        )
    if l1_normalize_rows:
        values = np.vstack([l1_normalize(row) for row in values])
    return DescriptorSequence(
        video_id=video_id or Path(path).name.split(".")[0],
        channel=channel or data.channel,
        values=values,
        l1_normalized=bool(l1_normalize_rows),
    )
