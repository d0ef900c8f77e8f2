# app/synthetic.py
"""
Small designed datasets for exercising the pipeline without external data.

``oscillation``: classes share the per-series value multisets (so sums and
maxima carry no class information) and differ only in how often each
series rises and falls: a monotone ramp, two cycles or four cycles.

``ordering``: classes differ only in the order of a rising and a falling
phase, so whole-video statistics are identical and only a temporal pyramid
can tell them apart.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .manifest import ChannelDeclaration, write_manifest
from .models import DescriptorSequence
from .storage import descriptor_path, write_matrix
from .utils import derive_seed

logger = logging.getLogger(__name__)

CHANNEL = "synth"
OSCILLATION_CLASSES = {"ramp": 1, "cycle2": 2, "cycle4": 4}
ORDERING_CLASSES = ("rise_fall", "fall_rise")


def _levels(rng, frames):
    low = rng.uniform(0.1, 0.3)
    high = rng.uniform(0.8, 1.0)
    return np.linspace(low, high, frames)


def _shape(frames, cycles):
    t = np.arange(frames) / frames
    if cycles == 1:
        return t
    phase = (t * cycles) % 1.0
    # tiny drift keeps equal heights of later cycles ranked after earlier ones
    return 1.0 - np.abs(2.0 * phase - 1.0) + 1e-9 * t


def _oscillating_series(rng, frames, cycles):
    series = np.empty(frames)
    series[np.argsort(_shape(frames, cycles), kind="stable")] = _levels(rng, frames)
    return series


def oscillation_dataset(videos_per_class=30, frames=40, dim=20, noise=0.05, seed=1):
    """Returns (sequences, labels) keyed by video id."""
    rng = np.random.default_rng(derive_seed(seed, "synthesize/oscillation"))
    sequences, labels = {}, {}
    for label, cycles in OSCILLATION_CLASSES.items():
        for index in range(videos_per_class):
            video_id = f"{label}_{index:03d}"
            values = np.column_stack([_oscillating_series(rng, frames, cycles) for _ in range(dim)])
            values = np.maximum(values + rng.normal(0.0, noise, values.shape), 0.0)
            sequences[video_id] = DescriptorSequence(video_id, CHANNEL, values)
            labels[video_id] = label
    return sequences, labels


def ordering_dataset(videos_per_class=30, frames=40, dim=20, noise=0.05, seed=1):
    """Rise-then-fall against fall-then-rise; ``frames`` should be even."""
    rng = np.random.default_rng(derive_seed(seed, "synthesize/ordering"))
    first = frames // 2
    sequences, labels = {}, {}
    for label in ORDERING_CLASSES:
        for index in range(videos_per_class):
            video_id = f"{label}_{index:03d}"
            columns = []
            for _ in range(dim):
                ramp = _levels(rng, first)
                rise, fall = ramp, ramp[::-1]
                if label == "rise_fall":
                    series = np.concatenate([rise, np.resize(fall, frames - first)])
                else:
                    series = np.concatenate([fall, np.resize(rise, frames - first)])
                columns.append(series)
            values = np.column_stack(columns)
            values = np.maximum(values + rng.normal(0.0, noise, values.shape), 0.0)
            sequences[video_id] = DescriptorSequence(video_id, CHANNEL, values)
            labels[video_id] = label
    return sequences, labels


DATASETS = {
    "oscillation": oscillation_dataset,
    "ordering": ordering_dataset,
}


def synthesize(kind, videos_per_class=30, frames=40, dim=20, noise=0.05, seed=1):
    try:
        builder = DATASETS[kind]
    except KeyError:
        raise ValueError(f"unknown synthetic dataset {kind!r}; use one of {', '.join(DATASETS)}") from None
    return builder(videos_per_class=videos_per_class, frames=frames, dim=dim, noise=noise, seed=seed)


def write_dataset(sequences, labels, output, name, metadata=None) -> Path:
    """
    Write descriptors as precomputed files under ``output/descriptors`` and
    a manifest ``output/manifest.tsv`` pointing at them. Returns the
    manifest path.
    """
    output = Path(output)
    records = []
    dim = None
    for video_id in sorted(sequences):
        seq = sequences[video_id]
        dim = seq.dim
        path = descriptor_path(output / "descriptors", seq.channel, video_id)
        write_matrix(path, seq.values, seq.channel, metadata=metadata)
        records.append((video_id, labels[video_id], {seq.channel: path.relative_to(output).as_posix()}))

    manifest = write_manifest(
        output / "manifest.tsv",
        name,
        records,
        [ChannelDeclaration(CHANNEL, "precomputed", dim)],
    )
    logger.info("wrote %d synthetic videos to %s", len(records), output)
    return manifest
