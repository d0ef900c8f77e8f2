# app/evaluation.py
"""
Repeated random-split protocol: per class, floor(s/2) training videos and
the rest (one more when s is odd) for testing; plans are fixed once and
shared by every method. Aggregates accuracy, confusion, per-class F1 and a
normal-approximation 95% confidence interval over trials.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from .baselines import classify_dtw, dtw_distance
from .classify import SvmModel, kernel_matrix, predict_many, train_svm
from .conf import pot_settings
from .exceptions import InsufficientDataError, ManifestError, MissingFeatureError
from .models import DescriptorSequence, Operator, OperatorSet, build_pyramid
from .pooling import build_pot
from .storage import read_json, write_json
from .utils import derive_seed

logger = logging.getLogger(__name__)

Z_95 = 1.96


# ============================================================
# SPLITS
# ============================================================
@dataclass(frozen=True)
class SplitPlan:
    trial: int
    seed: int
    train: dict   # label -> tuple of video ids
    test: dict

    @property
    def labels(self) -> tuple:
        return tuple(sorted(self.train))

    @property
    def train_ids(self) -> list[str]:
        return [v for label in self.labels for v in self.train[label]]

    @property
    def test_ids(self) -> list[str]:
        return [v for label in self.labels for v in self.test[label]]

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "train": {k: list(v) for k, v in self.train.items()},
            "test": {k: list(v) for k, v in self.test.items()},
        }

    @classmethod
    def from_dict(cls, payload) -> "SplitPlan":
        return cls(
            trial=int(payload["trial"]),
            seed=int(payload["seed"]),
            train={k: tuple(v) for k, v in payload["train"].items()},
            test={k: tuple(v) for k, v in payload["test"].items()},
        )


def _class_members(labels: Mapping[str, str]) -> dict:
    members = {}
    for video_id, label in labels.items():
        members.setdefault(label, []).append(video_id)
    return {label: sorted(ids) for label, ids in sorted(members.items())}


def make_splits(labels, trials: int, seed: int, split_frac: float | None = None) -> list[SplitPlan]:
    """
    ``labels`` maps video id -> class label (an ExperimentManifest works
    too). Each trial draws from its own derived seed, so plans do not
    depend on generation order.
    """
    if hasattr(labels, "labels"):
        labels = labels.labels
    split_frac = pot_settings.SPLIT_FRAC if split_frac is None else split_frac
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    members = _class_members(labels)
    small = [label for label, ids in members.items() if len(ids) < 2]
    if small:
        raise InsufficientDataError(f"classes with fewer than 2 videos: {', '.join(map(str, small))}")

    plans = []
    for trial in range(trials):
        trial_seed = derive_seed(seed, f"split/{trial}")
        rng = np.random.default_rng(trial_seed)
        train, test = {}, {}
        for label, ids in members.items():
            n_train = min(max(int(math.floor(len(ids) * split_frac)), 1), len(ids) - 1)
            order = rng.permutation(len(ids))
            train[label] = tuple(sorted(ids[i] for i in order[:n_train]))
            test[label] = tuple(sorted(ids[i] for i in order[n_train:]))
        plans.append(SplitPlan(trial=trial, seed=trial_seed, train=train, test=test))
    return plans


def save_plans(path, plans: Sequence[SplitPlan], seed: int, split_frac: float):
    return write_json(path, {
        "seed": seed,
        "split_frac": split_frac,
        "trials": len(plans),
        "plans": [plan.to_dict() for plan in plans],
    })


def load_plans(path, labels: Mapping[str, str] | None = None) -> list[SplitPlan]:
    """Read a plan file; with ``labels``, check it covers exactly those videos."""
    try:
        payload = read_json(path)
        plans = [SplitPlan.from_dict(item) for item in payload["plans"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: unreadable split plan file ({exc})") from exc
    if not plans:
        raise ManifestError(f"{path}: no split plans")
    if labels is not None:
        expected = set(labels)
        for plan in plans:
            members = set(plan.train_ids) | set(plan.test_ids)
            if members != expected:
                extra = sorted(members - expected)[:5]
                absent = sorted(expected - members)[:5]
                raise ManifestError(
                    f"{path}: trial {plan.trial} does not match the manifest "
                    f"(unknown: {', '.join(extra) or '-'}; missing: {', '.join(absent) or '-'})"
                )
    return plans


# ============================================================
# METRICS
# ============================================================
def f1_from_confusion(confusion) -> np.ndarray:
    """Per-class F1; a zero precision or recall denominator gives F1 = 0."""
    matrix = np.asarray(confusion, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {matrix.shape}")
    tp = np.diag(matrix)
    predicted = matrix.sum(axis=0)
    actual = matrix.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return f1


def precision_recall(confusion) -> tuple[np.ndarray, np.ndarray]:
    matrix = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(matrix)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(matrix.sum(axis=0) > 0, tp / matrix.sum(axis=0), 0.0)
        recall = np.where(matrix.sum(axis=1) > 0, tp / matrix.sum(axis=1), 0.0)
    return precision, recall


def confidence_interval(values: Sequence[float]) -> tuple[float, float]:
    """mean +- 1.96 * sample std / sqrt(count)."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.shape[0] < 2:
        return mean, mean
    half = Z_95 * float(values.std(ddof=1)) / math.sqrt(values.shape[0])
    return mean - half, mean + half


@dataclass
class TrialResult:
    trial: int
    labels: tuple
    confusion: np.ndarray
    gammas: dict = field(default_factory=dict)
    model: SvmModel | None = None

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    @property
    def f1(self) -> np.ndarray:
        return f1_from_confusion(self.confusion)

    @property
    def precision(self) -> np.ndarray:
        return precision_recall(self.confusion)[0]

    @property
    def recall(self) -> np.ndarray:
        return precision_recall(self.confusion)[1]


@dataclass
class ExperimentReport:
    labels: tuple
    trials: list

    @property
    def accuracies(self) -> list[float]:
        return [t.accuracy for t in self.trials]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.trials) > 1 else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return confidence_interval(self.accuracies)

    @property
    def confusion(self) -> np.ndarray:
        return np.sum([t.confusion for t in self.trials], axis=0)

    @property
    def mean_f1(self) -> np.ndarray:
        return np.mean([t.f1 for t in self.trials], axis=0)

    @property
    def mean_gammas(self) -> dict:
        channels = sorted({c for t in self.trials for c in t.gammas})
        return {c: float(np.mean([t.gammas[c] for t in self.trials if c in t.gammas])) for c in channels}


def _confusion(labels: tuple, truth: Sequence, predicted: Sequence) -> np.ndarray:
    index = {label: i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        matrix[index[t], index[p]] += 1
    return matrix


# ============================================================
# SVM EXPERIMENT
# ============================================================
def _stack(features, ids, channels):
    return {c: np.vstack([np.asarray(features[v][c], dtype=np.float64) for v in ids]) for c in channels}


def run_trial(features, labels, plan: SplitPlan, channels, c, all_labels, keep_model=False) -> TrialResult:
    train_ids, test_ids = plan.train_ids, plan.test_ids
    train = _stack(features, train_ids, channels)
    test = _stack(features, test_ids, channels)

    # gammas come from this trial's training set only
    train_kernel = kernel_matrix(train)
    test_kernel = kernel_matrix(test, train, gammas=train_kernel.gammas)

    model = train_svm(train_kernel, [labels[v] for v in train_ids], c)
    predicted = predict_many(model, test_kernel.values)
    truth = [labels[v] for v in test_ids]
    return TrialResult(
        trial=plan.trial,
        labels=all_labels,
        confusion=_confusion(all_labels, truth, predicted),
        gammas=dict(train_kernel.gammas),
        model=model if keep_model else None,
    )


def _check_features(features, labels, channels):
    missing = [
        v for v in labels
        if v not in features or any(c not in features[v] for c in channels)
    ]
    if missing:
        raise MissingFeatureError(missing)


def run_experiment(
    features: Mapping[str, Mapping[str, np.ndarray]],
    labels: Mapping[str, str],
    plans: Sequence[SplitPlan],
    channels: Sequence[str] | None = None,
    c: float | None = None,
    n_jobs: int = 1,
    keep_models: bool = False,
) -> ExperimentReport:
    """
    ``features`` maps video id -> channel -> vector. Several channels are
    combined with the multi-channel kernel. ``keep_models`` attaches each
    trial's SVM to its result.
    """
    if channels is None:
        channels = sorted({ch for per_video in features.values() for ch in per_video})
    channels = tuple(channels)
    _check_features(features, labels, channels)
    all_labels = tuple(sorted(set(labels.values())))

    results = Parallel(n_jobs=n_jobs)(
        delayed(run_trial)(features, labels, plan, channels, c, all_labels, keep_models) for plan in plans
    )
    report = ExperimentReport(labels=all_labels, trials=list(results))
    logger.info(
        "%d trials over %s: mean accuracy %.4f", len(plans), ",".join(channels), report.mean_accuracy
    )
    return report


# ============================================================
# DTW EXPERIMENT
# ============================================================
def _dtw_pair(a, b):
    return a.video_id, b.video_id, dtw_distance(a, b)


def run_dtw_experiment(
    sequences: Mapping[str, DescriptorSequence],
    labels: Mapping[str, str],
    plans: Sequence[SplitPlan],
    n_jobs: int = 1,
) -> ExperimentReport:
    """1-NN DTW under the same plans; each distinct pair is computed once."""
    missing = [v for v in labels if v not in sequences]
    if missing:
        raise MissingFeatureError(missing, what="descriptor sequences")
    all_labels = tuple(sorted(set(labels.values())))

    pairs = sorted({
        tuple(sorted((q, t)))
        for plan in plans for q in plan.test_ids for t in plan.train_ids
    })
    computed = Parallel(n_jobs=n_jobs)(delayed(_dtw_pair)(sequences[a], sequences[b]) for a, b in pairs)
    distances = {}
    for a, b, d in computed:
        distances[(a, b)] = distances[(b, a)] = d

    trials = []
    for plan in plans:
        templates = [sequences[v] for v in plan.train_ids]
        template_labels = [labels[v] for v in plan.train_ids]
        predicted = [
            classify_dtw(templates, template_labels, sequences[q], distances) for q in plan.test_ids
        ]
        truth = [labels[q] for q in plan.test_ids]
        trials.append(TrialResult(plan.trial, all_labels, _confusion(all_labels, truth, predicted)))
    report = ExperimentReport(labels=all_labels, trials=trials)
    logger.info("DTW over %d trials: mean accuracy %.4f", len(plans), report.mean_accuracy)
    return report


# ============================================================
# RE-CLUSTERING / OPERATOR SWEEP
# ============================================================
@dataclass
class ReseedSummary:
    means: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.means))

    @property
    def median_accuracy(self) -> float:
        return float(np.median(self.means))

    @property
    def interval(self) -> tuple[float, float]:
        return confidence_interval(self.means)


def summarize_reseeds(reports: Sequence[ExperimentReport]) -> ReseedSummary:
    """Spread of mean accuracy across quantizer re-clusterings."""
    return ReseedSummary(means=[r.mean_accuracy for r in reports])


def operator_combinations() -> list[OperatorSet]:
    ops = list(Operator)
    return [
        OperatorSet(combo)
        for size in range(1, len(ops) + 1)
        for combo in itertools.combinations(ops, size)
    ]


@dataclass
class SweepRow:
    ops: OperatorSet
    levels: int
    report: ExperimentReport


def operator_sweep(
    sequences: Mapping[str, Mapping[str, DescriptorSequence]],
    labels: Mapping[str, str],
    plans: Sequence[SplitPlan],
    levels_options: Sequence[int] = (1, 4),
    combinations: Sequence[OperatorSet] | None = None,
    c: float | None = None,
    n_jobs: int = 1,
    progress: Callable[[SweepRow], None] | None = None,
) -> list[SweepRow]:
    """
    Every operator combination with and without the temporal pyramid.
    ``sequences`` maps video id -> channel -> DescriptorSequence.
    """
    combinations = combinations or operator_combinations()
    rows = []
    for levels in levels_options:
        for ops in combinations:
            features = {
                video_id: {
                    channel: build_pot(seq, build_pyramid(levels, seq.frame_count), ops).values
                    for channel, seq in per_channel.items()
                }
                for video_id, per_channel in sequences.items()
            }
            row = SweepRow(ops=ops, levels=levels, report=run_experiment(features, labels, plans, c=c, n_jobs=n_jobs))
            rows.append(row)
            if progress:
                progress(row)
    return rows
