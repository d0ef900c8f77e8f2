# app/baselines.py
"""
Comparison representations over the same per-frame descriptors:
bag-of-visual-words, improved Fisher vectors and DTW template matching.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from .conf import pot_settings
from .exceptions import ConvergenceError, DimensionMismatchError, InsufficientDataError
from .models import DescriptorSequence, TemporalFilter

logger = logging.getLogger(__name__)

DEGENERATE_WEIGHT = 1e-8


def _as_matrix(descriptors) -> np.ndarray:
    if isinstance(descriptors, DescriptorSequence):
        return descriptors.values
    if isinstance(descriptors, (list, tuple)) and descriptors and isinstance(descriptors[0], DescriptorSequence):
        return np.vstack([seq.values for seq in descriptors])
    matrix = np.asarray(descriptors, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionMismatchError(f"expected a set of n-vectors, got shape {matrix.shape}")
    return matrix


def _check_filters(seq: DescriptorSequence, filters: Sequence[TemporalFilter]) -> tuple[TemporalFilter, ...]:
    filters = tuple(filters)
    for flt in filters:
        flt.check(seq.frame_count)
    return filters


# ============================================================
# BAG OF VISUAL WORDS
# ============================================================
@dataclass(frozen=True, eq=False)
class Codebook:
    centers: np.ndarray

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def assign(self, frames: np.ndarray) -> np.ndarray:
        """Nearest center per row; ties go to the lower word index."""
        return np.argmin(cdist(frames, self.centers, "sqeuclidean"), axis=1)


def train_codebook(descriptors, k: int, seed: int) -> Codebook:
    """k-means with k-means++ seeding."""
    data = _as_matrix(descriptors)
    distinct = np.unique(data, axis=0).shape[0]
    if k < 1 or distinct < k:
        raise InsufficientDataError(f"codebook of {k} words needs {k} distinct descriptors, found {distinct}")

    kmeans = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=1,
        max_iter=pot_settings.KMEANS_MAX_ITER,
        tol=pot_settings.KMEANS_TOL,
        random_state=seed,
    ).fit(data)
    logger.debug("k-means K=%d converged in %d iterations (inertia %.6g)", k, kmeans.n_iter_, kmeans.inertia_)
    centers = np.array(kmeans.cluster_centers_, dtype=np.float64)
    centers.setflags(write=False)
    return Codebook(centers=centers)


def encode_bow(seq: DescriptorSequence, codebook: Codebook, filters: Sequence[TemporalFilter]) -> np.ndarray:
    if seq.dim != codebook.dim:
        raise DimensionMismatchError(f"{seq.video_id}: descriptor dim {seq.dim} != codebook dim {codebook.dim}")
    words = codebook.assign(seq.values)
    blocks = []
    for flt in _check_filters(seq, filters):
        hist = np.bincount(words[flt.start - 1:flt.end], minlength=codebook.size).astype(np.float64)
        total = hist.sum()
        blocks.append(hist / total if total > 0 else hist)
    return np.concatenate(blocks)


# ============================================================
# GAUSSIAN MIXTURE / IMPROVED FISHER VECTOR
# ============================================================
@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, n)
    variances: np.ndarray    # (K, n)
    log_likelihoods: tuple = field(default=())

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, frames: np.ndarray) -> np.ndarray:
        """log w_k + log N(x_t; mu_k, diag var_k), shape (T, K)."""
        frames = np.asarray(frames, dtype=np.float64)
        log_det = np.log(2 * np.pi * self.variances).sum(axis=1)
        maha = np.stack(
            [(((frames - mu) ** 2) / var).sum(axis=1) for mu, var in zip(self.means, self.variances)],
            axis=1,
        )
        return np.log(self.weights) - 0.5 * (log_det + maha)

    def posteriors(self, frames: np.ndarray) -> np.ndarray:
        joint = self.log_joint(frames)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def average_log_likelihood(self, frames: np.ndarray) -> float:
        return float(logsumexp(self.log_joint(frames), axis=1).mean())

    def as_matrix(self) -> np.ndarray:
        """Rows [w_k, mu_k, var_k] for persistence."""
        return np.hstack([self.weights[:, None], self.means, self.variances])

    @classmethod
    def from_matrix(cls, matrix) -> "GaussianMixture":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 3 or matrix.shape[1] % 2 == 0:
            raise DimensionMismatchError(f"GMM rows must be [w, mu, var] with 1 + 2n columns, got shape {matrix.shape}")
        n = (matrix.shape[1] - 1) // 2
        return cls(weights=matrix[:, 0].copy(), means=matrix[:, 1:1 + n].copy(), variances=matrix[:, 1 + n:].copy())


def train_gmm(descriptors, k: int, seed: int) -> GaussianMixture:
    """
    Diagonal-covariance EM initialized from k-means. Variances are floored
    at a fraction of the data variance; a component whose weight collapses
    is re-initialized once, a second collapse fails.
    """
    data = _as_matrix(descriptors)
    count, dim = data.shape
    if k < 1 or count < 10 * k:
        raise InsufficientDataError(f"GMM with {k} components needs at least {10 * k} descriptors, got {count}")

    data_var = data.var(axis=0)
    floor = np.maximum(pot_settings.VARIANCE_FLOOR * data_var, 1e-12)

    codebook = train_codebook(data, k, seed)
    labels = codebook.assign(data)
    weights = np.bincount(labels, minlength=k).astype(np.float64) / count
    means = codebook.centers.copy()
    variances = np.empty((k, dim))
    for c in range(k):
        members = data[labels == c]
        variances[c] = members.var(axis=0) if len(members) > 1 else data_var
    variances = np.maximum(variances, floor)
    weights = np.maximum(weights, DEGENERATE_WEIGHT)
    weights /= weights.sum()

    reinitialized = set()
    history = []
    gmm = GaussianMixture(weights, means, variances)
    for iteration in range(pot_settings.GMM_MAX_ITER):
        joint = gmm.log_joint(data)
        norm = logsumexp(joint, axis=1, keepdims=True)
        log_likelihood = float(norm.mean())
        history.append(log_likelihood)
        if len(history) > 1 and abs(history[-1] - history[-2]) < pot_settings.GMM_TOL * abs(history[-2]):
            break

        resp = np.exp(joint - norm)
        nk = resp.sum(axis=0)
        weights = nk / count
        degenerate = np.flatnonzero(weights < DEGENERATE_WEIGHT)
        if degenerate.size:
            means, variances, weights = gmm.means.copy(), gmm.variances.copy(), weights.copy()
            worst = np.argsort(norm.ravel(), kind="stable")
            for rank, c in enumerate(degenerate):
                if c in reinitialized:
                    raise ConvergenceError(f"GMM component {c} collapsed twice (weight {weights[c]:.3g})")
                reinitialized.add(int(c))
                logger.warning("GMM component %d collapsed at iteration %d; re-initializing", c, iteration)
                means[c] = data[worst[rank]]
                variances[c] = np.maximum(data_var, floor)
                weights[c] = 1.0 / k
            weights /= weights.sum()
            gmm = GaussianMixture(weights, means, variances)
            continue

        means = (resp.T @ data) / nk[:, None]
        variances = np.maximum((resp.T @ (data ** 2)) / nk[:, None] - means ** 2, floor)
        gmm = GaussianMixture(weights, means, variances)
    else:
        logger.debug("GMM stopped at the %d iteration cap", pot_settings.GMM_MAX_ITER)

    return GaussianMixture(gmm.weights, gmm.means, gmm.variances, log_likelihoods=tuple(history))


def fisher_vector(frames: np.ndarray, gmm: GaussianMixture, improved: bool = True) -> np.ndarray:
    """
    Mean and standard-deviation gradient blocks (all means first, then all
    deviations), 2*K*n values. Posteriors are clipped from below at the
    configured POSTERIOR_FLOOR. ``improved`` applies signed square root and
    L2 normalization.
    """
    frames = np.asarray(frames, dtype=np.float64)
    k, dim = gmm.size, gmm.dim
    if frames.shape[0] == 0:
        return np.zeros(2 * k * dim)
    if frames.shape[1] != dim:
        raise DimensionMismatchError(f"descriptor dim {frames.shape[1]} != GMM dim {dim}")

    t = frames.shape[0]
    gamma = np.maximum(gmm.posteriors(frames), pot_settings.POSTERIOR_FLOOR)
    sigma = np.sqrt(gmm.variances)

    g_mu = np.empty((k, dim))
    g_sigma = np.empty((k, dim))
    for c in range(k):
        z = (frames - gmm.means[c]) / sigma[c]
        g_mu[c] = gamma[:, c] @ z / (t * np.sqrt(gmm.weights[c]))
        g_sigma[c] = gamma[:, c] @ (z ** 2 - 1.0) / (t * np.sqrt(2.0 * gmm.weights[c]))
    vector = np.concatenate([g_mu.ravel(), g_sigma.ravel()])

    if improved:
        vector = np.sign(vector) * np.sqrt(np.abs(vector))
        norm = np.linalg.norm(vector)
        vector = vector / norm if norm > 0 else np.zeros_like(vector)
    return vector


def encode_ifv(seq: DescriptorSequence, gmm: GaussianMixture, filters: Sequence[TemporalFilter]) -> np.ndarray:
    if seq.dim != gmm.dim:
        raise DimensionMismatchError(f"{seq.video_id}: descriptor dim {seq.dim} != GMM dim {gmm.dim}")
    return np.concatenate([
        fisher_vector(seq.values[flt.start - 1:flt.end], gmm) for flt in _check_filters(seq, filters)
    ])


# ============================================================
# DYNAMIC TIME WARPING
# ============================================================
def dtw_distance(a: DescriptorSequence | np.ndarray, b: DescriptorSequence | np.ndarray) -> float:
    """
    Unconstrained DTW, Euclidean frame cost, symmetric unit-weight steps,
    both ends aligned. Returns the accumulated path cost.
    """
    x = a.values if isinstance(a, DescriptorSequence) else np.atleast_2d(np.asarray(a, dtype=np.float64))
    y = b.values if isinstance(b, DescriptorSequence) else np.atleast_2d(np.asarray(b, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(f"DTW needs equal descriptor dims, got {x.shape[1]} and {y.shape[1]}")

    cost = cdist(x, y, "euclidean").tolist()
    rows, cols = len(cost), len(cost[0])
    inf = float("inf")
    previous = [inf] * (cols + 1)
    previous[0] = 0.0
    for i in range(rows):
        current = [inf] * (cols + 1)
        row = cost[i]
        for j in range(cols):
            current[j + 1] = row[j] + min(previous[j], previous[j + 1], current[j])
        previous = current
    return previous[cols]


def classify_dtw(
    templates: Sequence[DescriptorSequence],
    labels: Sequence,
    query: DescriptorSequence,
    distances: Mapping[tuple[str, str], float] | None = None,
):
    """1-NN over DTW; ties go to the earliest template."""
    if not templates:
        raise InsufficientDataError("DTW classification needs at least one template")
    best_label, best = None, float("inf")
    for template, label in zip(templates, labels):
        key = (query.video_id, template.video_id)
        distance = distances[key] if distances is not None and key in distances else dtw_distance(query, template)
        if distance < best:
            best_label, best = label, distance
    return best_label
