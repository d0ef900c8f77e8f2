# app/classify.py
"""
Exponential chi-square kernels (single and multi-channel) and a kernel SVM
solved by sequential minimal optimization, one-vs-rest for multiclass.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from .conf import pot_settings
from .exceptions import ConvergenceError, DimensionMismatchError, InsufficientDataError, KernelError

logger = logging.getLogger(__name__)

TAU = 1e-12


# ============================================================
# CHI-SQUARE DISTANCES / KERNELS
# ============================================================
def chi2_distance(x, y) -> float:
    """
    D(x, y) = 1/2 * sum (x_i - y_i)^2 / (|x_i| + |y_i|); terms with a zero
    denominator contribute 0. For nonnegative inputs |x|+|y| = x+y.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"chi2 distance of vectors with lengths {x.shape} and {y.shape}")
    if (x < 0).any() or (y < 0).any():
        logger.warning("chi2 distance over negative entries; using |x|+|y| denominators")
    denom = np.abs(x) + np.abs(y)
    diff = (x - y) ** 2
    mask = denom > 0
    return 0.5 * float((diff[mask] / denom[mask]).sum())


def chi2_distance_matrix(xs, ys=None) -> np.ndarray:
    """Pairwise chi2 distances between the rows of ``xs`` and ``ys``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    symmetric = ys is None
    ys = xs if symmetric else np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatchError(f"chi2 distances between {xs.shape[1]}-D and {ys.shape[1]}-D vectors")
    if (xs < 0).any() or (ys < 0).any():
        logger.warning("chi2 distance over negative entries; using |x|+|y| denominators")

    abs_ys = np.abs(ys)
    out = np.zeros((xs.shape[0], ys.shape[0]))
    for i, row in enumerate(xs):
        start = i + 1 if symmetric else 0
        if start >= ys.shape[0]:
            continue
        denom = np.abs(row) + abs_ys[start:]
        diff = (row - ys[start:]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(denom > 0, diff / denom, 0.0)
        out[i, start:] = 0.5 * terms.sum(axis=1)
    if symmetric:
        out = out + out.T
    return out


def mean_distance(distances: np.ndarray) -> float:
    """Mean over distinct training pairs (off-diagonal)."""
    count = distances.shape[0]
    if count < 2:
        return 0.0
    return float(distances[np.triu_indices(count, k=1)].mean())


def multichannel_kernel(xs: Mapping[str, np.ndarray], ys: Mapping[str, np.ndarray], gammas: Mapping[str, float]) -> float:
    """K(x, y) = exp(-sum_c D_c(x_c, y_c) / gamma_c)."""
    missing = (set(gammas) ^ set(xs)) | (set(gammas) ^ set(ys))
    if missing:
        raise KernelError(f"channel sets differ: {', '.join(sorted(missing))}")
    total = 0.0
    for channel, gamma in gammas.items():
        if gamma <= 0:
            raise KernelError(f"gamma for channel {channel!r} must be positive, got {gamma}")
        total += chi2_distance(xs[channel], ys[channel]) / gamma
    return float(np.exp(-total))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray
    channels: tuple[str, ...]
    gammas: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape


def channel_gammas(train: Mapping[str, np.ndarray]) -> tuple[dict, dict]:
    """
    Mean training distance per channel, plus the training distance matrices.
    A channel whose training vectors are all identical gets gamma 1.
    """
    gammas, distances = {}, {}
    for channel in sorted(train):
        d = chi2_distance_matrix(train[channel])
        gamma = mean_distance(d)
        if gamma <= 0:
            logger.warning("channel %r has zero mean chi2 distance on the training set; using gamma=1", channel)
            gamma = 1.0
        gammas[channel] = gamma
        distances[channel] = d
    return gammas, distances


def kernel_matrix(
    xs: Mapping[str, np.ndarray],
    ys: Mapping[str, np.ndarray] | None = None,
    gammas: Mapping[str, float] | None = None,
    distances: Mapping[str, np.ndarray] | None = None,
) -> KernelMatrix:
    """
    Multi-channel exponential chi2 kernel between row sets. Without ``ys``
    it is the training kernel and gammas are computed from ``xs``.
    """
    if gammas is None:
        if ys is not None:
            raise KernelError("gammas must come from the training set")
        gammas, distances = channel_gammas(xs)
    channels = tuple(sorted(gammas))
    missing = [c for c in channels if c not in xs or (ys is not None and c not in ys)]
    if missing:
        raise KernelError(f"missing channel(s): {', '.join(missing)}")

    exponent = None
    for channel in channels:
        gamma = gammas[channel]
        if gamma <= 0:
            raise KernelError(f"gamma for channel {channel!r} must be positive, got {gamma}")
        if distances is not None and channel in distances:
            d = distances[channel]
        else:
            d = chi2_distance_matrix(xs[channel], None if ys is None else ys[channel])
        exponent = d / gamma if exponent is None else exponent + d / gamma
    values = np.exp(-exponent)
    if ys is None:
        values = 0.5 * (values + values.T)
        np.fill_diagonal(values, 1.0)
    return KernelMatrix(values=values, channels=channels, gammas=dict(gammas))


# ============================================================
# SMO SOLVER
# ============================================================
@dataclass
class BinarySolution:
    coef: np.ndarray     # y_i * alpha_i
    bias: float
    iterations: int
    objective: list


def solve_binary(
    kernel: np.ndarray,
    y: np.ndarray,
    c: float,
    tol: float | None = None,
    max_iter: int | None = None,
    track_objective: bool = False,
) -> BinarySolution:
    """
    Maximize sum(a) - 1/2 a'Qa, Q = yy'K, 0 <= a <= C, y'a = 0, with the
    maximal violating pair working set.
    """
    tol = pot_settings.SMO_TOL if tol is None else tol
    max_iter = pot_settings.SMO_MAX_ITER if max_iter is None else max_iter
    y = np.asarray(y, dtype=np.float64)
    count = y.shape[0]
    q = (y[:, None] * y[None, :]) * kernel
    qd = np.diag(q).copy()
    alpha = np.zeros(count)
    grad = -np.ones(count)   # gradient of 1/2 a'Qa - e'a
    objective = []

    iteration = 0
    while True:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        if yg[i] - yg[j] < tol:
            break
        if iteration >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT violation {yg[i] - yg[j]:.3g}); "
                "the kernel may not be positive semi-definite"
            )
        iteration += 1

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * q[i, j]
            if quad <= 0:
                logger.debug("non-positive curvature %.3g at pair (%d, %d)", quad, i, j)
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            elif alpha[j] > c:
                alpha[j] = c
                alpha[i] = c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * q[i, j]
            if quad <= 0:
                logger.debug("non-positive curvature %.3g at pair (%d, %d)", quad, i, j)
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > c:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        grad += q[:, i] * (alpha[i] - old_i) + q[:, j] * (alpha[j] - old_j)
        if track_objective:
            objective.append(float(alpha.sum() - 0.5 * alpha @ (grad + 1.0)))

    # bias from free support vectors, midpoint of the feasible range otherwise
    yg = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = -float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        rho = -float(hi + lo) / 2.0
    return BinarySolution(coef=y * alpha, bias=-rho, iterations=iteration, objective=objective)


@dataclass(frozen=True, eq=False)
class SvmModel:
    classes: tuple
    coef: np.ndarray        # (classes, N) signed dual coefficients y_i * alpha_i
    biases: np.ndarray      # (classes,)
    c: float
    iterations: tuple = ()

    @property
    def support(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(row != 0) for row in self.coef)

    @property
    def training_size(self) -> int:
        return self.coef.shape[1]

    def decision_values(self, kernel_rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
        if rows.shape[1] != self.training_size:
            raise DimensionMismatchError(
                f"kernel row has {rows.shape[1]} entries, model was trained on {self.training_size}"
            )
        return rows @ self.coef.T + self.biases[None, :]

    def as_matrix(self) -> np.ndarray:
        """Rows [bias, coef...] per class, for persistence."""
        return np.hstack([self.biases[:, None], self.coef])


def train_svm(kernel: KernelMatrix | np.ndarray, labels: Sequence, c: float | None = None, n_jobs: int = 1) -> SvmModel:
    values = kernel.values if isinstance(kernel, KernelMatrix) else np.asarray(kernel, dtype=np.float64)
    labels = list(labels)
    c = pot_settings.SVM_C if c is None else float(c)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionMismatchError(f"training kernel must be square, got {values.shape}")
    if values.shape[0] != len(labels):
        raise DimensionMismatchError(f"{len(labels)} labels for a {values.shape[0]}x{values.shape[0]} kernel")
    if len(labels) < 2:
        raise InsufficientDataError("SVM training needs at least 2 examples")
    if c <= 0:
        raise ValueError(f"C must be positive, got {c}")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise InsufficientDataError(f"SVM training needs at least 2 classes, got {classes}")

    label_array = np.array(labels, dtype=object)
    targets = [np.where(label_array == cls, 1.0, -1.0) for cls in classes]
    if len(classes) == 2:
        # one-vs-rest with two classes is one problem seen from both sides
        first = solve_binary(values, targets[0], c)
        solutions = [first, BinarySolution(-first.coef, -first.bias, first.iterations, [])]
    else:
        solutions = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(solve_binary)(values, target, c) for target in targets
        )
    return SvmModel(
        classes=classes,
        coef=np.vstack([s.coef for s in solutions]),
        biases=np.array([s.bias for s in solutions]),
        c=c,
        iterations=tuple(s.iterations for s in solutions),
    )


def predict(model: SvmModel, kernel_row) -> tuple:
    """Class with the largest decision value (lowest class on ties) and all scores."""
    scores = model.decision_values(kernel_row)[0]
    return model.classes[int(np.argmax(scores))], scores


def predict_many(model: SvmModel, kernel_rows) -> list:
    scores = model.decision_values(kernel_rows)
    return [model.classes[int(k)] for k in np.argmax(scores, axis=1)]
