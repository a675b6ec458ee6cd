"""Population-level evaluation on a held-out set.

No buying or budget operation is ever invoked here: evaluation only queries
the frozen models. All reductions run in fixed (input) order, so a report is
reproducible bit-for-bit for a given model set and evaluation set.

Definitions, for M models on an evaluation point (X, Y) with per-model
qualities q_j = q(Y, f_j(X)):

- overall quality: mean over points of Z = (1/M) sum_j q_j
- QoE: mean over points of sum_j p_j q_j, where p is the softmax choice
  distribution p_j ∝ exp(alpha * q_j) — the exact conditional expectation
  of the selected model's quality, no winner sampling
- diversity: mean over points of the entropy (nats) of the empirical
  distribution of the M predicted classes
- class-specific quality Q[j, y]: model j's mean quality over points whose
  true label is y
- Z histogram: density of the per-point average quality on [0, 1]
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from predmarket.dataset import Dataset
from predmarket.models import ModelState, predict_labels_batch


@dataclass(frozen=True)
class QualityFunction:
    """Similarity score between the true label and a prediction."""

    tag: str
    evaluate: Callable[[int, int], float]


CORRECTNESS = QualityFunction(
    tag="correctness", evaluate=lambda y, pred: 1.0 if y == pred else 0.0
)


@dataclass(frozen=True)
class DensityHistogram:
    """Histogram with densities normalized so that sum(density * width) = 1."""

    edges: np.ndarray
    density: np.ndarray


@dataclass(frozen=True)
class MetricReport:
    overall_quality: float
    qoe: float
    diversity: float
    class_quality: np.ndarray
    class_quality_avg: np.ndarray
    class_quality_centered: np.ndarray
    z_histogram: DensityHistogram
    z_mass_low: float  # fraction of evaluation points with Z <= 0.1
    n_eval: int


LOW_Z_THRESHOLD = 0.1


def predictions_matrix(models, X: np.ndarray) -> np.ndarray:
    """Predicted class of every model at every point, shape (n, M)."""
    return np.stack([predict_labels_batch(m, X) for m in models], axis=1)


def quality_matrix(q: QualityFunction, y: np.ndarray, preds: np.ndarray) -> np.ndarray:
    """q(Y_i, prediction of model j at point i) as an (n, M) float array."""
    if q.tag == "correctness":
        return (preds == y[:, None]).astype(np.float64)
    out = np.empty(preds.shape, dtype=np.float64)
    for i in range(preds.shape[0]):
        for j in range(preds.shape[1]):
            out[i, j] = q.evaluate(int(y[i]), int(preds[i, j]))
    if np.any(out < 0.0):
        raise ValueError("quality function returned a negative value")
    return out


def softmax_choice_weights(qualities: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise softmax of alpha * qualities with max-shift, shape preserved."""
    scaled = alpha * qualities
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _qualities(models, eval_set: Dataset, q: QualityFunction) -> np.ndarray:
    if len(eval_set) == 0:
        raise ValueError("evaluation set must be non-empty")
    preds = predictions_matrix(models, eval_set.X)
    return quality_matrix(q, eval_set.y, preds)


def overall_quality(models, eval_set: Dataset, q: QualityFunction = CORRECTNESS) -> float:
    """Mean over the evaluation set of the per-point average quality."""
    return float(_qualities(models, eval_set, q).mean())


def qoe(models, eval_set: Dataset, q: QualityFunction = CORRECTNESS,
        alpha: float = 0.0, sampled: bool = False, rng=None) -> float:
    """Expected quality of the model a user selects at temperature alpha.

    Computed as the exact conditional expectation sum_j p_j q_j per point.
    With ``sampled=True`` a winner is drawn per point instead (higher
    variance; for validating the exact path).
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    qual = _qualities(models, eval_set, q)
    weights = softmax_choice_weights(qual, alpha)
    if not sampled:
        return float((weights * qual).sum(axis=1).mean())
    if rng is None:
        rng = np.random.default_rng(0)
    n, M = qual.shape
    picks = (weights.cumsum(axis=1) > rng.random((n, 1))).argmax(axis=1)
    return float(qual[np.arange(n), picks].mean())


def diversity(models, eval_set: Dataset) -> float:
    """Expected entropy (nats) of the distribution of predicted classes."""
    if len(eval_set) == 0:
        raise ValueError("evaluation set must be non-empty")
    preds = predictions_matrix(models, eval_set.X)
    n, M = preds.shape
    K = eval_set.n_classes
    fractions = np.empty((n, K), dtype=np.float64)
    for c in range(K):
        fractions[:, c] = (preds == c).sum(axis=1)
    fractions /= M
    logs = np.where(fractions > 0.0, np.log(np.where(fractions > 0.0, fractions, 1.0)), 0.0)
    return float(-(fractions * logs).sum(axis=1).mean())


def class_specific_quality(models, eval_set: Dataset, q: QualityFunction = CORRECTNESS):
    """Per-class quality of every model.

    Returns (Q, Q_avg, centered): Q[j, y] is model j's mean quality over
    evaluation points with true label y, Q_avg[y] averages over models, and
    centered = Q - Q_avg highlights specialization. Every class must appear
    at least once in the evaluation set.
    """
    qual = _qualities(models, eval_set, q)
    M = qual.shape[1]
    K = eval_set.n_classes
    Q = np.empty((M, K), dtype=np.float64)
    for y in range(K):
        mask = eval_set.y == y
        if not mask.any():
            raise ValueError(f"class {y} absent from the evaluation set")
        Q[:, y] = qual[mask].mean(axis=0)
    Q_avg = Q.mean(axis=0)
    return Q, Q_avg, Q - Q_avg[None, :]


def z_histogram(models, eval_set: Dataset, q: QualityFunction = CORRECTNESS,
                bins: int = 50) -> DensityHistogram:
    """Density histogram of the per-point average quality Z over [0, 1]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    z = _qualities(models, eval_set, q).mean(axis=1)
    density, edges = np.histogram(z, bins=bins, range=(0.0, 1.0), density=True)
    return DensityHistogram(edges=edges, density=density)


def evaluate_market(models, eval_set: Dataset, alpha: float,
                    q: QualityFunction = CORRECTNESS, bins: int = 50,
                    subsample: int | None = None, subsample_seed: int = 0) -> MetricReport:
    """All metrics from a single pass over the evaluation set.

    ``subsample`` limits evaluation to that many points drawn without
    replacement (seeded); by default the whole set is used.
    """
    if len(eval_set) == 0:
        raise ValueError("evaluation set must be non-empty")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if subsample is not None and subsample < len(eval_set):
        rng = np.random.default_rng(subsample_seed)
        idx = np.sort(rng.choice(len(eval_set), size=subsample, replace=False))
        eval_set = Dataset(eval_set.X[idx], eval_set.y[idx],
                           eval_set.n_classes, eval_set.name)

    preds = predictions_matrix(models, eval_set.X)
    qual = quality_matrix(q, eval_set.y, preds)
    n, M = qual.shape
    z = qual.mean(axis=1)

    weights = softmax_choice_weights(qual, alpha)
    qoe_value = float((weights * qual).sum(axis=1).mean())

    K = eval_set.n_classes
    fractions = np.empty((n, K), dtype=np.float64)
    for c in range(K):
        fractions[:, c] = (preds == c).sum(axis=1)
    fractions /= M
    logs = np.where(fractions > 0.0, np.log(np.where(fractions > 0.0, fractions, 1.0)), 0.0)
    diversity_value = float(-(fractions * logs).sum(axis=1).mean())

    Q = np.empty((M, K), dtype=np.float64)
    for y in range(K):
        mask = eval_set.y == y
        if not mask.any():
            raise ValueError(f"class {y} absent from the evaluation set")
        Q[:, y] = qual[mask].mean(axis=0)
    Q_avg = Q.mean(axis=0)

    density, edges = np.histogram(z, bins=bins, range=(0.0, 1.0), density=True)
    return MetricReport(
        overall_quality=float(z.mean()),
        qoe=qoe_value,
        diversity=diversity_value,
        class_quality=Q,
        class_quality_avg=Q_avg,
        class_quality_centered=Q - Q_avg[None, :],
        z_histogram=DensityHistogram(edges=edges, density=density),
        z_mass_low=float((z <= LOW_Z_THRESHOLD).mean()),
        n_eval=n,
    )
