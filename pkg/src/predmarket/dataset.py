"""User distributions: CSV ingestion, synthetic generation, preprocessing,
label noise, competition/evaluation splitting, and i.i.d. streaming.

All randomized operations are pure functions of their inputs and a seed.
"""

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabeledExample:
    """One user: a feature vector and its class label."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of labeled examples with a fixed class count.

    ``X`` is (n, d) float64, ``y`` is (n,) int64 with every entry in
    [0, n_classes). ``n_classes`` may exceed the number of labels actually
    observed (e.g. after a split), but never the other way around.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    name: str = ""

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {X.shape}")
        if len(X) == 0:
            raise ValueError("dataset must contain at least one example")
        if y.shape != (len(X),):
            raise ValueError("feature/label counts disagree")
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError("labels must lie in [0, n_classes)")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.X)

    def example(self, i: int) -> LabeledExample:
        return LabeledExample(self.X[i], int(self.y[i]))

    @property
    def examples(self) -> list:
        return [self.example(i) for i in range(len(self))]


@dataclass(frozen=True)
class SplitPair:
    """Disjoint competition/evaluation halves of one dataset."""

    competition: Dataset
    evaluation: Dataset


@dataclass(frozen=True)
class NoiseConfig:
    """Label-flip configuration: with ``flip_probability`` an example's label
    is replaced by a uniform draw over all classes (possibly the original)."""

    flip_probability: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError(
                f"flip_probability must be in [0, 1], got {self.flip_probability}"
            )


@dataclass(frozen=True)
class UserStream:
    """i.i.d. user arrivals: uniform draws with replacement from ``source``.

    ``draw(stream, t)`` is a pure function of (source, rng_seed, t).
    """

    source: Dataset
    rng_seed: int = 0


def load_csv(path, label_column, has_header: bool = False, name: str = "") -> Dataset:
    """Load a comma-separated file into a Dataset.

    ``label_column`` is a zero-based column index, or a column name when
    ``has_header`` is true. Labels are re-indexed densely to {0, ..., K-1}
    in order of first appearance; all other columns parse as float features.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if has_header:
        if not rows:
            raise ValueError(f"{path}: empty file")
        header, rows = rows[0], rows[1:]
        if isinstance(label_column, str):
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise ValueError(
                    f"{path}: no column named {label_column!r} in header"
                ) from None
        else:
            label_idx = int(label_column)
    else:
        if isinstance(label_column, str):
            raise ValueError("label column by name requires has_header=True")
        label_idx = int(label_column)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    arity = len(rows[0])
    if not 0 <= label_idx < arity:
        raise ValueError(f"{path}: label column {label_idx} out of range")

    label_codes: dict[str, int] = {}
    features = np.empty((len(rows), arity - 1), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != arity:
            raise ValueError(
                f"{path}: row {r + 1} has {len(row)} cells, expected {arity}"
            )
        token = row[label_idx].strip()
        if token not in label_codes:
            label_codes[token] = len(label_codes)
        labels[r] = label_codes[token]
        c = 0
        for j, cell in enumerate(row):
            if j == label_idx:
                continue
            try:
                features[r, c] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric feature cell {cell!r} at row {r + 1}"
                ) from None
            c += 1
    if len(label_codes) < 2:
        raise ValueError(f"{path}: only one class present in label column")
    return Dataset(features, labels, n_classes=len(label_codes), name=name or str(path))


def standardize(d: Dataset) -> Dataset:
    """Center each feature column to mean 0 and scale to standard deviation 1.

    Zero-variance columns are left at 0 after centering. Idempotent up to
    float rounding.
    """
    mean = d.X.mean(axis=0)
    std = d.X.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    return Dataset((d.X - mean) / scale, d.y, d.n_classes, d.name)


def inject_label_noise(d: Dataset, cfg: NoiseConfig) -> Dataset:
    """Independently flip each label to a uniform class draw with the
    configured probability. The draw ranges over all classes, so the
    effective flip rate is flip_probability * (K-1)/K."""
    rng = np.random.default_rng(cfg.rng_seed)
    flip = rng.random(len(d)) < cfg.flip_probability
    y = d.y.copy()
    y[flip] = rng.integers(0, d.n_classes, size=int(flip.sum()))
    return Dataset(d.X, y, d.n_classes, d.name)


def split(d: Dataset, eval_count: int, seed: int = 0) -> SplitPair:
    """Sample ``eval_count`` examples without replacement into an evaluation
    set; the remainder form the competition set. Both halves keep the
    original example order."""
    if not 0 < eval_count < len(d):
        raise ValueError(
            f"eval_count must be in (0, {len(d)}), got {eval_count}"
        )
    perm = np.random.default_rng(seed).permutation(len(d))
    eval_idx = np.sort(perm[:eval_count])
    comp_idx = np.sort(perm[eval_count:])
    comp = Dataset(d.X[comp_idx], d.y[comp_idx], d.n_classes, d.name)
    ev = Dataset(d.X[eval_idx], d.y[eval_idx], d.n_classes, d.name)
    return SplitPair(competition=comp, evaluation=ev)


def synth_gaussian_mixture(
    n_classes: int,
    dim: int,
    means,
    cov_scale: float,
    n: int,
    seed: int = 0,
    name: str = "synthetic",
) -> Dataset:
    """Generate ``n`` examples with a uniform class prior; features are the
    class mean plus isotropic Gaussian noise of scale ``cov_scale``."""
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (n_classes, dim):
        raise ValueError(
            f"means must have shape ({n_classes}, {dim}), got {means.shape}"
        )
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if n < n_classes:
        raise ValueError(f"n must be at least n_classes, got {n}")
    if cov_scale <= 0.0:
        raise ValueError("cov_scale must be positive")
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_classes, size=n)
    X = means[y] + cov_scale * rng.standard_normal((n, dim))
    return Dataset(X, y, n_classes, name)


def draw(stream: UserStream, t: int) -> LabeledExample:
    """The user arriving at round ``t``: a uniform draw with replacement from
    the stream's source, deterministic in (rng_seed, t)."""
    if t < 0:
        raise ValueError("round index must be non-negative")
    idx = int(np.random.default_rng((stream.rng_seed, t)).integers(len(stream.source)))
    return stream.source.example(idx)
