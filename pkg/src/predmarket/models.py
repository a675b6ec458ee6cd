"""Online classifiers with probability outputs, trained by Adam.

Two architectures: multinomial logistic regression and a one-hidden-layer
ReLU network. A model is seed-trained once, then updated online with one
Adam step per newly absorbed example and fully refit (warm start) every
``retrain_period`` absorbed examples.

The whole training pipeline is deterministic given (init_seed, data order,
config): parameter init draws from ``default_rng(init_seed)`` and the
shuffle order of full fit number k draws from ``default_rng((init_seed,
k + 1))`` (offset by one so no fit shares the init stream).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from predmarket.backend import kernels
from predmarket.dataset import LabeledExample

LOGISTIC = "logistic"
ONE_HIDDEN = "one-hidden-layer"

INIT_WEIGHT_RANGE = 0.05


@dataclass(frozen=True)
class TrainConfig:
    """Adam training hyperparameters shared by seed training, online steps,
    and periodic retrains."""

    epochs: int = 10
    learning_rate: float = 5e-3
    batch_size: int = 64
    retrain_period: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    init_seed: int = 0
    cold_retrain: bool = False  # re-initialize parameters at each retrain

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.retrain_period < 1:
            raise ValueError("retrain_period must be >= 1")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: kind, input dimension, class count, and
    hidden width (one-hidden-layer only)."""

    kind: str
    input_dim: int
    n_classes: int
    hidden_nodes: int = 0

    def __post_init__(self):
        if self.kind not in (LOGISTIC, ONE_HIDDEN):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == ONE_HIDDEN and self.hidden_nodes < 1:
            raise ValueError("one-hidden-layer model needs hidden_nodes >= 1")
        if self.input_dim < 1 or self.n_classes < 2:
            raise ValueError("need input_dim >= 1 and n_classes >= 2")

    @property
    def tensor_shapes(self) -> dict:
        if self.kind == LOGISTIC:
            return {
                "w": (self.input_dim, self.n_classes),
                "b": (self.n_classes,),
            }
        return {
            "w1": (self.input_dim, self.hidden_nodes),
            "b1": (self.hidden_nodes,),
            "w2": (self.hidden_nodes, self.n_classes),
            "b2": (self.n_classes,),
        }


@dataclass
class ModelState:
    """Mutable model: parameters, Adam moments, owned data, retrain counters.

    A ModelState is exclusively owned by one simulation run; update
    operations mutate it in place and return it.
    """

    spec: ModelSpec
    params: dict
    adam_m: dict
    adam_v: dict
    adam_t: int = 0
    owned_data: list = field(default_factory=list)
    since_retrain: int = 0
    fit_count: int = 0  # completed full fits; indexes the shuffle sub-seed


def _init_params(spec: ModelSpec, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.tensor_shapes.items():
        if name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, shape)
    return params


def _zeros_like_params(spec: ModelSpec) -> dict:
    return {name: np.zeros(shape) for name, shape in spec.tensor_shapes.items()}


def predict_proba_batch(m: ModelState, X: np.ndarray) -> np.ndarray:
    """Class probabilities for every row of X, shape (n, K)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.spec.input_dim:
        raise ValueError(
            f"expected features of dim {m.spec.input_dim}, got shape {X.shape}"
        )
    p = m.params
    if m.spec.kind == LOGISTIC:
        return kernels.logistic_forward(X, p["w"], p["b"])
    return kernels.mlp_forward(X, p["w1"], p["b1"], p["w2"], p["b2"])


def predict_proba(m: ModelState, x: np.ndarray) -> np.ndarray:
    """Softmax probability estimate at a single point, shape (K,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.spec.input_dim,):
        raise ValueError(
            f"expected feature vector of dim {m.spec.input_dim}, got shape {x.shape}"
        )
    return predict_proba_batch(m, x[None, :])[0]


def predict_label(m: ModelState, x: np.ndarray) -> int:
    """Argmax class; ties break toward the lowest class index."""
    return int(np.argmax(predict_proba(m, x)))


def predict_labels_batch(m: ModelState, X: np.ndarray) -> np.ndarray:
    return np.argmax(predict_proba_batch(m, X), axis=1)


def loss_and_grads(m: ModelState, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over (X, y) and its gradient per parameter tensor."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    p = m.params
    if m.spec.kind == LOGISTIC:
        dw, db, loss = kernels.logistic_grad(X, y, p["w"], p["b"])
        return loss, {"w": dw, "b": db}
    dw1, db1, dw2, db2, loss = kernels.mlp_grad(
        X, y, p["w1"], p["b1"], p["w2"], p["b2"]
    )
    return loss, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def cross_entropy_loss(m: ModelState, X: np.ndarray, y: np.ndarray) -> float:
    probs = predict_proba_batch(m, X)
    return float(-np.log(probs[np.arange(len(y)), np.asarray(y)]).mean())


def adam_step(params: dict, grads: dict, moments, step: int, lr: float,
              beta1: float, beta2: float, eps: float):
    """Apply one bias-corrected Adam update to every tensor, in place.

    ``moments`` is the (first, second) moment dict pair; ``step`` is the
    1-based shared step counter already incremented for this update.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    m, v = moments
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        if not p.flags.c_contiguous:
            raise ValueError(f"parameter tensor {name!r} must be C-contiguous")
        kernels.adam_update(
            p.reshape(-1), np.ascontiguousarray(g).reshape(-1),
            m[name].reshape(-1), v[name].reshape(-1),
            step, lr, beta1, beta2, eps,
        )
    return params, moments


def _optimizer_step(m: ModelState, X: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    _, grads = loss_and_grads(m, X, y)
    m.adam_t += 1
    adam_step(
        m.params, grads, (m.adam_m, m.adam_v), m.adam_t,
        cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon,
    )


def _fit(m: ModelState, cfg: TrainConfig) -> None:
    """cfg.epochs passes of shuffled mini-batch Adam over the owned data.

    The shuffle order comes from a per-fit sub-seed (init_seed, fit index),
    so repeated fits see fresh permutations but stay reproducible.
    """
    X = np.stack([ex.features for ex in m.owned_data])
    y = np.array([ex.label for ex in m.owned_data], dtype=np.int64)
    shuffle_rng = np.random.default_rng((cfg.init_seed, m.fit_count + 1))
    n = len(y)
    for _ in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            _optimizer_step(m, X[idx], y[idx], cfg)
    m.fit_count += 1


def init_and_seed_train(spec: ModelSpec, seed_data, cfg: TrainConfig) -> ModelState:
    """Initialize parameters from cfg.init_seed and train on the seed data."""
    seed_data = list(seed_data)
    if not seed_data:
        raise ValueError("seed data must be non-empty")
    for ex in seed_data:
        if ex.features.shape != (spec.input_dim,):
            raise ValueError("seed example dimension does not match spec")
        if not 0 <= ex.label < spec.n_classes:
            raise ValueError("seed example label out of range")
    m = ModelState(
        spec=spec,
        params=_init_params(spec, cfg.init_seed),
        adam_m=_zeros_like_params(spec),
        adam_v=_zeros_like_params(spec),
        owned_data=seed_data,
    )
    _fit(m, cfg)
    return m


def absorb_datum(m: ModelState, ex: LabeledExample, cfg: TrainConfig) -> ModelState:
    """Take ownership of one new example: append it, run one Adam step on it,
    and trigger a full warm-start retrain once ``retrain_period`` new
    examples have accumulated. Mutates and returns ``m``."""
    if ex.features.shape != (m.spec.input_dim,):
        raise ValueError("example dimension does not match model")
    if not 0 <= ex.label < m.spec.n_classes:
        raise ValueError("example label out of range")
    m.owned_data.append(ex)
    _optimizer_step(
        m, ex.features[None, :], np.array([ex.label], dtype=np.int64), cfg
    )
    m.since_retrain += 1
    if m.since_retrain >= cfg.retrain_period:
        if cfg.cold_retrain:
            m.params = _init_params(m.spec, cfg.init_seed + m.fit_count)
            m.adam_m = _zeros_like_params(m.spec)
            m.adam_v = _zeros_like_params(m.spec)
            m.adam_t = 0
        _fit(m, cfg)
        m.since_retrain = 0
    return m


def parameter_checkpoint(m: ModelState) -> dict:
    """JSON-ready checkpoint: a flat list of named tensors with shapes and
    row-major values, plus the spec and optimizer step."""
    return {
        "kind": m.spec.kind,
        "input_dim": m.spec.input_dim,
        "n_classes": m.spec.n_classes,
        "hidden_nodes": m.spec.hidden_nodes,
        "adam_t": m.adam_t,
        "tensors": [
            {
                "name": name,
                "shape": list(val.shape),
                "values": val.reshape(-1).tolist(),
            }
            for name, val in m.params.items()
        ],
    }


def save_checkpoint(m: ModelState, path) -> None:
    with open(path, "w") as fh:
        json.dump(parameter_checkpoint(m), fh)


def restore_parameters(m: ModelState, checkpoint: dict) -> ModelState:
    """Load tensor values from a checkpoint dict into an existing state."""
    expected = m.spec.tensor_shapes
    for entry in checkpoint["tensors"]:
        name = entry["name"]
        if name not in expected or tuple(entry["shape"]) != expected[name]:
            raise ValueError(f"checkpoint tensor {name!r} does not match spec")
        m.params[name] = np.array(entry["values"], dtype=np.float64).reshape(
            entry["shape"]
        )
    m.adam_t = int(checkpoint.get("adam_t", m.adam_t))
    return m


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
