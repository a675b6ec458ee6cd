"""The per-round competition dynamics.

Each round one user arrives. Every predictor with budget left evaluates its
buying rule on the query; if any show purchase intent the user picks one
buyer uniformly at random (financial benefit beats quality), the buyer pays
one budget unit. Otherwise the user picks by softmax over prediction
qualities at temperature alpha. In both cases only the selected predictor
receives the label and updates its model.

RNG discipline: the market consumes exactly one variate per round from its
single generator — an ``integers`` draw to pick among buyers in purchase
mode, or a ``random`` draw inverted through the softmax CDF in quality
mode. Rounds are therefore replayable from (config, seeds) alone.
"""

import json
from dataclasses import dataclass

import numpy as np

from predmarket.dataset import Dataset, LabeledExample, UserStream, draw
from predmarket.metrics import CORRECTNESS, QualityFunction
from predmarket.models import (
    ModelSpec,
    ModelState,
    TrainConfig,
    absorb_datum,
    init_and_seed_train,
    predict_label,
    predict_proba,
)
from predmarket.strategy import (
    Budget,
    BuyingStrategy,
    charge,
    shows_purchase_intent,
    wants_to_buy,
)

PURCHASE = "purchase"
QUALITY = "quality"


@dataclass
class PredictorState:
    """One competitor: its model, buying strategy, budget, and train config."""

    id: int
    model: ModelState
    strategy: BuyingStrategy
    budget: Budget
    train_cfg: TrainConfig


@dataclass
class MarketState:
    """All competitors plus the market-level selection RNG."""

    predictors: list
    alpha: float
    rng_seed: int
    round: int = 0
    quality_fn: QualityFunction = CORRECTNESS
    rng: np.random.Generator = None

    def __post_init__(self):
        if len(self.predictors) < 2:
            raise ValueError("a market needs at least 2 predictors")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        ids = [p.id for p in self.predictors]
        if len(set(ids)) != len(ids):
            raise ValueError("predictor ids must be unique")
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)


@dataclass(frozen=True)
class RoundRecord:
    """Audit record of one round."""

    t: int
    mode: str
    buyer_ids: tuple
    winner: int
    predictions: tuple
    user: LabeledExample


@dataclass(frozen=True)
class PredictorConfig:
    """Per-predictor build recipe for a competition run."""

    n_seed: int
    budget: int
    model_spec: ModelSpec
    strategy: BuyingStrategy
    train_cfg: TrainConfig
    seed_data_seed: int

    def __post_init__(self):
        if self.n_seed < 1:
            raise ValueError("n_seed must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")


@dataclass(frozen=True)
class CompetitionConfig:
    """Everything needed to seed-train a market and run it for T rounds."""

    predictors: tuple
    alpha: float
    market_seed: int

    def __post_init__(self):
        if len(self.predictors) < 2:
            raise ValueError("need at least 2 predictor configs")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


def collect_buyers(market: MarketState, x: np.ndarray) -> list:
    """Ids of predictors showing purchase intent at query x, ascending."""
    buyers = []
    for p in market.predictors:
        probs = predict_proba(p.model, x)
        wants = wants_to_buy(p.strategy, probs, p.model.spec.n_classes)
        if shows_purchase_intent(p.budget, wants):
            buyers.append(p.id)
    return buyers


def select_among_buyers(buyers, rng: np.random.Generator) -> int:
    """Uniform pick among buyer ids; consumes one integers() draw."""
    buyers = sorted(buyers)
    if not buyers:
        raise ValueError("buyer set must be non-empty")
    return buyers[int(rng.integers(len(buyers)))]

def selection_probabilities(qualities, alpha: float) -> np.ndarray:
    """Softmax choice distribution p_i = exp(alpha q_i) / sum_j exp(alpha q_j),
    computed with max-shift for stability."""
    q = np.asarray(qualities, dtype=np.float64)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise ValueError("qualities must be finite and non-negative")
    scaled = alpha * q
    e = np.exp(scaled - scaled.max())
    return e / e.sum()


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    # inverse-CDF with a single uniform draw; clip guards the cumsum's
    # final rounding to slightly below 1
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def select_by_quality(market: MarketState, user: LabeledExample,
                      rng: np.random.Generator) -> int:
    """Quality-mode selection: softmax over q(Y, prediction) at temperature
    alpha; consumes one random() draw."""
    qualities = np.array([
        market.quality_fn.evaluate(user.label, predict_label(p.model, user.features))
        for p in market.predictors
    ])
    probs = selection_probabilities(qualities, market.alpha)
    return market.predictors[_sample_index(probs, rng)].id


def run_round(market: MarketState, user: LabeledExample):
    """Execute one competition round; mutates the market and returns
    (market, RoundRecord). Exactly one predictor's model changes.

    Equivalent to collect_buyers + select_among_buyers / select_by_quality,
    but evaluates each model once per round.
    """
    probs = [predict_proba(p.model, user.features) for p in market.predictors]
    predictions = tuple(int(np.argmax(pr)) for pr in probs)
    buyers = [
        p.id
        for p, pr in zip(market.predictors, probs)
        if shows_purchase_intent(
            p.budget, wants_to_buy(p.strategy, pr, p.model.spec.n_classes)
        )
    ]
    if buyers:
        mode = PURCHASE
        winner_id = select_among_buyers(buyers, market.rng)
    else:
        mode = QUALITY
        qualities = np.array([
            market.quality_fn.evaluate(user.label, pred) for pred in predictions
        ])
        weights = selection_probabilities(qualities, market.alpha)
        winner_id = market.predictors[_sample_index(weights, market.rng)].id

    by_id = {p.id: p for p in market.predictors}
    winner = by_id[winner_id]
    if mode == PURCHASE:
        winner.budget = charge(winner.budget)
    absorb_datum(winner.model, user, winner.train_cfg)

    record = RoundRecord(
        t=market.round,
        mode=mode,
        buyer_ids=tuple(buyers),
        winner=winner_id,
        predictions=predictions,
        user=user,
    )
    market.round += 1
    return market, record


def build_market(cfg: CompetitionConfig, source: Dataset) -> MarketState:
    """Seed-train all predictors independently and assemble the market.

    Predictor i's seed data are n_seed i.i.d. draws (with replacement) from
    ``source`` under its own seed_data_seed.
    """
    predictors = []
    for i, pc in enumerate(cfg.predictors):
        rng = np.random.default_rng(pc.seed_data_seed)
        idx = rng.integers(0, len(source), size=pc.n_seed)
        seed_data = [source.example(int(j)) for j in idx]
        model = init_and_seed_train(pc.model_spec, seed_data, pc.train_cfg)
        predictors.append(
            PredictorState(
                id=i,
                model=model,
                strategy=pc.strategy,
                budget=Budget.fresh(pc.budget),
                train_cfg=pc.train_cfg,
            )
        )
    return MarketState(predictors=predictors, alpha=cfg.alpha,
                       rng_seed=cfg.market_seed)


def run_competition(cfg: CompetitionConfig, stream: UserStream, rounds: int):
    """Seed-train the market, then run ``rounds`` rounds against the stream.

    Returns (final MarketState, list of RoundRecord).
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    market = build_market(cfg, stream.source)
    records = []
    for t in range(rounds):
        user = draw(stream, t)
        _, record = run_round(market, user)
        records.append(record)
    return market, records


def purchase_counts(records, n_predictors: int) -> np.ndarray:
    """Purchases per predictor over a run's records."""
    counts = np.zeros(n_predictors, dtype=np.int64)
    for r in records:
        if r.mode == PURCHASE:
            counts[r.winner] += 1
    return counts


def write_round_log(records, path) -> None:
    """Stream records to newline-delimited JSON.

    Fields per line: t, mode, buyers, winner, predictions, label. The user
    query itself is recoverable from the run's stream seed, so features are
    not duplicated into the log.
    """
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps({
                "t": r.t,
                "mode": r.mode,
                "buyers": list(r.buyer_ids),
                "winner": r.winner,
                "predictions": list(r.predictions),
                "label": r.user.label,
            }, sort_keys=True))
            fh.write("\n")
