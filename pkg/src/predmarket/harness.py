"""Experiment orchestration: JSON configs, seeded grids over
(budget, alpha, repeat), and CSV/JSON result emission.

Seed discipline: every cell (budget index, alpha index, repeat) owns an
independent family of RNG streams derived from
``SeedSequence(entropy=base_seed, spawn_key=(budget_i, alpha_i, repeat))``;
no two cells share a stream, and a rerun with the same config and base seed
reproduces every output file byte for byte.

Output schema (all frozen, see README):

- ``results_raw.csv``: one row per successful cell with columns
  dataset, n_predictors, rounds, budget_index, alpha_index, repeat,
  budget, alpha, overall_quality, qoe, diversity, z_mass_low, n_eval,
  purchases_total
- ``results_aggregate.csv``: per (budget, alpha): mean, sample sd, and
  99% band half-width 2.58 * sd / sqrt(repeats) for each metric
- ``qmatrix_b{budget}_a{alpha}_r{repeat}.json``: class-specific quality
  matrix, its column average and centered form, plus per-predictor
  purchase counts and initial budgets
- ``hist_b{budget}_a{alpha}_r{repeat}.csv``: bin_left, bin_right, density
- ``errors.txt``: one block per failed cell (grid keeps going)
"""

import csv
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from predmarket.dataset import (
    Dataset,
    NoiseConfig,
    UserStream,
    inject_label_noise,
    load_csv,
    split,
    standardize,
    synth_gaussian_mixture,
)
from predmarket.environment import (
    CompetitionConfig,
    PredictorConfig,
    purchase_counts,
    run_competition,
    write_round_log,
)
from predmarket.metrics import MetricReport, evaluate_market
from predmarket.models import LOGISTIC, ModelSpec, ONE_HIDDEN, TrainConfig
from predmarket.strategy import BuyingStrategy


class ConfigError(ValueError):
    """Raised for malformed experiment configs; the message names the key."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    path: str = ""
    label_column: object = 0
    has_header: bool = False
    n_classes: int = 2
    dim: int = 2
    means: tuple = ()
    cov_scale: float = 1.0
    n: int = 0
    name: str = ""


@dataclass(frozen=True)
class PredictorTemplate:
    """Resolved per-predictor settings; budgets scale the cell's grid value."""

    n_seed: int
    model_kind: str
    hidden_nodes: int
    c_ent: float
    train: TrainConfig
    budget_scale: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    predictors: tuple
    standardize: bool = False
    noise_flip_probability: float = 0.3
    eval_count: int = 5000
    eval_subsample: int | None = None
    rounds: int = 10_000
    alpha_grid: tuple = (0.0, 1.0, 2.0, 4.0)
    budget_grid: tuple = (0, 100, 200, 400)
    repeats: int = 30
    base_seed: int = 0
    hist_bins: int = 50
    output_dir: str = "results"

    @property
    def n_predictors(self) -> int:
        return len(self.predictors)


# ------------------------------------------------------------------
# config parsing
# ------------------------------------------------------------------

_TOP_KEYS = {
    "dataset", "standardize", "noise_flip_probability", "eval_count",
    "eval_subsample", "rounds", "n_predictors", "alpha_grid", "budget_grid",
    "repeats", "base_seed", "hist_bins", "output_dir", "default_predictor",
    "predictor_overrides",
}
_DATASET_KEYS_CSV = {"type", "path", "label_column", "has_header", "name"}
_DATASET_KEYS_SYNTH = {"type", "n_classes", "dim", "means", "cov_scale", "n", "name"}
_PREDICTOR_KEYS = {"n_seed", "model", "strategy", "train", "budget_scale"}
_MODEL_KEYS = {"kind", "hidden_nodes"}
_STRATEGY_KEYS = {"type", "c_ent"}
_TRAIN_KEYS = {
    "epochs", "learning_rate", "batch_size", "retrain_period",
    "adam_beta1", "adam_beta2", "adam_epsilon", "cold_retrain",
}

_DEFAULT_PREDICTOR = {
    "n_seed": 100,
    "model": {"kind": LOGISTIC, "hidden_nodes": 0},
    "strategy": {"type": "entropy", "c_ent": 0.3},
    "train": {
        "epochs": 10, "learning_rate": 5e-3, "batch_size": 64,
        "retrain_period": 50, "adam_beta1": 0.9, "adam_beta2": 0.999,
        "adam_epsilon": 1e-8, "cold_retrain": False,
    },
    "budget_scale": 1.0,
}


def _check_keys(mapping: dict, allowed: set, ctx: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {ctx}")


def _parse_dataset(raw: dict) -> DatasetSpec:
    if not isinstance(raw, dict) or "type" not in raw:
        raise ConfigError("dataset section must be an object with a 'type'")
    kind = raw["type"]
    if kind == "csv":
        _check_keys(raw, _DATASET_KEYS_CSV, "dataset")
        if "path" not in raw:
            raise ConfigError("dataset.path is required for type 'csv'")
        return DatasetSpec(
            kind="csv",
            path=str(raw["path"]),
            label_column=raw.get("label_column", 0),
            has_header=bool(raw.get("has_header", False)),
            name=str(raw.get("name", "")),
        )
    if kind == "synthetic":
        _check_keys(raw, _DATASET_KEYS_SYNTH, "dataset")
        for key in ("n_classes", "dim", "means", "n"):
            if key not in raw:
                raise ConfigError(f"dataset.{key} is required for type 'synthetic'")
        means = tuple(tuple(float(v) for v in row) for row in raw["means"])
        return DatasetSpec(
            kind="synthetic",
            n_classes=int(raw["n_classes"]),
            dim=int(raw["dim"]),
            means=means,
            cov_scale=float(raw.get("cov_scale", 1.0)),
            n=int(raw["n"]),
            name=str(raw.get("name", "synthetic")),
        )
    raise ConfigError(f"dataset.type must be 'csv' or 'synthetic', got {kind!r}")


def _parse_predictor(raw: dict, ctx: str) -> PredictorTemplate:
    _check_keys(raw, _PREDICTOR_KEYS, ctx)
    model = raw["model"]
    _check_keys(model, _MODEL_KEYS, f"{ctx}.model")
    kind = model.get("kind", LOGISTIC)
    if kind not in (LOGISTIC, ONE_HIDDEN):
        raise ConfigError(f"{ctx}.model.kind must be '{LOGISTIC}' or '{ONE_HIDDEN}'")
    strategy = raw["strategy"]
    _check_keys(strategy, _STRATEGY_KEYS, f"{ctx}.strategy")
    if strategy.get("type", "entropy") != "entropy":
        raise ConfigError(
            f"{ctx}.strategy.type {strategy.get('type')!r} is not supported"
        )
    train = dict(raw["train"])
    _check_keys(train, _TRAIN_KEYS, f"{ctx}.train")
    try:
        train_cfg = TrainConfig(init_seed=0, **train)
        template = PredictorTemplate(
            n_seed=int(raw["n_seed"]),
            model_kind=kind,
            hidden_nodes=int(model.get("hidden_nodes", 0)),
            c_ent=float(strategy.get("c_ent", 0.3)),
            train=train_cfg,
            budget_scale=float(raw.get("budget_scale", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid values in {ctx}: {exc}") from exc
    if template.n_seed < 1:
        raise ConfigError(f"{ctx}.n_seed must be >= 1")
    if template.budget_scale < 0:
        raise ConfigError(f"{ctx}.budget_scale must be non-negative")
    return template


def _merge(base: dict, override: dict) -> dict:
    merged = {}
    for key, val in base.items():
        if isinstance(val, dict):
            sub = override.get(key, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"override for {key!r} must be an object")
            merged[key] = {**val, **sub}
        else:
            merged[key] = override.get(key, val)
    extra = set(override) - set(base)
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in predictor override")
    return merged


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config root")
    if "dataset" not in raw:
        raise ConfigError("config requires a 'dataset' section")
    dataset = _parse_dataset(raw["dataset"])

    n_predictors = int(raw.get("n_predictors", 18))
    if n_predictors < 2:
        raise ConfigError("n_predictors must be >= 2")
    default = _merge(_DEFAULT_PREDICTOR, raw.get("default_predictor", {}))
    overrides = raw.get("predictor_overrides")
    if overrides is None:
        overrides = [None] * n_predictors
    if len(overrides) != n_predictors:
        raise ConfigError(
            f"predictor_overrides has length {len(overrides)}, expected {n_predictors}"
        )
    predictors = []
    for i, override in enumerate(overrides):
        merged = default if override is None else _merge(default, override)
        predictors.append(_parse_predictor(merged, f"predictor[{i}]"))

    alpha_grid = tuple(float(a) for a in raw.get("alpha_grid", (0.0, 1.0, 2.0, 4.0)))
    budget_grid = tuple(int(b) for b in raw.get("budget_grid", (0, 100, 200, 400)))
    if not alpha_grid or not budget_grid:
        raise ConfigError("alpha_grid and budget_grid must be non-empty")
    if any(a < 0 for a in alpha_grid):
        raise ConfigError("alpha values must be non-negative")
    if any(b < 0 for b in budget_grid):
        raise ConfigError("budget values must be non-negative")

    cfg = ExperimentConfig(
        dataset=dataset,
        predictors=tuple(predictors),
        standardize=bool(raw.get("standardize", False)),
        noise_flip_probability=float(raw.get("noise_flip_probability", 0.3)),
        eval_count=int(raw.get("eval_count", 5000)),
        eval_subsample=(
            None if raw.get("eval_subsample") is None else int(raw["eval_subsample"])
        ),
        rounds=int(raw.get("rounds", 10_000)),
        alpha_grid=alpha_grid,
        budget_grid=budget_grid,
        repeats=int(raw.get("repeats", 30)),
        base_seed=int(raw.get("base_seed", 0)),
        hist_bins=int(raw.get("hist_bins", 50)),
        output_dir=str(raw.get("output_dir", "results")),
    )
    if cfg.repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if cfg.rounds < 0:
        raise ConfigError("rounds must be non-negative")
    if cfg.eval_count < 1:
        raise ConfigError("eval_count must be >= 1")
    if cfg.base_seed < 0:
        raise ConfigError("base_seed must be non-negative")
    if not 0.0 <= cfg.noise_flip_probability <= 1.0:
        raise ConfigError("noise_flip_probability must be in [0, 1]")
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment config; unknown keys are errors."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


# ------------------------------------------------------------------
# seeds and cells
# ------------------------------------------------------------------


@dataclass(frozen=True)
class CellSeeds:
    noise: int
    split: int
    market: int
    stream: int
    eval_subsample: int
    seed_data: tuple
    init: tuple


def derive_cell_seeds(base_seed: int, budget_i: int, alpha_i: int,
                      repeat: int, n_predictors: int) -> CellSeeds:
    """Independent integer seeds for one grid cell.

    Distinct (budget_i, alpha_i, repeat) triples map to distinct
    SeedSequence spawn keys, so no two cells share a stream.
    """
    ss = np.random.SeedSequence(
        entropy=base_seed, spawn_key=(budget_i, alpha_i, repeat)
    )
    state = ss.generate_state(5 + 2 * n_predictors, dtype=np.uint64)
    vals = [int(v) for v in state]
    return CellSeeds(
        noise=vals[0],
        split=vals[1],
        market=vals[2],
        stream=vals[3],
        eval_subsample=vals[4],
        seed_data=tuple(vals[5:5 + n_predictors]),
        init=tuple(vals[5 + n_predictors:]),
    )


@dataclass
class CellResult:
    budget_index: int
    alpha_index: int
    repeat_index: int
    budget: int
    alpha: float
    report: MetricReport | None = None
    purchases: tuple = ()
    initial_budgets: tuple = ()
    error: str | None = None


@dataclass
class GridResult:
    config: ExperimentConfig
    cells: list

    @property
    def failed(self) -> list:
        return [c for c in self.cells if c.error is not None]


def materialize_dataset(spec: DatasetSpec, base_seed: int) -> Dataset:
    """Load the raw dataset once; synthetic generation is seeded off the
    config's base seed."""
    if spec.kind == "csv":
        return load_csv(spec.path, spec.label_column, spec.has_header,
                        name=spec.name)
    return synth_gaussian_mixture(
        spec.n_classes, spec.dim, spec.means, spec.cov_scale, spec.n,
        seed=base_seed, name=spec.name,
    )


def run_cell(cfg: ExperimentConfig, raw: Dataset, budget_i: int,
             alpha_i: int, repeat: int,
             round_log_path: str | None = None) -> CellResult:
    """Run one (budget, alpha, repeat) competition and evaluate it.

    ``round_log_path`` optionally streams the round records to NDJSON.
    """
    budget = cfg.budget_grid[budget_i]
    alpha = cfg.alpha_grid[alpha_i]
    result = CellResult(
        budget_index=budget_i, alpha_index=alpha_i, repeat_index=repeat,
        budget=budget, alpha=alpha,
    )
    seeds = derive_cell_seeds(
        cfg.base_seed, budget_i, alpha_i, repeat, cfg.n_predictors
    )
    d = standardize(raw) if cfg.standardize else raw
    if cfg.noise_flip_probability > 0.0:
        d = inject_label_noise(
            d, NoiseConfig(cfg.noise_flip_probability, seeds.noise)
        )
    pair = split(d, cfg.eval_count, seeds.split)

    pred_cfgs = []
    for i, tpl in enumerate(cfg.predictors):
        spec = ModelSpec(
            kind=tpl.model_kind,
            input_dim=d.dim,
            n_classes=d.n_classes,
            hidden_nodes=tpl.hidden_nodes,
        )
        pred_cfgs.append(PredictorConfig(
            n_seed=tpl.n_seed,
            budget=int(math.floor(tpl.budget_scale * budget)),
            model_spec=spec,
            strategy=BuyingStrategy(tpl.c_ent),
            train_cfg=replace(tpl.train, init_seed=seeds.init[i]),
            seed_data_seed=seeds.seed_data[i],
        ))
    comp = CompetitionConfig(
        predictors=tuple(pred_cfgs), alpha=alpha, market_seed=seeds.market
    )
    stream = UserStream(pair.competition, seeds.stream)
    market, records = run_competition(comp, stream, cfg.rounds)
    if round_log_path is not None:
        write_round_log(records, round_log_path)

    result.report = evaluate_market(
        [p.model for p in market.predictors], pair.evaluation, alpha,
        bins=cfg.hist_bins, subsample=cfg.eval_subsample,
        subsample_seed=seeds.eval_subsample,
    )
    result.purchases = tuple(
        int(c) for c in purchase_counts(records, cfg.n_predictors)
    )
    result.initial_budgets = tuple(p.budget.initial for p in market.predictors)
    return result


def _run_cell_safe(cfg, raw, budget_i, alpha_i, repeat) -> CellResult:
    try:
        return run_cell(cfg, raw, budget_i, alpha_i, repeat)
    except Exception:
        return CellResult(
            budget_index=budget_i, alpha_index=alpha_i, repeat_index=repeat,
            budget=cfg.budget_grid[budget_i], alpha=cfg.alpha_grid[alpha_i],
            error=traceback.format_exc(),
        )


def run_grid(cfg: ExperimentConfig, workers: int = 1) -> GridResult:
    """Run every (budget, alpha, repeat) cell; failures are quarantined into
    CellResult.error and never abort sibling cells."""
    raw = materialize_dataset(cfg.dataset, cfg.base_seed)
    coords = [
        (bi, ai, r)
        for bi in range(len(cfg.budget_grid))
        for ai in range(len(cfg.alpha_grid))
        for r in range(cfg.repeats)
    ]
    if workers <= 1:
        cells = [_run_cell_safe(cfg, raw, *c) for c in coords]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell_safe, cfg, raw, *c) for c in coords]
            cells = [f.result() for f in futures]
    return GridResult(config=cfg, cells=cells)


# ------------------------------------------------------------------
# report emission
# ------------------------------------------------------------------

RAW_COLUMNS = [
    "dataset", "n_predictors", "rounds", "budget_index", "alpha_index",
    "repeat", "budget", "alpha", "overall_quality", "qoe", "diversity",
    "z_mass_low", "n_eval", "purchases_total",
]

_AGG_METRICS = ["overall_quality", "qoe", "diversity", "z_mass_low"]


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _cell_tag(cell: CellResult) -> str:
    return f"b{cell.budget}_a{cell.alpha:g}_r{cell.repeat_index}"


def write_raw_csv(grid: GridResult, path) -> None:
    cfg = grid.config
    name = cfg.dataset.name or cfg.dataset.kind
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_COLUMNS)
        for cell in grid.cells:
            if cell.error is not None:
                continue
            rep = cell.report
            writer.writerow([
                name, cfg.n_predictors, cfg.rounds, cell.budget_index,
                cell.alpha_index, cell.repeat_index, cell.budget,
                _fmt(cell.alpha), _fmt(rep.overall_quality), _fmt(rep.qoe),
                _fmt(rep.diversity), _fmt(rep.z_mass_low), rep.n_eval,
                sum(cell.purchases),
            ])


def aggregate_from_raw(raw_path):
    """Group raw rows by cell coordinates and compute mean / sample sd /
    99% band half-width (2.58 * sd / sqrt(n)) per metric.

    Returns (header, rows). Exactly reproducible from the raw CSV alone.
    """
    with open(raw_path, newline="") as fh:
        reader = csv.DictReader(fh)
        raw_rows = list(reader)
    groups: dict = {}
    order = []
    for row in raw_rows:
        key = (int(row["budget_index"]), int(row["alpha_index"]))
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    header = ["budget", "alpha", "repeats"]
    for metric in _AGG_METRICS:
        header += [f"{metric}_mean", f"{metric}_sd", f"{metric}_band"]
    rows = []
    for key in sorted(order):
        members = groups[key]
        out = [members[0]["budget"], members[0]["alpha"], str(len(members))]
        for metric in _AGG_METRICS:
            values = np.array([float(m[metric]) for m in members])
            mean = float(values.mean())
            sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            band = 2.58 * sd / math.sqrt(len(values))
            out += [_fmt(mean), _fmt(sd), _fmt(band)]
        rows.append(out)
    return header, rows


def write_aggregate_csv(raw_path, out_path) -> None:
    header, rows = aggregate_from_raw(raw_path)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def emit_reports(grid: GridResult, outdir) -> dict:
    """Write raw CSV, aggregate CSV, per-cell Q-matrix JSONs, per-cell
    histogram CSVs, and an errors file when cells failed.

    Returns a manifest of written paths.
    """
    os.makedirs(outdir, exist_ok=True)
    raw_path = os.path.join(outdir, "results_raw.csv")
    agg_path = os.path.join(outdir, "results_aggregate.csv")
    write_raw_csv(grid, raw_path)
    write_aggregate_csv(raw_path, agg_path)
    manifest = {"raw": raw_path, "aggregate": agg_path, "cells": [], "errors": None}

    for cell in grid.cells:
        if cell.error is not None:
            continue
        rep = cell.report
        tag = _cell_tag(cell)
        qpath = os.path.join(outdir, f"qmatrix_{tag}.json")
        with open(qpath, "w") as fh:
            json.dump({
                "budget": cell.budget,
                "alpha": cell.alpha,
                "repeat": cell.repeat_index,
                "class_quality": rep.class_quality.tolist(),
                "class_quality_avg": rep.class_quality_avg.tolist(),
                "class_quality_centered": rep.class_quality_centered.tolist(),
                "purchases": list(cell.purchases),
                "initial_budgets": list(cell.initial_budgets),
            }, fh, sort_keys=True)
        hpath = os.path.join(outdir, f"hist_{tag}.csv")
        with open(hpath, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left", "bin_right", "density"])
            edges = rep.z_histogram.edges
            for i, dens in enumerate(rep.z_histogram.density):
                writer.writerow([_fmt(float(edges[i])), _fmt(float(edges[i + 1])),
                                 _fmt(float(dens))])
        manifest["cells"].append(tag)

    if grid.failed:
        err_path = os.path.join(outdir, "errors.txt")
        with open(err_path, "w") as fh:
            for cell in grid.failed:
                fh.write(
                    f"cell budget={cell.budget} alpha={cell.alpha} "
                    f"repeat={cell.repeat_index}\n{cell.error}\n"
                )
        manifest["errors"] = err_path
    return manifest
