"""Command-line interface.

Subcommands:

- ``run``            one (budget, alpha, repeat) cell; prints metrics JSON
- ``grid``           the full (budget x alpha x repeat) grid
- ``verify-theory``  closed-form / bounds / sufficient-condition battery
- ``report``         re-aggregate an existing raw CSV

Exit code 0 only when every cell (or every check) succeeds.
"""

import argparse
import json
import sys
from dataclasses import replace

from predmarket import harness, theory


def _add_common(parser, workers: bool = False):
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config output_dir)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's base_seed")
    if workers:
        parser.add_argument("--workers", type=int, default=1,
                            help="parallel cell workers (default 1)")


def _load_config(args) -> harness.ExperimentConfig:
    cfg = harness.parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    try:
        budget_i = (cfg.budget_grid.index(args.budget)
                    if args.budget is not None else 0)
    except ValueError:
        print(f"budget {args.budget} is not in the config's budget_grid",
              file=sys.stderr)
        return 2
    try:
        alpha_i = (cfg.alpha_grid.index(args.alpha)
                   if args.alpha is not None else 0)
    except ValueError:
        print(f"alpha {args.alpha} is not in the config's alpha_grid",
              file=sys.stderr)
        return 2
    if not 0 <= args.repeat < cfg.repeats:
        print(f"repeat must be in [0, {cfg.repeats})", file=sys.stderr)
        return 2

    raw = harness.materialize_dataset(cfg.dataset, cfg.base_seed)
    cell = harness.run_cell(cfg, raw, budget_i, alpha_i, args.repeat,
                            round_log_path=args.round_log)
    grid = harness.GridResult(config=cfg, cells=[cell])
    harness.emit_reports(grid, cfg.output_dir)
    rep = cell.report
    print(json.dumps({
        "budget": cell.budget,
        "alpha": cell.alpha,
        "repeat": cell.repeat_index,
        "overall_quality": rep.overall_quality,
        "qoe": rep.qoe,
        "diversity": rep.diversity,
        "z_mass_low": rep.z_mass_low,
        "n_eval": rep.n_eval,
        "purchases": list(cell.purchases),
    }, sort_keys=True))
    return 0


def _cmd_grid(args) -> int:
    cfg = _load_config(args)
    grid = harness.run_grid(cfg, workers=args.workers)
    manifest = harness.emit_reports(grid, cfg.output_dir)
    n_fail = len(grid.failed)
    total = len(grid.cells)
    print(f"{total - n_fail}/{total} cells succeeded; "
          f"raw results in {manifest['raw']}")
    if n_fail:
        print(f"{n_fail} cell(s) failed; see {manifest['errors']}",
              file=sys.stderr)
        return 1
    return 0


def _cmd_verify_theory(args) -> int:
    report = theory.run_verification_battery(
        seed=args.seed, n_vectors=args.vectors,
        n_instances=args.instances, n_pairs=args.pairs,
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if report["all_pass"] else 1


def _cmd_report(args) -> int:
    import os

    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "results_aggregate.csv")
    harness.write_aggregate_csv(args.raw, out_path)
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predmarket",
        description="Competition-with-data-purchase simulator and analysis tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single grid cell")
    _add_common(p_run)
    p_run.add_argument("--budget", type=int, default=None,
                       help="budget value from the grid (default: first)")
    p_run.add_argument("--alpha", type=float, default=None,
                       help="alpha value from the grid (default: first)")
    p_run.add_argument("--repeat", type=int, default=0)
    p_run.add_argument("--round-log", default=None,
                       help="also write the round-by-round NDJSON log here")
    p_run.set_defaults(func=_cmd_run)

    p_grid = sub.add_parser("grid", help="run the full experiment grid")
    _add_common(p_grid, workers=True)
    p_grid.set_defaults(func=_cmd_grid)

    p_vt = sub.add_parser("verify-theory",
                          help="run the closed-form and bounds battery")
    p_vt.add_argument("--seed", type=int, default=0)
    p_vt.add_argument("--vectors", type=int, default=1000,
                      help="random correctness vectors for the closed-form check")
    p_vt.add_argument("--instances", type=int, default=500,
                      help="random instances for the bounds check")
    p_vt.add_argument("--pairs", type=int, default=10_000,
                      help="market pairs per market size for the soundness sweep")
    p_vt.add_argument("--out", default=None, help="also write the JSON report here")
    p_vt.set_defaults(func=_cmd_verify_theory)

    p_rep = sub.add_parser("report", help="re-aggregate a raw results CSV")
    p_rep.add_argument("--raw", required=True, help="path to results_raw.csv")
    p_rep.add_argument("--out", default="results", help="output directory")
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
