"""Command-line interface: synth, run, select, eval, report."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, model as md
from .data import DatasetError, Pool, SynthSpec, load_dataset, save_dataset, \
    synth_dataset
from .density import rasterize
from .metrics import evaluate
from .selection import STRATEGIES, SelectionError, SelectionRequest, select

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load_json(path):
    path = Path(path)
    if not path.is_file():
        raise harness.ConfigError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise harness.ConfigError(f"bad JSON in {path}: {exc}") from exc


def cmd_synth(args) -> int:
    spec_dict = _load_json(args.config)
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    spec = SynthSpec.from_dict(spec_dict)
    scenes = synth_dataset(spec)
    manifest = save_dataset(scenes, args.out)
    print(f"wrote {len(scenes)} scenes to {manifest}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg_dict = _load_json(args.config)
    if args.seed is not None:
        cfg_dict["base_seed"] = args.seed
    strategies = cfg_dict.pop("strategies", None)
    records, tables = [], []
    if strategies is None:
        strategies = [cfg_dict.get("strategy", "PSSW")]
    final_state = None
    for strat in strategies:
        cfg = harness.ExperimentConfig.from_dict({**cfg_dict,
                                                  "strategy": strat})
        exp = harness.Experiment(cfg)
        for trial in range(cfg.trials):
            trial_records, state = exp.run_trial(trial)
            records.extend(trial_records)
            if trial == 0:
                final_state = state
        tables.append(harness.summarize(records, cfg.strategy_label,
                                        cfg.trials))
    results_path, summary_path = harness.write_outputs(args.out, records,
                                                       tables)
    if args.checkpoint_out:
        md.save_checkpoint(final_state, args.checkpoint_out)
        print(f"wrote checkpoint to {args.checkpoint_out}")
    print(f"wrote {results_path} and {summary_path}")
    for t in tables:
        print(f"{t.strategy}: MAE {t.mae_mean:.3f} +/- {t.mae_std:.3f}, "
              f"MSE {t.mse_mean:.3f} +/- {t.mse_std:.3f}")
    if args.figures:
        from .report import render_report
        for p in render_report(records, tables, args.out):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_select(args) -> int:
    state = md.load_checkpoint(args.checkpoint)
    scenes = load_dataset(args.manifest)
    by_id = {s.id: s for s in scenes}
    labeled = [line.strip() for line in Path(args.labeled).read_text().split()
               if line.strip()] if args.labeled else []
    unknown = [i for i in labeled if i not in by_id]
    if unknown:
        raise DatasetError(f"labeled ids not in manifest: {unknown[:5]}")
    pool = Pool(labeled=frozenset(labeled),
                unlabeled=frozenset(by_id) - frozenset(labeled))
    feat = state.feature_params
    preds = {}
    for i in sorted(pool.unlabeled):
        _, pred = md.forward(state, md.featurize(by_id[i], feat))
        preds[i] = pred
    gt_maps = {i: rasterize(by_id[i], feat.cell_size, args.sigma)
               for i in labeled}
    req = SelectionRequest(strategy=args.strategy, m=args.m, level=args.level,
                           rng_seed=args.seed if args.seed is not None else 0)
    chosen = select(pool, preds, gt_maps, req)
    text = "\n".join(chosen) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(chosen)} ids to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    state = md.load_checkpoint(args.checkpoint)
    scenes = load_dataset(args.manifest)
    feat = state.feature_params
    preds, gts = [], []
    for s in scenes:
        _, pred = md.forward(state, md.featurize(s, feat))
        preds.append(pred)
        gts.append(rasterize(s, feat.cell_size, args.sigma))
    report = evaluate(preds, gts)
    row = {"n_scenes": report.n_scenes, "mae": report.mae, "mse": report.mse,
           **{f"game{L}": report.game[L] for L in sorted(report.game)}}
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            writer.writeheader()
            writer.writerow(row)
        print(f"wrote {args.out}")
    else:
        for k, v in row.items():
            print(f"{k}: {v}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_report
    text = Path(args.results).read_text()
    records = harness.parse_results_csv(text)
    tables = harness.summarize_all(records)
    for p in render_report(records, tables, args.out):
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdal",
        description="Active-learning crowd counting: synthetic datasets, "
                    "experiment runs, selection debugging, evaluation, and "
                    "report figures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="SynthSpec JSON file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.add_argument("--seed", type=int, default=None,
                   help="override base_seed")
    p.add_argument("--figures", action="store_true",
                   help="also render report figures into the output dir")
    p.add_argument("--checkpoint-out", default=None,
                   help="save trial-0 final model state here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("select", help="one selection step from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labeled", default=None,
                   help="file of labeled scene ids, one per line")
    p.add_argument("--strategy", choices=STRATEGIES, default="PSSW")
    p.add_argument("-m", type=int, default=10, help="scenes to select")
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render figures from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, DatasetError, SelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
