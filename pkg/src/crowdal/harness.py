"""Active-learning protocol driver: cycles, multi-trial experiments, and
results persistence."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import alignment as al
from . import model as md
from .data import Pool, SynthSpec, annotate, load_dataset, synth_dataset
from .density import rasterize
from .metrics import evaluate
from .selection import STRATEGIES, SelectionRequest, select

ALIGNMENT_MODES = ("none", "grl", "grl_mix")
GAME_LEVELS = (0, 1, 2, 3)
RESULTS_HEADER = ["strategy", "trial", "cycle", "labeled", "mae", "mse",
                  "game0", "game1", "game2", "game3", "selected_ids"]
SUMMARY_HEADER = ["strategy", "mae_mean", "mae_std", "mse_mean", "mse_std"]


class ConfigError(Exception):
    pass


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict  # {"manifest": path} or {"synth": {...}}
    label_budget: int  # total scenes that may be annotated (M)
    cycle_batch: int   # scenes annotated per cycle (m)
    strategy: str = "PSSW"
    level: int = 3
    alignment: str = "none"
    align_every_cycle: bool = False
    beta: float = 3.0
    alpha: float = 0.5
    sigma: float = 4.0
    cell_size: float = 16.0
    epochs_per_cycle: int = 100
    lr: float = 1e-4
    momentum: float = 0.95
    trials: int = 10
    base_seed: int = 0
    test_fraction: float = 0.4
    hidden: int = 16
    latent_dim: int = 8
    radii: tuple[float, ...] = (16.0, 32.0, 64.0)

    def __post_init__(self):
        if self.cycle_batch < 1 or self.label_budget < self.cycle_batch:
            raise ConfigError("need 1 <= cycle_batch <= label_budget")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.alignment not in ALIGNMENT_MODES:
            raise ConfigError(f"unknown alignment mode {self.alignment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError("test_fraction must lie in (0, 1)")
        if not (("manifest" in self.dataset) ^ ("synth" in self.dataset)):
            raise ConfigError("dataset needs exactly one of 'manifest'/'synth'")

    @property
    def n_cycles(self) -> int:
        return math.ceil(self.label_budget / self.cycle_batch)

    @property
    def strategy_label(self) -> str:
        suffix = {"none": "", "grl": "+GRL", "grl_mix": "+GRL+MX"}
        return self.strategy + suffix[self.alignment]

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        allowed = {"dataset", "label_budget", "cycle_batch", "strategy",
                   "level", "alignment", "align_every_cycle", "beta", "alpha",
                   "sigma", "cell_size", "epochs_per_cycle", "lr", "momentum",
                   "trials", "base_seed", "test_fraction", "hidden",
                   "latent_dim", "radii"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("dataset", "label_budget", "cycle_batch"):
            if key not in d:
                raise ConfigError(f"missing required config key {key!r}")
        kwargs = dict(d)
        if "radii" in kwargs:
            kwargs["radii"] = tuple(float(r) for r in kwargs["radii"])
        if "synth" in kwargs["dataset"]:
            SynthSpec.from_dict(kwargs["dataset"]["synth"])  # validate early
        try:
            return ExperimentConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return ExperimentConfig.from_dict(d)


@dataclass(frozen=True)
class CycleRecord:
    strategy: str
    trial: int
    cycle: int
    selected_ids: tuple[str, ...]
    labeled_size: int
    mae: float
    mse: float
    game: dict[int, float]


@dataclass(frozen=True)
class ResultsTable:
    strategy: str
    mae_mean: float
    mae_std: float
    mse_mean: float
    mse_std: float


class Experiment:
    """Shared per-dataset state (scenes, split, features, ground truth)
    reused across trials."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        if "manifest" in config.dataset:
            scenes = load_dataset(config.dataset["manifest"])
        else:
            scenes = synth_dataset(SynthSpec.from_dict(config.dataset["synth"]))
        if config.label_budget > len(scenes):
            raise ConfigError("label_budget exceeds dataset size")
        self.scenes = {s.id: s for s in scenes}
        ids = sorted(self.scenes)
        split_rng = np.random.default_rng(config.base_seed)
        perm = split_rng.permutation(len(ids))
        n_test = int(round(config.test_fraction * len(ids)))
        self.test_ids = sorted(ids[i] for i in perm[:n_test])
        self.train_ids = sorted(ids[i] for i in perm[n_test:])
        if config.label_budget > len(self.train_ids):
            raise ConfigError("label_budget exceeds train split size")
        self.feat_params = md.FeatureParams(cell_size=config.cell_size,
                                            radii=config.radii)
        self.features = {i: md.featurize(self.scenes[i], self.feat_params)
                         for i in ids}
        self.gt_maps = {i: rasterize(self.scenes[i], config.cell_size,
                                     config.sigma) for i in ids}

    def _predict(self, state, ids):
        return {i: md.forward(state, self.features[i])[1] for i in ids}

    def run_trial(self, trial_index: int):
        """One full active-learning trial; returns (records, final_state)."""
        cfg = self.config
        trial_seed = cfg.base_seed + trial_index
        ss = np.random.SeedSequence(trial_seed)
        init_seed, clf_seed, align_seed, *cycle_seeds = ss.spawn(3 + cfg.n_cycles)
        state = md.init_state(self.feat_params, hidden=cfg.hidden,
                              latent_dim=cfg.latent_dim,
                              momentum=cfg.momentum,
                              rng=np.random.default_rng(init_seed))
        clf = al.init_classifier(cfg.latent_dim, momentum=cfg.momentum,
                                 rng=np.random.default_rng(clf_seed))
        align_rng = np.random.default_rng(align_seed)
        pool = Pool.fresh(self.train_ids)
        records = []
        test_gt = [self.gt_maps[i] for i in self.test_ids]
        for t in range(1, cfg.n_cycles + 1):
            target = min(cfg.label_budget, cfg.cycle_batch * t)
            n_t = target - len(pool.labeled)
            seed = int(np.random.default_rng(cycle_seeds[t - 1]).integers(2**63))
            if t == 1:
                # the first batch is always a uniform draw: no model yet
                req = SelectionRequest("RS", n_t, cfg.level, seed)
                preds = {}
            else:
                req = SelectionRequest(cfg.strategy, n_t, cfg.level, seed)
                preds = self._predict(state, sorted(pool.unlabeled))
            chosen = select(pool, preds, self.gt_maps, req)
            pool = annotate(pool, chosen)
            labeled_batch = [(self.features[i], self.gt_maps[i])
                             for i in sorted(pool.labeled)]
            for _ in range(cfg.epochs_per_cycle):
                state = md.train_step(state, labeled_batch, cfg.lr)
            final = t == cfg.n_cycles
            if cfg.alignment != "none" and (final or cfg.align_every_cycle):
                unlabeled_batch = [self.features[i]
                                   for i in sorted(pool.unlabeled)]
                for _ in range(cfg.epochs_per_cycle):
                    state, clf = al.aligned_train_step(
                        state, clf, labeled_batch, unlabeled_batch,
                        beta=cfg.beta, lr=cfg.lr, rng=align_rng,
                        alpha=cfg.alpha,
                        use_mixup=(cfg.alignment == "grl_mix"))
            test_pred = [md.forward(state, self.features[i])[1]
                         for i in self.test_ids]
            report = evaluate(test_pred, test_gt, levels=GAME_LEVELS)
            records.append(CycleRecord(
                strategy=cfg.strategy_label, trial=trial_index, cycle=t,
                selected_ids=tuple(chosen), labeled_size=len(pool.labeled),
                mae=report.mae, mse=report.mse, game=report.game))
        if len(pool.labeled) != cfg.label_budget:
            raise HarnessError("labeled pool does not match the budget")
        return records, state


def run_trial(config: ExperimentConfig, trial_index: int):
    records, _ = Experiment(config).run_trial(trial_index)
    return records


def summarize(records, strategy: str, trials: int) -> ResultsTable:
    """Mean/std of final-cycle MAE/MSE over trials for one strategy label."""
    finals = {}
    for r in records:
        if r.strategy == strategy:
            cur = finals.get(r.trial)
            if cur is None or r.cycle > cur.cycle:
                finals[r.trial] = r
    if len(finals) != trials:
        raise HarnessError(f"expected {trials} trials for {strategy}, "
                           f"found {len(finals)}")
    maes = np.array([r.mae for r in finals.values()])
    mses = np.array([r.mse for r in finals.values()])
    return ResultsTable(strategy=strategy, mae_mean=float(maes.mean()),
                        mae_std=float(maes.std()), mse_mean=float(mses.mean()),
                        mse_std=float(mses.std()))


def summarize_all(records):
    """One ResultsTable per strategy label present in the records."""
    tables = []
    for strat in sorted({r.strategy for r in records}):
        trials = len({r.trial for r in records if r.strategy == strat})
        tables.append(summarize(records, strat, trials))
    return tables


def run_experiment(config: ExperimentConfig):
    """All trials for one config; returns (records, ResultsTable)."""
    exp = Experiment(config)
    records = []
    for trial in range(config.trials):
        trial_records, _ = exp.run_trial(trial)
        records.extend(trial_records)
    table = summarize(records, config.strategy_label, config.trials)
    return records, table


def results_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for r in records:
        writer.writerow([r.strategy, r.trial, r.cycle, r.labeled_size,
                         repr(r.mae), repr(r.mse),
                         *[repr(r.game[L]) for L in GAME_LEVELS],
                         ";".join(r.selected_ids)])
    return buf.getvalue()


def summary_csv(tables) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for t in tables:
        writer.writerow([t.strategy, repr(t.mae_mean), repr(t.mae_std),
                         repr(t.mse_mean), repr(t.mse_std)])
    return buf.getvalue()


def parse_results_csv(text: str):
    """Inverse of results_csv: rows back into CycleRecord values."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != RESULTS_HEADER:
        raise HarnessError(f"unexpected results header {header}")
    records = []
    for row in reader:
        strategy, trial, cycle, labeled, mae_, mse_, g0, g1, g2, g3, ids = row
        records.append(CycleRecord(
            strategy=strategy, trial=int(trial), cycle=int(cycle),
            selected_ids=tuple(ids.split(";")) if ids else (),
            labeled_size=int(labeled), mae=float(mae_), mse=float(mse_),
            game={0: float(g0), 1: float(g1), 2: float(g2), 3: float(g3)}))
    return records


def parse_summary_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != SUMMARY_HEADER:
        raise HarnessError(f"unexpected summary header {header}")
    return [ResultsTable(strategy=strategy, mae_mean=float(mae_mean),
                         mae_std=float(mae_std), mse_mean=float(mse_mean),
                         mse_std=float(mse_std))
            for strategy, mae_mean, mae_std, mse_mean, mse_std in reader]


def write_outputs(out_dir, records, tables) -> tuple[Path, Path]:
    """Write results.csv and summary.csv atomically (no partial files)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_text = results_csv(records)
    summary_text = summary_csv(tables)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"
    for path, text in ((results_path, results_text),
                       (summary_path, summary_text)):
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text)
        tmp.replace(path)
    return results_path, summary_path
