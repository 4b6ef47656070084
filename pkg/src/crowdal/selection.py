"""Grid-based dissimilarity scoring and per-cycle sample selection strategies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Pool
from .density import DensityMap
from .metrics import region_sums
from .partition import PartitionSet, even_breaks, jenks_breaks

STRATEGIES = ("RS", "PSSW", "EvenPartition", "GlobalDiff")


class SelectionError(Exception):
    pass


@dataclass(frozen=True)
class SelectionRequest:
    strategy: str
    m: int
    level: int = 3  # grid level bound for the dissimilarity sum
    rng_seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SelectionError(f"unknown strategy {self.strategy!r}; "
                                 f"expected one of {STRATEGIES}")
        if self.m < 1:
            raise SelectionError("m must be >= 1")
        if self.level < 0:
            raise SelectionError("level must be >= 0")


def level_signature(dmap: DensityMap, level: int) -> np.ndarray:
    """Concatenated region integrals for grid levels 0..level.

    The L1 distance between two signatures equals the level-summed grid
    dissimilarity of the two maps.
    """
    return np.concatenate([region_sums(dmap, L) for L in range(level + 1)])


def gdsim(unlabeled_map: DensityMap, labeled_maps, level: int) -> float:
    """Min over labeled maps of the summed per-region |count difference|
    across all grid levels 0..level."""
    if not labeled_maps:
        raise SelectionError("labeled map set is empty")
    shape = unlabeled_map.values.shape
    for lm in labeled_maps:
        if lm.values.shape != shape:
            raise SelectionError(f"map shapes differ: {shape} vs "
                                 f"{lm.values.shape}")
    sig_u = level_signature(unlabeled_map, level)
    return float(min(np.abs(sig_u - level_signature(lm, level)).sum()
                     for lm in labeled_maps))


def _weighted_pick(ids, scores, rng):
    """One weighted draw; linear score normalization, uniform when all zero."""
    scores = np.asarray(scores, dtype=float)
    total = scores.sum()
    if total > 0:
        p = scores / total
    else:
        p = np.full(len(ids), 1.0 / len(ids))
    return ids[rng.choice(len(ids), p=p)]


def select(pool: Pool, predictions: dict, gt_maps: dict,
           req: SelectionRequest) -> list[str]:
    """Pick up to ``req.m`` unlabeled scene ids to annotate this cycle.

    RS draws uniformly. Partition strategies split predicted counts into m
    classes (natural breaks or even intervals), score each unlabeled scene
    against the labeled scenes of the same class, and draw one id per class
    by weighted random selection. GlobalDiff scores with the global count
    difference only (level 0).
    """
    unl = sorted(pool.unlabeled)
    if req.m > len(unl):
        raise SelectionError(f"m={req.m} exceeds unlabeled pool size {len(unl)}")
    rng = np.random.default_rng(req.rng_seed)

    if req.strategy == "RS":
        picks = rng.choice(len(unl), size=req.m, replace=False)
        return [unl[i] for i in picks]

    missing = [i for i in unl if i not in predictions]
    if missing:
        raise SelectionError(f"missing predictions for {missing[:5]}")
    lab = sorted(pool.labeled)
    missing = [i for i in lab if i not in gt_maps]
    if missing:
        raise SelectionError(f"missing ground-truth maps for {missing[:5]}")

    pred_counts = [predictions[i].total() for i in unl]
    if req.strategy == "EvenPartition":
        parts: PartitionSet = even_breaks(pred_counts, req.m)
    else:  # PSSW, GlobalDiff use natural breaks
        parts = jenks_breaks(pred_counts, req.m)
    level = 0 if req.strategy == "GlobalDiff" else req.level

    # labeled scenes are binned by ground-truth count against the same breaks
    lab_by_class: dict[int, list[np.ndarray]] = {}
    for i in lab:
        sig = level_signature(gt_maps[i], level)
        lab_by_class.setdefault(parts.assign(gt_maps[i].total()), []).append(sig)

    sigs = {i: level_signature(predictions[i], level) for i in unl}

    def score_against(sid, labeled_sigs):
        return float(min(np.abs(sigs[sid] - ls).sum() for ls in labeled_sigs))

    selected = []
    for c in range(parts.n_classes):
        members = [unl[i] for i, lbl in enumerate(parts.labels) if lbl == c]
        if not members:
            continue
        labeled_sigs = lab_by_class.get(c)
        if labeled_sigs:
            scores = [score_against(i, labeled_sigs) for i in members]
        else:
            # unseen density regime: every member maximally (uniformly) likely
            scores = [1.0] * len(members)
        selected.append(_weighted_pick(members, scores, rng))

    # partition shortfall: fill remaining slots by highest dissimilarity
    # against the full labeled set, pool-wide
    if len(selected) < req.m:
        remaining = [i for i in unl if i not in selected]
        all_labeled = [s for group in lab_by_class.values() for s in group]
        if all_labeled:
            remaining.sort(key=lambda i: -score_against(i, all_labeled))
            selected.extend(remaining[:req.m - len(selected)])
        else:
            picks = rng.choice(len(remaining), size=req.m - len(selected),
                               replace=False)
            selected.extend(remaining[i] for i in picks)
    return selected
