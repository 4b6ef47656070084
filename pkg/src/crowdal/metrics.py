"""Counting-error measures: MAE, MSE (root convention), and grid-region GAME."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityMap


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class EvalReport:
    mae: float
    mse: float
    game: dict[int, float]
    n_scenes: int


def _check_counts(pred, true):
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if pred.shape != true.shape or pred.ndim != 1:
        raise MetricsError(f"count lists must be equal-length 1-D, "
                           f"got {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise MetricsError("empty count lists")
    return pred, true


def mae(pred_counts, true_counts) -> float:
    pred, true = _check_counts(pred_counts, true_counts)
    return float(np.mean(np.abs(pred - true)))


def mse(pred_counts, true_counts) -> float:
    """Root-mean-squared count error (the literature's 'MSE' convention)."""
    pred, true = _check_counts(pred_counts, true_counts)
    return float(np.sqrt(np.mean((pred - true) ** 2)))


def region_bounds(n_cells: int, level: int) -> np.ndarray:
    """Region boundaries along one axis for a 2^level split.

    Proportional integer boundaries, so every level-L boundary is also a
    level-(L+1) boundary (regions nest, which makes GAME monotone in level).
    """
    r = 2 ** level
    return (np.arange(r + 1) * n_cells) // r


def region_sums(dmap: DensityMap, level: int) -> np.ndarray:
    """Per-region integrals for the 2^level x 2^level grid, flattened."""
    rb = region_bounds(dmap.height_cells, level)
    cb = region_bounds(dmap.width_cells, level)
    csum = np.zeros((dmap.height_cells + 1, dmap.width_cells + 1))
    np.cumsum(np.cumsum(dmap.values, axis=0), axis=1, out=csum[1:, 1:])
    block = (csum[rb[1:, None], cb[None, 1:]] - csum[rb[:-1, None], cb[None, 1:]]
             - csum[rb[1:, None], cb[None, :-1]] + csum[rb[:-1, None], cb[None, :-1]])
    return block.ravel()


def game(pred_map: DensityMap, true_map: DensityMap, level: int) -> float:
    """Sum over the 4^level grid regions of absolute count differences."""
    if level < 0:
        raise MetricsError("level must be >= 0")
    if pred_map.values.shape != true_map.values.shape:
        raise MetricsError(f"map shapes differ: {pred_map.values.shape} "
                           f"vs {true_map.values.shape}")
    return float(np.abs(region_sums(pred_map, level)
                        - region_sums(true_map, level)).sum())


def evaluate(pred_maps, true_maps, levels=(0, 1, 2, 3)) -> EvalReport:
    """Per-scene counts -> MAE/MSE; per-level mean GAME over the scene set."""
    if len(pred_maps) != len(true_maps) or not pred_maps:
        raise MetricsError("need equal-length nonempty map lists")
    preds = [m.total() for m in pred_maps]
    trues = [m.total() for m in true_maps]
    games = {L: float(np.mean([game(p, t, L)
                               for p, t in zip(pred_maps, true_maps)]))
             for L in levels}
    return EvalReport(mae=mae(preds, trues), mse=mse(preds, trues),
                      game=games, n_scenes=len(pred_maps))
