"""Active-learning pipeline for density-based crowd counting at desk scale."""

from .data import (HeadPoint, Pool, Scene, SynthSpec, annotate, load_dataset,
                   save_dataset, synth_dataset)
from .density import DensityMap, integrate, rasterize
from .metrics import EvalReport, evaluate, game, mae, mse
from .partition import PartitionSet, even_breaks, jenks_breaks
from .selection import SelectionRequest, gdsim, select
from .harness import CycleRecord, ExperimentConfig, ResultsTable, \
    run_experiment, run_trial

__all__ = [
    "HeadPoint", "Scene", "Pool", "SynthSpec", "annotate", "load_dataset",
    "save_dataset", "synth_dataset", "DensityMap", "rasterize", "integrate",
    "EvalReport", "mae", "mse", "game", "evaluate", "PartitionSet",
    "jenks_breaks", "even_breaks", "SelectionRequest", "gdsim", "select",
    "ExperimentConfig", "CycleRecord", "ResultsTable", "run_trial",
    "run_experiment",
]

__version__ = "0.1.0"
