"""Scenes, labeled/unlabeled pools, dataset ingestion and synthetic generation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(Exception):
    """Raised for malformed manifests, point files, or pool misuse."""


@dataclass(frozen=True)
class HeadPoint:
    x: float
    y: float


@dataclass(frozen=True)
class Scene:
    id: str
    width: int
    height: int
    points: tuple[HeadPoint, ...]

    def __post_init__(self):
        for p in self.points:
            if not (0 <= p.x < self.width and 0 <= p.y < self.height):
                raise DatasetError(
                    f"scene {self.id}: point ({p.x}, {p.y}) out of bounds "
                    f"for {self.width}x{self.height}"
                )

    @property
    def count(self) -> int:
        return len(self.points)

    def point_array(self) -> np.ndarray:
        """Points as an (n, 2) float array of (x, y)."""
        if not self.points:
            return np.zeros((0, 2))
        return np.array([(p.x, p.y) for p in self.points], dtype=float)


@dataclass(frozen=True)
class Pool:
    labeled: frozenset[str]
    unlabeled: frozenset[str]

    def __post_init__(self):
        overlap = self.labeled & self.unlabeled
        if overlap:
            raise DatasetError(f"pool sets overlap: {sorted(overlap)[:5]}")

    @staticmethod
    def fresh(ids) -> "Pool":
        return Pool(labeled=frozenset(), unlabeled=frozenset(ids))


def annotate(pool: Pool, ids) -> Pool:
    """Move ids from the unlabeled to the labeled set, returning a new pool."""
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate ids in annotation request")
    for i in ids:
        if i in pool.labeled:
            raise DatasetError(f"scene {i} is already labeled")
        if i not in pool.unlabeled:
            raise DatasetError(f"scene {i} is not in the unlabeled pool")
    return Pool(labeled=pool.labeled | set(ids),
                unlabeled=pool.unlabeled - set(ids))


def load_dataset(manifest_path) -> list[Scene]:
    """Load scenes from a manifest CSV (scene_id,width,height,points_file).

    Point files hold one whitespace-separated ``x y`` pair per line and are
    resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    scenes = []
    seen = set()
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"scene_id", "width", "height", "points_file"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DatasetError(
                f"manifest {manifest_path} must have columns {sorted(required)}")
        for row in reader:
            sid = row["scene_id"].strip()
            if sid in seen:
                raise DatasetError(f"duplicate scene id {sid!r} in manifest")
            seen.add(sid)
            try:
                width = int(row["width"])
                height = int(row["height"])
            except ValueError as exc:
                raise DatasetError(f"scene {sid}: bad width/height: {exc}") from exc
            if width <= 0 or height <= 0:
                raise DatasetError(f"scene {sid}: non-positive dimensions")
            pfile = base / row["points_file"]
            if not pfile.is_file():
                raise DatasetError(f"scene {sid}: points file not found: {pfile}")
            points = []
            with open(pfile) as pf:
                for lineno, line in enumerate(pf, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    parts = line.split()
                    if len(parts) != 2:
                        raise DatasetError(
                            f"scene {sid}: malformed line {lineno} in {pfile.name}: "
                            f"{line!r}")
                    try:
                        x, y = float(parts[0]), float(parts[1])
                    except ValueError as exc:
                        raise DatasetError(
                            f"scene {sid}: malformed line {lineno} in {pfile.name}: "
                            f"{exc}") from exc
                    if not (0 <= x < width and 0 <= y < height):
                        raise DatasetError(
                            f"scene {sid}: point ({x}, {y}) at line {lineno} "
                            f"out of bounds for {width}x{height}")
                    points.append(HeadPoint(x, y))
            scenes.append(Scene(sid, width, height, tuple(points)))
    return scenes


def save_dataset(scenes, out_dir) -> Path:
    """Write scenes as a manifest plus one points file per scene.

    Returns the manifest path. Output is byte-stable for identical scenes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "width", "height", "points_file"])
        for sc in scenes:
            pname = f"{sc.id}.txt"
            writer.writerow([sc.id, sc.width, sc.height, pname])
            with open(out_dir / pname, "w") as pf:
                for p in sc.points:
                    pf.write(f"{p.x!r} {p.y!r}\n")
    return manifest


@dataclass(frozen=True)
class SynthSpec:
    n_scenes: int
    width: int
    height: int
    # (weight, min_count, max_count) bands; weights must sum to 1
    count_distribution: tuple[tuple[float, int, int], ...]
    clustering: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_scenes <= 0 or self.width <= 0 or self.height <= 0:
            raise DatasetError("n_scenes, width, height must be positive")
        if not self.count_distribution:
            raise DatasetError("count_distribution must be nonempty")
        total = sum(w for w, _, _ in self.count_distribution)
        if abs(total - 1.0) > 1e-9:
            raise DatasetError(f"band weights sum to {total}, expected 1")
        for w, lo, hi in self.count_distribution:
            if w < 0 or lo < 0 or lo > hi:
                raise DatasetError(f"bad band ({w}, {lo}, {hi})")
        if not (0.0 <= self.clustering <= 1.0):
            raise DatasetError("clustering must lie in [0, 1]")

    @staticmethod
    def from_dict(d: dict) -> "SynthSpec":
        allowed = {"n_scenes", "width", "height", "count_distribution",
                   "clustering", "seed"}
        unknown = set(d) - allowed
        if unknown:
            raise DatasetError(f"unknown synth keys: {sorted(unknown)}")
        for key in ("n_scenes", "width", "height", "count_distribution"):
            if key not in d:
                raise DatasetError(f"missing synth key {key!r}")
        bands = tuple(tuple(b) for b in d["count_distribution"])
        return SynthSpec(n_scenes=int(d["n_scenes"]), width=int(d["width"]),
                         height=int(d["height"]), count_distribution=bands,
                         clustering=float(d.get("clustering", 0.5)),
                         seed=int(d.get("seed", 0)))


def _clip_inside(v, hi):
    # keep coordinates strictly below the upper bound
    return float(min(max(v, 0.0), np.nextafter(hi, 0.0)))


def synth_dataset(spec: SynthSpec) -> list[Scene]:
    """Generate point-annotated scenes; deterministic in spec (incl. seed).

    Scene counts are drawn from the band mixture; each point is placed in a
    Gaussian cluster with probability ``clustering`` and uniformly otherwise.
    """
    rng = np.random.default_rng(spec.seed)
    weights = np.array([w for w, _, _ in spec.count_distribution])
    scenes = []
    ndigits = len(str(spec.n_scenes - 1))
    for i in range(spec.n_scenes):
        band = rng.choice(len(weights), p=weights)
        _, lo, hi = spec.count_distribution[band]
        count = int(rng.integers(lo, hi + 1))
        n_clusters = int(rng.integers(1, 5))
        centers = rng.uniform([0, 0], [spec.width, spec.height],
                              size=(n_clusters, 2))
        cluster_std = min(spec.width, spec.height) / 8.0
        points = []
        for _ in range(count):
            if rng.random() < spec.clustering:
                c = centers[rng.integers(n_clusters)]
                x = _clip_inside(c[0] + rng.normal(0, cluster_std), spec.width)
                y = _clip_inside(c[1] + rng.normal(0, cluster_std), spec.height)
            else:
                x = float(rng.uniform(0, spec.width))
                y = float(rng.uniform(0, spec.height))
            points.append(HeadPoint(x, y))
        scenes.append(Scene(f"synth{i:0{ndigits}d}", spec.width, spec.height,
                            tuple(points)))
    return scenes
