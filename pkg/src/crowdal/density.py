"""Ground-truth density maps from head points; region integration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Scene


class DensityError(Exception):
    pass


@dataclass(frozen=True)
class DensityMap:
    """Row-major non-negative grid; the integral over cells is a crowd count."""
    values: np.ndarray  # shape (height_cells, width_cells)
    cell_size: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DensityError("values must be a 2-D grid")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DensityError("density values must be finite and non-negative")
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @property
    def height_cells(self) -> int:
        return self.values.shape[0]

    @property
    def width_cells(self) -> int:
        return self.values.shape[1]

    def total(self) -> float:
        return float(self.values.sum())

    def to_csv(self, path):
        np.savetxt(path, self.values, delimiter=",")


def grid_shape(width: int, height: int, cell_size: float) -> tuple[int, int]:
    """(height_cells, width_cells) padded so the grid covers the full scene."""
    return (int(np.ceil(height / cell_size)), int(np.ceil(width / cell_size)))


def rasterize(scene: Scene, cell_size: float, sigma: float) -> DensityMap:
    """Deposit one unit-mass Gaussian (std ``sigma`` px) per head point.

    Each kernel is truncated at 3 sigma and renormalized so its own mass is
    exactly 1; the map integral therefore equals the scene count.
    """
    if cell_size <= 0:
        raise DensityError("cell_size must be positive")
    if sigma <= 0:
        raise DensityError("sigma must be positive")
    hc, wc = grid_shape(scene.width, scene.height, cell_size)
    grid = np.zeros((hc, wc))
    xs = (np.arange(wc) + 0.5) * cell_size  # cell centers
    ys = (np.arange(hc) + 0.5) * cell_size
    radius = 3.0 * sigma
    for p in scene.points:
        c0 = max(0, int((p.x - radius) // cell_size))
        c1 = min(wc, int((p.x + radius) // cell_size) + 1)
        r0 = max(0, int((p.y - radius) // cell_size))
        r1 = min(hc, int((p.y + radius) // cell_size) + 1)
        wx = np.exp(-((xs[c0:c1] - p.x) ** 2) / (2 * sigma * sigma))
        wy = np.exp(-((ys[r0:r1] - p.y) ** 2) / (2 * sigma * sigma))
        patch = np.outer(wy, wx)
        d2 = ((ys[r0:r1, None] - p.y) ** 2 + (xs[None, c0:c1] - p.x) ** 2)
        patch = np.where(d2 <= radius * radius, patch, 0.0)
        mass = patch.sum()
        if mass <= 0:
            # degenerate truncation (tiny sigma vs cell size): nearest cell
            grid[min(int(p.y // cell_size), hc - 1),
                 min(int(p.x // cell_size), wc - 1)] += 1.0
        else:
            grid[r0:r1, c0:c1] += patch / mass
    return DensityMap(values=grid, cell_size=float(cell_size))


def integrate(dmap: DensityMap, region: tuple[int, int, int, int]) -> float:
    """Sum cell values over ``(row_start, row_stop, col_start, col_stop)``."""
    r0, r1, c0, c1 = region
    if not (0 <= r0 <= r1 <= dmap.height_cells and
            0 <= c0 <= c1 <= dmap.width_cells):
        raise DensityError(f"region {region} out of bounds for "
                           f"{dmap.height_cells}x{dmap.width_cells} grid")
    return float(dmap.values[r0:r1, c0:c1].sum())
