import numpy as np
import pytest

from crowdal.data import HeadPoint, Scene, SynthSpec, synth_dataset
from crowdal.density import DensityError, DensityMap, integrate, rasterize


def scene_with(points, width=128, height=128):
    return Scene("t", width, height, tuple(HeadPoint(x, y) for x, y in points))


class TestRasterize:
    def test_empty_scene_zero_map(self):
        m = rasterize(scene_with([]), 16, 4)
        assert m.total() == 0.0
        assert np.all(m.values == 0)

    def test_single_point_unit_mass(self):
        m = rasterize(scene_with([(64, 64)]), 16, 4)
        assert abs(m.total() - 1.0) <= 1e-6

    def test_many_points_additive_mass(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 128, size=(37, 2))
        m = rasterize(scene_with(pts.tolist()), 16, 4)
        assert abs(m.total() - 37.0) <= 1e-4

    def test_grid_covers_scene(self):
        m = rasterize(scene_with([], width=100, height=50), 16, 4)
        assert (m.height_cells, m.width_cells) == (4, 7)

    @pytest.mark.parametrize("cell_size,sigma", [(0, 4), (16, 0), (16, -1)])
    def test_bad_parameters(self, cell_size, sigma):
        with pytest.raises(DensityError):
            rasterize(scene_with([]), cell_size, sigma)

    def test_translation_covariance_one_cell(self):
        pts = [(48.3, 52.1), (60.0, 70.5), (55.5, 44.0)]
        m0 = rasterize(scene_with(pts), 16, 4)
        m1 = rasterize(scene_with([(x + 16, y) for x, y in pts]), 16, 4)
        assert np.allclose(m1.values[:, 1:], m0.values[:, :-1], atol=1e-12)

    def test_non_negative(self):
        spec = SynthSpec(n_scenes=5, width=96, height=96,
                         count_distribution=((1.0, 10, 50),), seed=4)
        for s in synth_dataset(spec):
            assert np.all(rasterize(s, 16, 4).values >= 0)


class TestIntegrate:
    def setup_method(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 128, size=(37, 2))
        self.map = rasterize(scene_with(pts.tolist()), 16, 4)

    def test_full_grid_is_total(self):
        full = (0, self.map.height_cells, 0, self.map.width_cells)
        assert abs(integrate(self.map, full) - 37.0) <= 1e-4

    def test_disjoint_halves_sum_to_total(self):
        h, w = self.map.height_cells, self.map.width_cells
        left = integrate(self.map, (0, h, 0, w // 2))
        right = integrate(self.map, (0, h, w // 2, w))
        assert abs(left + right - self.map.total()) <= 1e-9

    def test_empty_region(self):
        assert integrate(self.map, (2, 2, 0, 4)) == 0.0

    def test_out_of_bounds_region(self):
        with pytest.raises(DensityError, match="out of bounds"):
            integrate(self.map, (0, self.map.height_cells + 1, 0, 1))

    def test_partition_mass_conservation(self):
        # arbitrary partition into disjoint rectangles covering the grid
        h, w = self.map.height_cells, self.map.width_cells
        parts = [(0, 3, 0, 5), (0, 3, 5, w), (3, h, 0, 2), (3, h, 2, w)]
        total = sum(integrate(self.map, r) for r in parts)
        assert abs(total - self.map.total()) <= 1e-9


def test_density_map_rejects_negative_values():
    with pytest.raises(DensityError):
        DensityMap(values=np.array([[-1.0]]), cell_size=16)


def test_csv_export(tmp_path):
    m = rasterize(scene_with([(32, 32)]), 16, 4)
    path = tmp_path / "map.csv"
    m.to_csv(path)
    back = np.loadtxt(path, delimiter=",")
    assert np.allclose(back, m.values)
