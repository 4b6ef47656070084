import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_map
from crowdal.metrics import MetricsError, evaluate, game, mae, mse


class TestMae:
    def test_identical(self):
        assert mae([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_example(self):
        assert mae([10, 20], [12, 16]) == 3.0

    def test_single_scene(self):
        assert mae([7], [10]) == 3.0

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            mae([1], [1, 2])

    def test_empty(self):
        with pytest.raises(MetricsError):
            mae([], [])


class TestMse:
    def test_identical(self):
        assert mse([5, 5], [5, 5]) == 0.0

    def test_hand_example(self):
        assert mse([10, 20], [12, 16]) == pytest.approx(np.sqrt(10))

    def test_single_scene_is_abs_error(self):
        assert mse([7], [10]) == 3.0


class TestGame:
    def test_identical_maps(self):
        m = make_map(np.arange(16.0).reshape(4, 4))
        for L in range(4):
            assert game(m, m, L) == 0.0

    def test_level_zero_is_count_difference(self):
        p = make_map(np.full((4, 4), 2.0))
        t = make_map(np.full((4, 4), 1.5))
        assert game(p, t, 0) == pytest.approx(8.0)

    def test_hand_derived_level_one(self):
        # pred: mass 5 spread over the left half, true: 5 over the right.
        # The four 2x2 regions each hold 2.5 on one side only -> sum 10.
        pred = np.zeros((4, 4))
        pred[:, :2] = 5.0 / 8.0
        true = np.zeros((4, 4))
        true[:, 2:] = 5.0 / 8.0
        assert game(make_map(pred), make_map(true), 0) == pytest.approx(0.0)
        assert game(make_map(pred), make_map(true), 1) == pytest.approx(10.0)

    def test_dimension_mismatch(self):
        with pytest.raises(MetricsError):
            game(make_map(np.zeros((2, 2))), make_map(np.zeros((3, 3))), 0)

    @given(arrays(float, (6, 7), elements=st.floats(0, 10)),
           arrays(float, (6, 7), elements=st.floats(0, 10)))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_level(self, a, b):
        p, t = make_map(a), make_map(b)
        values = [game(p, t, L) for L in range(4)]
        for lo, hi in zip(values, values[1:]):
            assert hi >= lo - 1e-9

    @given(arrays(float, (5, 5), elements=st.floats(0, 10)),
           arrays(float, (5, 5), elements=st.floats(0, 10)))
    @settings(max_examples=30, deadline=None)
    def test_symmetric(self, a, b):
        p, t = make_map(a), make_map(b)
        for L in range(3):
            assert game(p, t, L) == game(t, p, L)

    def test_level_zero_exactness(self, rng):
        p = make_map(rng.uniform(0, 3, (8, 8)))
        t = make_map(rng.uniform(0, 3, (8, 8)))
        assert game(p, t, 0) == pytest.approx(
            abs(p.total() - t.total()), abs=1e-12)


class TestEvaluate:
    def test_game0_averages_to_mae(self, rng):
        preds = [make_map(rng.uniform(0, 2, (4, 4))) for _ in range(5)]
        trues = [make_map(rng.uniform(0, 2, (4, 4))) for _ in range(5)]
        report = evaluate(preds, trues)
        assert report.game[0] == pytest.approx(report.mae)
        assert report.n_scenes == 5

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            evaluate([], [])
