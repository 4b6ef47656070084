"""Acceptance suite: one test per criterion, each printing a pass line."""
import itertools
import random
import time

import numpy as np
import pytest

from conftest import make_map
from crowdal import alignment as al
from crowdal import model as md
from crowdal.data import SynthSpec, synth_dataset
from crowdal.density import rasterize
from crowdal.harness import ExperimentConfig, run_experiment
from crowdal.metrics import game
from crowdal.model import LatentMap
from crowdal.partition import jenks_breaks
from gradcheck import max_relative_error

EXTRACTOR = ("w1", "b1", "w2", "b2")

BENCHMARK = dict(
    dataset={"synth": {"n_scenes": 500, "width": 128, "height": 128,
                       "count_distribution": [[0.8, 5, 30], [0.2, 150, 300]],
                       "clustering": 0.9, "seed": 42}},
    label_budget=30, cycle_batch=10, trials=10, base_seed=0,
    epochs_per_cycle=100, lr=1e-4)


def ok(criterion, message):
    print(f"ACCEPTANCE PASS criterion {criterion}: {message}")


@pytest.fixture(scope="module")
def benchmark_tables():
    """Final mean/std MAE for every strategy variant on the frozen benchmark
    (300 train / 200 test scenes, skewed two-band mixture, M=30, m=10,
    10 trials)."""
    tables = {}
    for strategy, alignment in (("RS", "none"), ("PSSW", "none"),
                                ("EvenPartition", "none"),
                                ("GlobalDiff", "none"),
                                ("PSSW", "grl_mix")):
        cfg = ExperimentConfig.from_dict({**BENCHMARK, "strategy": strategy,
                                          "alignment": alignment})
        _, table = run_experiment(cfg)
        tables[cfg.strategy_label] = table
    return tables


def test_criterion_1_jenks_oracle_equivalence():
    def ssd(seg):
        v = np.asarray(seg, dtype=float)
        return float(((v - v.mean()) ** 2).sum())

    def brute_force(values, k):
        v = sorted(values)
        k = min(k, len(set(v)))
        best = float("inf")
        for cuts in itertools.combinations(range(1, len(v)), k - 1):
            bounds = [0, *cuts, len(v)]
            best = min(best, sum(ssd(v[a:b])
                                 for a, b in zip(bounds, bounds[1:])))
        return best

    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(200):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, 5))
        values = rng.integers(0, 40, size=n).astype(float).tolist()
        parts = jenks_breaks(values, k)
        groups = {}
        for v, lbl in zip(values, parts.labels):
            groups.setdefault(lbl, []).append(v)
        dp_obj = sum(ssd(g) for g in groups.values())
        assert dp_obj == pytest.approx(brute_force(values, k), abs=1e-9)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    ok(1, f"200 instances match exhaustive enumeration in {elapsed:.2f}s")


def test_criterion_2_game_properties():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    for _ in range(100):
        h, w = rng.integers(3, 12, size=2)
        p = make_map(rng.uniform(0, 5, size=(h, w)))
        t = make_map(rng.uniform(0, 5, size=(h, w)))
        values = [game(p, t, L) for L in range(4)]
        for L in range(3):
            assert values[L + 1] >= values[L] - 1e-9
        assert abs(values[0] - abs(p.total() - t.total())) <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    ok(2, f"level monotonicity and level-0 exactness on 100 pairs "
          f"({elapsed:.2f}s)")


def test_criterion_3_density_mass_conservation():
    spec = SynthSpec(n_scenes=100, width=128, height=96,
                     count_distribution=((0.5, 0, 40), (0.5, 100, 250)),
                     clustering=0.8, seed=303)
    worst = 0.0
    for scene in synth_dataset(spec):
        dmap = rasterize(scene, 16.0, 4.0)
        worst = max(worst, abs(dmap.total() - scene.count))
        assert abs(dmap.total() - scene.count) <= 1e-4
    ok(3, f"100 scenes, max |integral - count| = {worst:.2e}")


def test_criterion_4_gradient_checks():
    rng = np.random.default_rng(404)
    worst_reg, worst_aligned = 0.0, 0.0
    for trial in range(20):
        feat = md.FeatureParams(cell_size=16.0, radii=(16.0, 32.0))
        hidden = int(rng.integers(3, 7))
        latent_dim = int(rng.integers(2, 7))  # D <= 6
        spec = SynthSpec(n_scenes=4, width=64, height=64,  # 4x4 <= 8x8 grid
                         count_distribution=((1.0, 2, 9),), clustering=0.5,
                         seed=1000 + trial)
        scenes = synth_dataset(spec)
        labeled = [(md.featurize(s, feat), rasterize(s, 16.0, 4.0))
                   for s in scenes[:2]]
        unlabeled = [md.featurize(s, feat) for s in scenes[2:]]
        state = md.init_state(feat, hidden=hidden, latent_dim=latent_dim,
                              rng=rng)
        clf = al.init_classifier(latent_dim, rng=rng)
        beta = 3.0
        pairs = al.draw_pairs(2, 2, 2, 0.5, rng)

        # regression objective
        _, grads = md.reg_gradients(state, labeled)

        def reg_objective(params):
            total = 0.0
            for feats, gt in labeled:
                cache = md._forward_flat(params, feats.flat())
                total += float(((cache["pred"] - gt.values.ravel()) ** 2
                                ).sum()) / (2 * len(labeled))
            return total

        err = max_relative_error(state.params, grads, reg_objective)
        worst_reg = max(worst_reg, err)
        assert err <= 1e-4

        # combined objective with the reversed dc term for the extractor
        _, _, reg_grads, clf_grads, dc_ext = al.aligned_gradients(
            state, clf, labeled, unlabeled, pairs, beta)

        def combined(reg_params, clf_params, ext_sign):
            caches, total = {}, 0.0
            for i, (feats, gt) in enumerate(labeled):
                c = md._forward_flat(reg_params, feats.flat())
                caches[(0, i)] = c
                total += float(((c["pred"] - gt.values.ravel()) ** 2
                                ).sum()) / (2 * len(labeled))
            for j, feats in enumerate(unlabeled):
                caches[(1, j)] = md._forward_flat(reg_params, feats.flat())
            terms = al._dc_batch_terms(caches, pairs, True)
            ldc = sum(al._bce_with_logits(
                float(np.mean(z @ clf_params["w"]) + clf_params["b"]), y)
                for z, y, _ in terms) / len(terms)
            return total + ext_sign * beta * ldc

        for k in state.params:
            sign = -1.0 if k in EXTRACTOR else 1.0
            err = max_relative_error(
                {k: state.params[k]}, {k: reg_grads[k]},
                lambda p, s=sign: combined({**state.params, **p},
                                           clf.params, s))
            worst_aligned = max(worst_aligned, err)
            assert err <= 1e-4, k
        err = max_relative_error(clf.params, clf_grads,
                                 lambda p: combined(state.params, p, 1.0))
        worst_aligned = max(worst_aligned, err)
        assert err <= 1e-4

        # gradient-reversal sign contract, exact
        _, reg_only = md.reg_gradients(state, labeled)
        for k in EXTRACTOR:
            assert np.array_equal(reg_grads[k],
                                  reg_only[k] - beta * dc_ext[k])
    ok(4, f"20 instances; max rel err reg {worst_reg:.2e}, "
          f"combined {worst_aligned:.2e}; reversal sign exact")


def test_criterion_5_mixup_lambda_laws():
    rng = np.random.default_rng(505)
    draws = [al.sample_lambda(0.5, rng) for _ in range(100_000)]
    assert all(0.5 <= lam <= 1.0 for lam in draws)
    z1 = LatentMap(values=rng.normal(size=(3, 3, 4)))
    z2 = LatentMap(values=rng.normal(size=(3, 3, 4)))
    for y1, y2 in ((0.0, 1.0), (1.0, 0.0), (0.3, 0.9)):
        for lam in (0.5, 0.75, 1.0):
            mixed = al.mixup(z1, y1, z2, y2, lam)
            assert 0.0 <= mixed.y_mixed <= 1.0
    endpoint = al.mixup(z1, 0.0, z2, 1.0, 1.0)
    assert np.array_equal(endpoint.z_mixed.values, z1.values)
    assert endpoint.y_mixed == 0.0
    ok(5, "100000 draws in [0.5, 1]; mixed labels in [0, 1]; "
          "endpoint exact")


def test_criterion_6_protocol_exactness():
    for budget in (20, 30, 40):
        cfg = ExperimentConfig.from_dict({
            "dataset": {"synth": {"n_scenes": 120, "width": 64, "height": 64,
                                  "count_distribution": [[0.7, 2, 15],
                                                         [0.3, 40, 80]],
                                  "clustering": 0.8, "seed": 6}},
            "label_budget": budget, "cycle_batch": 10, "strategy": "PSSW",
            "trials": 2, "epochs_per_cycle": 3, "lr": 1e-4, "base_seed": 2})
        records, _ = run_experiment(cfg)
        for r in records:
            assert r.labeled_size == 10 * r.cycle
        finals = [r for r in records if r.cycle == cfg.n_cycles]
        assert all(r.labeled_size == budget for r in finals)
        # identical seeds give identical results files byte-for-byte
        from crowdal.harness import results_csv
        records2, _ = run_experiment(cfg)
        assert results_csv(records) == results_csv(records2)
    ok(6, "labeled sizes 10t up to M for M in {20,30,40}; reruns "
          "byte-identical")


def test_criterion_7_selection_trend(benchmark_tables):
    rs = benchmark_tables["RS"].mae_mean
    pssw = benchmark_tables["PSSW"].mae_mean
    even = benchmark_tables["EvenPartition"].mae_mean
    glob = benchmark_tables["GlobalDiff"].mae_mean
    assert pssw < rs
    assert pssw <= even
    assert pssw <= glob
    ok(7, f"MAE ordering PSSW {pssw:.2f} < RS {rs:.2f}, <= EvenPartition "
          f"{even:.2f}, <= GlobalDiff {glob:.2f}")


def test_criterion_8_alignment_regression_safety(benchmark_tables):
    pssw = benchmark_tables["PSSW"]
    aligned = benchmark_tables["PSSW+GRL+MX"]
    pooled_std = np.sqrt((pssw.mae_std ** 2 + aligned.mae_std ** 2) / 2)
    assert aligned.mae_mean <= pssw.mae_mean + pooled_std
    ok(8, f"PSSW+GRL+MX MAE {aligned.mae_mean:.2f} vs PSSW "
          f"{pssw.mae_mean:.2f} (pooled std {pooled_std:.2f})")
