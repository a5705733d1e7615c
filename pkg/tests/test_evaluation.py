import csv
import json

import numpy as np
import pytest

from cohprop.evaluation import (
    CSV_COLUMNS,
    EvaluationReport,
    correlate_with_external,
    kfold_eval_method_b,
    spatial_uniform_sample,
    sweep_method_a,
)
from cohprop.features import FeatureStore
from cohprop.graph import DirectedGraph, Direction
from cohprop.method_a import init_state
from cohprop.method_b import step_method_b
from cohprop.synthetic import PlantedConfig, generate_planted
from conftest import store_from


def two_cluster_store(n_dense=30, n_sparse=6):
    vecs = [[0.0 + 0.001 * i, 0.0] for i in range(n_dense)]
    vecs += [[5.0 + 0.001 * i, 5.0] for i in range(n_sparse)]
    return store_from(vecs), n_dense, n_sparse


class TestSpatialUniformSample:
    def test_single_cell_is_plain_uniform(self):
        store = store_from([[0.5, 0.5]] * 10)
        picked = spatial_uniform_sample(store, range(10), 4, grid_bins=3, seed=0)
        assert picked.size == 4
        assert set(picked.tolist()) <= set(range(10))

    def test_clusters_balanced_up_to_exhaustion(self):
        store, n_dense, n_sparse = two_cluster_store(990, 10)
        picked = spatial_uniform_sample(store, range(1000), 10, grid_bins=2, seed=1)
        sparse_hits = (picked >= 990).sum()
        assert sparse_hits == 5

    def test_sparse_cell_exhausts_then_dense_fills(self):
        store, n_dense, n_sparse = two_cluster_store(30, 3)
        picked = spatial_uniform_sample(store, range(33), 10, grid_bins=2, seed=2)
        assert (picked >= 30).sum() == 3  # all of the small cluster
        assert picked.size == 10

    def test_full_sample_returns_everything(self):
        store, *_ = two_cluster_store(8, 2)
        picked = spatial_uniform_sample(store, range(10), 10, grid_bins=4, seed=0)
        assert picked.tolist() == list(range(10))

    def test_oversample_rejected(self):
        store, *_ = two_cluster_store(4, 2)
        with pytest.raises(ValueError):
            spatial_uniform_sample(store, range(6), 7)

    def test_deterministic_under_seed(self):
        store, *_ = two_cluster_store(50, 20)
        a = spatial_uniform_sample(store, range(70), 15, grid_bins=3, seed=42)
        b = spatial_uniform_sample(store, range(70), 15, grid_bins=3, seed=42)
        assert a.tolist() == b.tolist()


def tiny_instance():
    # seeds 0-3 follow hub 4; candidates 5,6 follow hub 4 too
    edges = [(0, 4), (1, 4), (2, 4), (3, 4), (5, 4), (6, 4)]
    g = DirectedGraph.from_edges(edges, node_count=7)
    truth = store_from([[0.0], [0.05], [0.1], [0.15], [0.2], [0.07], [0.09]])
    return g, truth


class TestSweepMethodA:
    def test_empty_addition_row_flagged(self):
        g = DirectedGraph.from_edges([(0, 2), (1, 2)], node_count=3)
        truth = store_from([[0.0], [1.0], [0.5]])
        report = sweep_method_a(g, truth, [0, 1], Direction.UP, [0.01])
        rows = report.rows_where(epsilon=0.01, stat="mean")
        assert rows[0].error is None
        assert rows[0].size_delta_v == 0

    def test_addition_sizes_monotone_in_epsilon(self, rng):
        cfg = PlantedConfig(n_nodes=300, n_elites=8, beta=3.0, mean_out_degree=6.0, seed=4)
        g, truth, _ = generate_planted(cfg)
        pool = spatial_uniform_sample(truth, np.arange(300), 60, grid_bins=6, seed=0)
        grid = [0.05, 0.15, 0.3, 0.6, 1.2]
        report = sweep_method_a(g, truth, pool, Direction.UP, grid)
        sizes = [report.rows_where(epsilon=e, stat="mean")[0].size_delta_v for e in grid]
        assert sizes == sorted(sizes)

    def test_stats_cover_per_node_errors(self):
        g, truth = tiny_instance()
        report = sweep_method_a(g, truth, [0, 1, 2, 3], Direction.UP, [1.0])
        by_stat = {r.stat: r.error for r in report.rows_where(epsilon=1.0)}
        assert by_stat["min"] <= by_stat["median"] <= by_stat["max"]
        assert by_stat["mean"] is not None

    def test_planted_sweep_error_trend(self):
        # On a homophilous planted graph the first-step mean error shrinks
        # as the gate loosens: tiny thresholds keep mostly degree-1
        # attachments (no averaging), larger ones pool more back-connections.
        from scipy.stats import spearmanr

        cfg = PlantedConfig(n_nodes=5000, n_elites=50, feature_dim=2,
                            mixture_components=4, mixture_spread=0.3, beta=5.0,
                            elite_attractiveness=40.0, mean_out_degree=15.0, seed=0)
        g, truth, elites = generate_planted(cfg)
        pool = spatial_uniform_sample(
            truth, np.setdiff1d(truth.nodes(), elites), 1000, grid_bins=12, seed=0
        )
        grid = np.linspace(0.1, 1.0, 10).tolist()
        report = sweep_method_a(g, truth, pool, Direction.UP, grid)
        errors = [report.rows_where(epsilon=e, stat="mean")[0].error for e in grid]
        assert all(e is not None for e in errors)
        assert spearmanr(grid, errors).statistic < 0


class TestKfoldMethodB:
    def test_partition_is_a_partition(self, rng):
        pool = np.arange(31)
        k = 5
        folds = [np.sort(f) for f in np.array_split(np.random.default_rng(7).permutation(pool), k)]
        together = np.concatenate(folds)
        assert np.sort(together).tolist() == pool.tolist()

    def test_small_instance_full_coverage(self):
        g, truth = tiny_instance()
        report = kfold_eval_method_b(g, truth, [0, 1, 2, 3, 5, 6], 3, Direction.UP, [1.0], seed=0)
        for row in report.rows_where(stat="mean"):
            if row.fold is not None:
                assert row.coverage == 1.0
                assert row.error is not None

    def test_zero_coverage_keeps_error_absent(self):
        g = DirectedGraph.from_edges([(0, 3), (1, 3), (2, 4)], node_count=5)
        truth = store_from([[0.0], [0.1], [5.0]])
        report = kfold_eval_method_b(g, truth, [0, 1, 2], 3, Direction.UP, [0.05], seed=1)
        fold_rows = [r for r in report.rows_where(stat="mean") if r.fold is not None]
        uncovered = [r for r in fold_rows if r.coverage == 0.0]
        assert uncovered and all(r.error is None for r in uncovered)

    def test_coverage_within_bounds_and_deterministic(self):
        cfg = PlantedConfig(n_nodes=400, n_elites=10, beta=4.0, mean_out_degree=6.0, seed=6)
        g, truth, _ = generate_planted(cfg)
        pool = spatial_uniform_sample(truth, np.arange(400), 60, grid_bins=6, seed=2)
        grid = [0.1, 0.4]
        r1 = kfold_eval_method_b(g, truth, pool, 4, Direction.UP, grid, seed=9)
        r2 = kfold_eval_method_b(g, truth, pool, 4, Direction.UP, grid, seed=9)
        assert r1.rows == r2.rows
        for row in r1.rows:
            if row.coverage is not None:
                assert 0.0 <= row.coverage <= 1.0

    def test_recovered_union_grows_with_epsilon(self):
        cfg = PlantedConfig(n_nodes=400, n_elites=10, beta=4.0, mean_out_degree=6.0, seed=6)
        g, truth, _ = generate_planted(cfg)
        pool = spatial_uniform_sample(truth, np.arange(400), 50, grid_bins=6, seed=2)
        fold = pool[:10]
        train = np.setdiff1d(pool, fold)
        union: set = set()
        sizes = []
        for eps in (0.05, 0.2, 0.5, 1.0):
            work = truth.subset(train)
            state = init_state(work, train, Direction.UP, eps)
            added, _, _ = step_method_b(state, g, work)
            union |= set(np.intersect1d(fold, added).tolist())
            sizes.append(len(union))
        assert sizes == sorted(sizes)

    def test_too_many_folds_rejected(self):
        g, truth = tiny_instance()
        with pytest.raises(ValueError):
            kfold_eval_method_b(g, truth, [0, 1, 2], 4, Direction.UP, [0.5], seed=0)
        with pytest.raises(ValueError):
            kfold_eval_method_b(g, truth, [0, 1, 2], 1, Direction.UP, [0.5], seed=0)


class TestReportSerialization:
    def make_report(self):
        g, truth = tiny_instance()
        return kfold_eval_method_b(g, truth, [0, 1, 2, 3, 5, 6], 2, Direction.UP, [0.5, 1.0], seed=0)

    def test_csv_schema(self, tmp_path):
        report = self.make_report()
        path = tmp_path / "report.csv"
        report.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(CSV_COLUMNS)
        assert len(rows) == len(report.rows) + 1
        aggregates = [r for r in rows[1:] if r[3] == "all"]
        assert aggregates

    def test_json_payload(self, tmp_path):
        report = self.make_report()
        path = tmp_path / "report.json"
        report.to_json(path)
        payload = json.loads(path.read_text())
        assert payload["metadata"]["protocol"] == "kfold-b"
        assert len(payload["rows"]) == len(report.rows)


class TestCorrelateWithExternal:
    def group_fixture(self, rng, n_groups=4, per_group=20):
        positions, groups = {}, {}
        offsets = np.linspace(-2, 2, n_groups)
        node = 0
        for gi, off in enumerate(offsets):
            for _ in range(per_group):
                positions[node] = np.array([off + rng.normal(0, 0.05), rng.normal()])
                groups[node] = f"g{gi}"
                node += 1
        return positions, groups, offsets

    def test_self_correlation_on_first_dimension(self, rng):
        positions, groups, offsets = self.group_fixture(rng)
        means = {}
        for node, grp in groups.items():
            means.setdefault(grp, []).append(positions[node][0])
        scores = {"axis": {g: float(np.mean(v)) for g, v in means.items()}}
        result = correlate_with_external(positions, groups, scores)
        assert result["axis"]["group_level"][0] == pytest.approx(1.0, abs=1e-9)
        assert result["axis"]["node_level"][0] > 0.95

    def test_permuted_scores_reported_not_asserted(self, rng):
        positions, groups, offsets = self.group_fixture(rng, n_groups=8)
        perm = rng.permutation(len(offsets))
        scores = {"noise": {f"g{i}": float(offsets[perm[i]]) for i in range(8)}}
        result = correlate_with_external(positions, groups, scores)
        assert np.isfinite(result["noise"]["group_level"]).all()

    def test_constant_scores_rejected(self, rng):
        positions, groups, _ = self.group_fixture(rng)
        with pytest.raises(ValueError):
            correlate_with_external(positions, groups, {"flat": {g: 1.0 for g in set(groups.values())}})

    def test_too_few_matched_groups_rejected(self, rng):
        positions, groups, _ = self.group_fixture(rng)
        with pytest.raises(ValueError):
            correlate_with_external(positions, groups, {"thin": {"g0": 0.0, "g1": 1.0}})

    def test_feature_store_positions_accepted(self, rng):
        store = FeatureStore(1)
        groups = {}
        for i in range(30):
            grp = i % 3
            store.set_known(i, [float(grp) + rng.normal(0, 0.01)])
            groups[i] = f"g{grp}"
        scores = {"c": {"g0": 0.0, "g1": 1.0, "g2": 2.0}}
        result = correlate_with_external(store, groups, scores)
        assert result["c"]["node_level"][0] > 0.99
