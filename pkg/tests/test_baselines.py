import numpy as np
import pytest

from logitparc.baselines import (
    baseline_curve,
    expand,
    homogeneous_random_parcellation,
    make_rng,
    parcel_adjacency,
    random_hierarchical_merge,
)
from logitparc.cluster import Parcellation, cut_by_count
from logitparc.errors import ConstraintError, DisconnectedGraphError, ParameterError
from logitparc.mesh import AdjacencyGraph, build_adjacency
from logitparc.metrics import adjusted_rand_index
from logitparc.synth import grid_mesh
from oracles import parcels_connected


@pytest.fixture(scope="module")
def g10():
    return build_adjacency(grid_mesh(10, 10))


@pytest.fixture(scope="module")
def g20():
    return build_adjacency(grid_mesh(20, 20))


class TestHomogeneous:
    def test_one_parcel(self, g10):
        assert (homogeneous_random_parcellation(g10, 1, 0).labels == 0).all()

    def test_identity(self, g10):
        p = homogeneous_random_parcellation(g10, 100, 0)
        assert p.n_parcels == 100 and np.array_equal(np.sort(p.labels), np.arange(100))

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("k", [2, 7, 30])
    def test_connected_exact_count(self, g10, seed, k):
        p = homogeneous_random_parcellation(g10, k, seed)
        assert p.n_parcels == k
        assert (p.sizes() > 0).all()
        assert parcels_connected(g10, p.labels)

    def test_deterministic(self, g20):
        a = homogeneous_random_parcellation(g20, 12, 99)
        b = homogeneous_random_parcellation(g20, 12, 99)
        assert a.labels.tobytes() == b.labels.tobytes()
        assert not np.array_equal(a.labels, homogeneous_random_parcellation(g20, 12, 100).labels)

    @pytest.mark.parametrize("k", [0, 101])
    def test_out_of_range(self, g10, k):
        with pytest.raises(ParameterError):
            homogeneous_random_parcellation(g10, k, 0)

    def test_disconnected(self):
        g = AdjacencyGraph.from_edges(4, [(0, 1), (2, 3)])
        with pytest.raises(DisconnectedGraphError):
            # one start cannot reach the other component
            homogeneous_random_parcellation(g, 1, 0)

    def test_frontier_draw_is_uniform(self):
        # path 0-1-2 with starts {0, 2}: the live pairs are (parcel of 0, 1) and
        # (parcel of 2, 1), so vertex 1 joins each side with probability 1/2
        g = AdjacencyGraph.from_edges(3, [(0, 1), (1, 2)])
        joined_0 = trials = 0
        for seed in range(6000):
            # starts are the first draw of the trial's stream
            starts = set(make_rng(seed).choice(3, size=2, replace=False).tolist())
            if starts != {0, 2}:
                continue
            labels = homogeneous_random_parcellation(g, 2, seed).labels
            trials += 1
            joined_0 += labels[1] == labels[0]
        assert trials > 1500
        # binomial(trials, 1/2): 4 standard deviations
        assert abs(joined_0 / trials - 0.5) < 4 * 0.5 / np.sqrt(trials)


class TestRandomMerge:
    def test_two_parcels(self, g10):
        initial = homogeneous_random_parcellation(g10, 2, 1)
        for seed in range(5):
            d = random_hierarchical_merge(initial, g10, seed)
            assert d.n_merges == 1 and d.left[0] == 0 and d.right[0] == 1

    @pytest.mark.parametrize("constrained", [True, False])
    def test_merge_count_and_heights(self, g10, constrained):
        initial = homogeneous_random_parcellation(g10, 40, 2)
        d = random_hierarchical_merge(initial, g10, 3, adjacency_constrained=constrained)
        assert d.n_merges == 39 and d.is_complete
        np.testing.assert_array_equal(d.height, np.arange(1, 40))

    @pytest.mark.parametrize("constrained", [True, False])
    def test_cut_at_initial_count_reproduces_initial(self, g10, constrained):
        initial = homogeneous_random_parcellation(g10, 25, 4)
        d = random_hierarchical_merge(initial, g10, 5, adjacency_constrained=constrained)
        lifted = expand(cut_by_count(d, 25), initial)
        assert np.array_equal(lifted.labels, initial.canonical().labels)

    @pytest.mark.parametrize("seed", range(5))
    def test_constrained_parcels_stay_connected(self, g10, seed):
        initial = homogeneous_random_parcellation(g10, 30, seed)
        d = random_hierarchical_merge(initial, g10, seed + 100)
        for k in (2, 5, 11, 29):
            assert parcels_connected(g10, expand(cut_by_count(d, k), initial).labels)

    def test_constrained_needs_adjacent_parcels(self):
        g = AdjacencyGraph.from_edges(4, [(0, 1), (2, 3)])
        initial = Parcellation([0, 0, 1, 1])
        with pytest.raises(ConstraintError):
            random_hierarchical_merge(initial, g, 0)
        assert random_hierarchical_merge(initial, g, 0, adjacency_constrained=False).n_merges == 1

    def test_parcel_adjacency(self):
        g = build_adjacency(grid_mesh(2, 3))
        pa = parcel_adjacency(Parcellation([0, 1, 2, 0, 1, 2]), g)
        assert {tuple(e) for e in pa.edges().tolist()} == {(0, 1), (1, 2)}

    def test_deterministic(self, g20):
        initial = homogeneous_random_parcellation(g20, 300, 7)
        a = random_hierarchical_merge(initial, g20, 8)
        b = random_hierarchical_merge(initial, g20, 8)
        assert a.left.tobytes() == b.left.tobytes() and a.right.tobytes() == b.right.tobytes()

    def test_independent_pair_in_chance_regime(self, g20):
        # k=55 cut of 300-parcel random merges: a fresh pair of seeds scores
        # within 3 std of the baseline built from other seeds
        (row,) = baseline_curve(g20, n_trials=400, k_values=[55], mode="hierarchical", seed=11)
        _, _, mean, std, _ = row
        parts = []
        for seed in (1001, 1002):
            rng = make_rng(seed)
            initial = homogeneous_random_parcellation(g20, 300, rng)
            d = random_hierarchical_merge(initial, g20, rng)
            parts.append(expand(cut_by_count(d, 55), initial))
        assert abs(adjusted_rand_index(*parts) - mean) <= 3 * std


class TestBaselineCurve:
    def test_identity_partition(self, g10):
        (row,) = baseline_curve(g10, n_trials=4, k_values=[100], mode="homogeneous", seed=0)
        assert row == (100, "homogeneous", 1.0, 0.0, 4)

    def test_single_parcel(self, g10):
        rows = baseline_curve(g10, n_trials=2, k_values=[1], mode="hierarchical", seed=3)
        assert rows[0][2:4] == (1.0, 0.0)

    def test_two_trials_degenerate_std(self, g10):
        (row,) = baseline_curve(g10, n_trials=2, k_values=[5], seed=1)
        assert row[3] == 0.0

    def test_reproducible(self, g10):
        a = baseline_curve(g10, n_trials=10, k_values=[3, 8], seed=5)
        assert a == baseline_curve(g10, n_trials=10, k_values=[3, 8], seed=5)
        assert a != baseline_curve(g10, n_trials=10, k_values=[3, 8], seed=6)

    def test_homogeneous_chance_level(self, g10):
        (row,) = baseline_curve(g10, n_trials=100, k_values=[6], mode="homogeneous", seed=2)
        _, _, mean, std, _ = row
        # contiguous random parcels agree somewhat above zero; still within 3 std of it
        assert abs(mean) <= 3 * std

    def test_all_pairs(self, g10):
        (row,) = baseline_curve(g10, n_trials=6, k_values=[4], seed=0, pairing="all")
        assert -1 <= row[2] <= 1

    @pytest.mark.parametrize(
        "kwargs",
        [dict(n_trials=1), dict(mode="voronoi"), dict(k_values=[0]), dict(k_values=[101]), dict(pairing="x")],
    )
    def test_bad_parameters(self, g10, kwargs):
        args = dict(n_trials=4, k_values=[3], mode="homogeneous", seed=0)
        args.update(kwargs)
        with pytest.raises(ParameterError):
            baseline_curve(g10, **args)

    def test_hierarchical_k_limited_by_initial(self, g10):
        with pytest.raises(ParameterError):
            baseline_curve(g10, n_trials=2, k_values=[60], mode="hierarchical", n_initial=50)
