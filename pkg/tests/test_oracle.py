import pytest

from conftest import make_weighted_dag
from meshinsight.callgraph import validate
from meshinsight.errors import DegenerateFit, TooLarge
from meshinsight.oracle import (
    RandomSpec,
    enumerate_critical_path,
    generate_random_acg,
    ols_oracle,
)


class TestEnumerateCriticalPath:
    def test_single_node(self):
        graph = make_weighted_dag({"only": 7.5}, [])
        assert enumerate_critical_path(graph, {"only": 7.5}) == (7.5, ("only",))

    def test_fig_style_fanout_with_unit_weights(self):
        # client->frontend->product->{details, reviews->ratings} shape
        weights = {f"i{k}": 1.0 for k in range(1, 6)}
        graph = make_weighted_dag(
            weights,
            [("i1", "i2"), ("i2", "i3"), ("i2", "i4"), ("i4", "i5")],
        )
        total, path = enumerate_critical_path(graph, weights)
        assert total == 4.0
        assert path == ("i1", "i2", "i4", "i5")

    def test_diamond_takes_heavy_branch(self):
        weights = {"top": 1.0, "heavy": 5.0, "light": 3.0, "bottom": 1.0}
        graph = make_weighted_dag(
            weights,
            [("top", "heavy"), ("top", "light"), ("heavy", "bottom"), ("light", "bottom")],
        )
        total, path = enumerate_critical_path(graph, weights)
        assert total == 7.0
        assert path == ("top", "heavy", "bottom")

    def test_tie_breaks_to_lexicographically_smallest(self):
        weights = {"r": 1.0, "b": 2.0, "a": 2.0}
        graph = make_weighted_dag(weights, [("r", "b"), ("r", "a")])
        total, path = enumerate_critical_path(graph, weights)
        assert total == 3.0
        assert path == ("r", "a")

    def test_size_bound(self):
        weights = {f"n{k:02d}": 1.0 for k in range(21)}
        graph = make_weighted_dag(weights, [])
        with pytest.raises(TooLarge):
            enumerate_critical_path(graph, weights)


class TestOlsOracle:
    def test_two_points_determine_line(self):
        assert ols_oracle([(0.0, 1.0), (1.0, 3.0)]) == (1.0, 2.0)

    def test_symmetric_noise_pair_leaves_fit(self):
        line = lambda x: 10.0 + 2.0 * x
        base = [(x, line(x)) for x in (1.0, 2.0, 3.0, 4.0)]
        # opposite-sign residuals at one x cancel in both normal equations
        noisy = base + [(2.5, line(2.5) + 0.5), (2.5, line(2.5) - 0.5)]
        intercept, slope = ols_oracle(noisy)
        assert slope == pytest.approx(2.0, rel=1e-12)
        assert intercept == pytest.approx(10.0, rel=1e-12)

    def test_planted_grid_recovered(self):
        points = [(s, 10.0 + 0.002 * s) for s in (100, 1024, 2048, 3072, 4096)]
        intercept, slope = ols_oracle(points)
        assert intercept == pytest.approx(10.0, rel=1e-12)
        assert slope == pytest.approx(0.002, rel=1e-12)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateFit):
            ols_oracle([(1.0, 2.0)])
        with pytest.raises(DegenerateFit):
            ols_oracle([(1.0, 2.0), (1.0, 3.0)])


class TestRandomAcg:
    def test_single_invocation_spec(self):
        graph = generate_random_acg(RandomSpec(seed=42, min_invocations=1, max_invocations=1))
        assert len(graph.invocations) == 1

    def test_same_seed_same_graph(self):
        spec = RandomSpec(seed=1234)
        assert generate_random_acg(spec) == generate_random_acg(spec)

    def test_different_seeds_differ(self):
        assert generate_random_acg(RandomSpec(seed=1)) != generate_random_acg(RandomSpec(seed=2))

    @pytest.mark.parametrize("seed", range(200))
    def test_generated_graphs_always_validate(self, seed):
        graph = generate_random_acg(RandomSpec(seed=seed))
        assert validate(graph) == []

    def test_spec_json_round_trip(self):
        spec = RandomSpec(seed=9, max_invocations=6, edge_probability=0.5)
        assert RandomSpec.from_dict(spec.to_dict()) == spec
