import math

import numpy as np
import pytest

from cascadekit.impact import (
    ImpactConfig,
    estimate_reach,
    generate_tree,
    reach_quantiles,
)
from cascadekit.model import TreeParams, tree_size


class TestGenerateTree:
    def test_integer_params_deterministic(self):
        rng = np.random.default_rng(0)
        counts = {generate_tree(TreeParams(2, 2), rng) for _ in range(50)}
        assert counts == {7}

    def test_fractional_branching_mean(self):
        rng = np.random.default_rng(1)
        draws = np.array([generate_tree(TreeParams(1.5, 1), rng) for _ in range(100_000)])
        assert set(np.unique(draws)) == {2, 3}
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - 2.5) < 3 * se

    def test_fractional_depth_bounded_by_integer_cases(self):
        rng = np.random.default_rng(2)
        draws = np.array([generate_tree(TreeParams(2, 1.5), rng) for _ in range(20_000)])
        assert draws.min() >= tree_size(TreeParams(2, 1))
        assert draws.max() <= tree_size(TreeParams(2, 2))
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - tree_size(TreeParams(2, 1.5))) < 3 * se

    def test_expected_count_matches_interpolated_size(self):
        rng = np.random.default_rng(3)
        params = TreeParams(2.3, 3.7)
        draws = np.array([generate_tree(params, rng) for _ in range(60_000)])
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - tree_size(params)) < 3 * se


class TestEstimateReach:
    def test_unit_sizes_give_exact_tree_count(self):
        config = ImpactConfig(
            replicates=25,
            seed=5,
            size_source={"s": (1,)},
            params_source={"s": TreeParams(2, 2)},
        )
        dist = estimate_reach(config)[0]
        assert set(dist.samples) == {7.0}
        assert dist.mean == 7.0

    def test_degenerate_size_mean(self):
        size = 13
        params = TreeParams(2.5, 3.0)
        config = ImpactConfig(
            replicates=4000,
            seed=6,
            size_source={"s": (size,)},
            params_source={"s": params},
        )
        dist = estimate_reach(config)[0]
        samples = np.array(dist.samples)
        se = samples.std() / math.sqrt(samples.size)
        assert abs(dist.mean - size * tree_size(params)) < 3 * se

    def test_stratum_order_invariance(self):
        sizes = tuple(range(10, 40))
        params = {"a": TreeParams(2, 3), "b": TreeParams(3, 2)}
        fwd = ImpactConfig(100, 9, {"a": sizes, "b": sizes}, params)
        rev = ImpactConfig(
            100,
            9,
            {"b": sizes, "a": sizes},
            {"b": params["b"], "a": params["a"]},
        )
        assert [d.samples for d in estimate_reach(fwd)] == [
            d.samples for d in estimate_reach(rev)
        ]

    def test_mean_reach_monotone_in_params(self):
        sizes = tuple(range(5, 100, 7))
        means = []
        for b, h in [(2.0, 3.0), (2.5, 3.0), (2.5, 3.5), (3.0, 4.0)]:
            config = ImpactConfig(3000, 11, {"s": sizes}, {"s": TreeParams(b, h)})
            means.append(estimate_reach(config)[0].mean)
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_empty_sizes_rejected(self):
        with pytest.raises(ValueError, match="empty group-size sample"):
            ImpactConfig(10, 0, {"s": ()}, {"s": TreeParams(2, 2)})

    def test_quantiles_cover_levels(self):
        config = ImpactConfig(500, 1, {"s": (3, 5, 8)}, {"s": TreeParams(2, 2)})
        quantiles = reach_quantiles(estimate_reach(config)[0])
        assert list(quantiles) == [5, 25, 50, 75, 95]
        assert all(quantiles[a] <= quantiles[b] for a, b in zip([5, 25, 50, 75], [25, 50, 75, 95]))

    def test_table_parameter_ratio_bands(self):
        # mean-reach ratios across shared size distributions: hateful vs
        # unlabeled near 5, hateful vs viral-normal near 1.7
        sizes = tuple(int(s) for s in np.random.default_rng(0).integers(20, 400, size=50))
        params = {
            "hateful": TreeParams(3.78, 4.89),
            "unlabeled": TreeParams(2.85, 4.50),
            "viral_normal": TreeParams(3.47, 4.77),
        }
        config = ImpactConfig(8000, 13, {k: sizes for k in params}, params)
        means = {d.stratum: d.mean for d in estimate_reach(config)}
        assert 4.2 <= means["hateful"] / means["unlabeled"] <= 6.4
        assert 1.4 <= means["hateful"] / means["viral_normal"] <= 2.1
