"""Graph representation, Laplacian/spectral oracles, generators, estimation."""
import numpy as np
import pytest

from heatlasso.errors import (
    DimensionTooLarge,
    InvalidProbability,
    InvalidQuantile,
    NotACorrelation,
)
from heatlasso.graphs import (
    Graph,
    complete_graph,
    connected_components,
    disjoint_union,
    estimate_graph,
    figure_graph,
    laplacian,
    path_graph,
    read_graph,
    sample_block_graph,
    sample_clustered_network,
    spectral_decompose,
    write_graph,
)


def random_graph(rng, p, density=0.4):
    mask = rng.random((p, p)) < density
    edges = [(i, j) for i in range(p) for j in range(i + 1, p) if mask[i, j]]
    return Graph(p, edges=edges)


class TestGraphInvariants:
    def test_adjacency_symmetric_and_sorted(self):
        g = Graph(4, edges=[(2, 0), (3, 1), (0, 1)])
        for i in range(4):
            nbrs = g.neighbors(i)
            assert np.array_equal(nbrs, np.sort(nbrs))
            for j in nbrs:
                assert i in g.neighbors(j)

    def test_duplicate_edges_collapse(self):
        g = Graph(3, edges=[(0, 1), (1, 0), (0, 1)])
        assert g.edge_count == 1
        assert g.degrees.tolist() == [1, 1, 0]

    def test_self_loop_rejected_by_default(self):
        with pytest.raises(ValueError):
            Graph(3, edges=[(1, 1)])

    def test_self_loop_allowed_when_opted_in(self):
        g = Graph(3, edges=[(1, 1), (0, 1)], allow_self_loops=True)
        assert g.degrees.tolist() == [1, 2, 0]
        assert g.edge_count == 2

    def test_from_neighbor_lists_validates_symmetry(self):
        with pytest.raises(ValueError):
            Graph.from_neighbor_lists([[1], []])

    def test_edge_out_of_range(self):
        with pytest.raises(ValueError):
            Graph(2, edges=[(0, 5)])


class TestLaplacian:
    def test_single_vertex(self):
        assert laplacian(Graph(1)).tolist() == [[0.0]]

    def test_two_vertex_edge(self):
        assert laplacian(Graph(2, [(0, 1)])).tolist() == [[1, -1], [-1, 1]]

    def test_figure_graph_block_diagonal(self):
        L = laplacian(figure_graph())
        expected = np.array([[1, -1, 0], [-1, 1, 0], [0, 0, 0]], dtype=float)
        assert np.array_equal(L, expected)

    def test_row_sums_exactly_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(2, 30)))
            assert np.all(laplacian(g).sum(axis=1) == 0.0)

    def test_row_sums_zero_with_self_loops(self):
        g = Graph(3, edges=[(0, 0), (0, 1), (1, 2)], allow_self_loops=True)
        assert np.all(laplacian(g).sum(axis=1) == 0.0)


class TestSpectralDecompose:
    def test_figure_graph_gap(self):
        spec = spectral_decompose(figure_graph())
        assert spec.zero_multiplicity == 2
        assert spec.spectral_gap == pytest.approx(2.0, abs=1e-10)

    def test_two_complete_graphs(self):
        g = disjoint_union(complete_graph(5), complete_graph(5))
        spec = spectral_decompose(g)
        assert spec.zero_multiplicity == 2
        assert spec.spectral_gap == pytest.approx(5.0, abs=1e-8)

    def test_single_vertex(self):
        spec = spectral_decompose(Graph(1))
        assert spec.eigenvalues.tolist() == [0.0]
        assert spec.zero_multiplicity == 1

    def test_eigenpairs_satisfy_definition(self):
        rng = np.random.default_rng(1)
        g = random_graph(rng, 12)
        L = laplacian(g)
        spec = spectral_decompose(g)
        resid = L @ spec.eigenvectors - spec.eigenvectors * spec.eigenvalues
        assert np.abs(resid).max() < 1e-8
        gram = spec.eigenvectors.T @ spec.eigenvectors
        assert np.abs(gram - np.eye(g.p)).max() < 1e-8

    def test_dimension_cap(self):
        with pytest.raises(DimensionTooLarge):
            spectral_decompose(Graph(5), limit=4)

    def test_zero_multiplicity_matches_union_find(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            p = int(rng.integers(2, 65))
            g = random_graph(rng, p, density=float(rng.uniform(0.02, 0.3)))
            count, _ = connected_components(g)
            assert spectral_decompose(g).zero_multiplicity == count

    def test_operator_norm_at_most_twice_max_degree(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(2, 30)))
            sig = np.abs(spectral_decompose(g).eigenvalues).max()
            assert sig <= 2 * g.max_degree + 1e-9


class TestEstimateGraph:
    def test_identity_gives_empty_graph(self):
        g = estimate_graph(np.eye(4), alpha=0.5)
        assert g.edge_count == 0

    def test_nearest_rank_median(self):
        corr = np.eye(3)
        corr[0, 1] = corr[1, 0] = 0.9
        corr[0, 2] = corr[2, 0] = 0.2
        corr[1, 2] = corr[2, 1] = 0.1
        g = estimate_graph(corr, alpha=0.5)  # threshold = 0.2, strict >
        assert list(g.edges()) == [(0, 1)]

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((80, 6))
        corr = np.corrcoef(X, rowvar=False)
        g1 = estimate_graph(corr, 0.6)
        flip = np.diag([1, -1, 1, -1, -1, 1]).astype(float)
        g2 = estimate_graph(flip @ corr @ flip, 0.6)
        assert list(g1.edges()) == list(g2.edges())

    def test_invalid_quantile(self):
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(InvalidQuantile):
                estimate_graph(np.eye(3), alpha)

    def test_not_a_correlation(self):
        bad = np.eye(3)
        bad[0, 0] = 0.5
        with pytest.raises(NotACorrelation):
            estimate_graph(bad, 0.5)
        asym = np.eye(3)
        asym[0, 1] = 0.5
        with pytest.raises(NotACorrelation):
            estimate_graph(asym, 0.5)
        nan = np.eye(3)
        nan[0, 1] = nan[1, 0] = np.nan
        with pytest.raises(NotACorrelation):
            estimate_graph(nan, 0.5)

    def test_single_vertex(self):
        assert estimate_graph(np.eye(1), 0.5).edge_count == 0


class TestBlockGraphSampling:
    def test_empty_when_probabilities_zero(self):
        g = sample_block_graph([3, 4], 0.0, 0.0, seed=1)
        assert g.edge_count == 0

    def test_disjoint_cliques_when_a_one_b_zero(self):
        g = sample_block_graph([3, 2], 1.0, 0.0, seed=2)
        assert g.edge_count == 4  # K_3 plus K_2
        count, labels = connected_components(g)
        assert count == 2
        assert labels[0] == labels[1] == labels[2]
        assert labels[3] == labels[4]

    def test_mean_within_degree_matches_expectation(self):
        # size-40 block at a = 0.5: expected within-degree 0.5 * 39 = 19.5
        sizes = [16, 24, 40, 20]
        block = slice(40, 80)
        means = []
        for seed in range(100):
            g = sample_block_graph(sizes, 0.5, 0.01, seed=seed)
            A = g.adjacency()
            means.append(A[block, block].sum(axis=1).mean())
        assert abs(np.mean(means) - 19.5) < 1.0

    def test_deterministic_per_seed(self):
        g1 = sample_block_graph([5, 5], 0.5, 0.1, seed=7)
        g2 = sample_block_graph([5, 5], 0.5, 0.1, seed=7)
        assert list(g1.edges()) == list(g2.edges())
        g3 = sample_block_graph([5, 5], 0.5, 0.1, seed=8)
        assert list(g1.edges()) != list(g3.edges())

    def test_invalid_probability(self):
        with pytest.raises(InvalidProbability):
            sample_block_graph([3], 1.2, 0.0)
        with pytest.raises(InvalidProbability):
            sample_block_graph([3, 3], 0.2, 0.5)

    def test_clustered_network_allows_self_loops(self):
        g = sample_clustered_network([20], 1.0, seed=0)
        assert g.allow_self_loops
        assert any(i == j for i, j in g.edges())

    def test_clustered_network_gap_scales_with_size(self):
        # gap/p should sit inside a fixed multiple of the block densities
        sizes, xi = [40, 60], [0.4, 0.6]
        p = sum(sizes)
        lo = 0.2 * min(x * s / p for x, s in zip(xi, sizes))
        hi = 1.2 * max(x * s / p for x, s in zip(xi, sizes))
        hits = 0
        trials = 50
        for seed in range(trials):
            g = sample_clustered_network(sizes, xi, seed=seed)
            gap = spectral_decompose(g).spectral_gap
            hits += lo <= gap / p <= hi
        assert hits >= 0.95 * trials


@pytest.mark.parametrize("p_total", [50, 100, 200])
def test_clustered_network_gap_bracket_across_sizes(p_total):
    sizes = [p_total // 2, p_total - p_total // 2]
    xi = 0.5
    lo = 0.2 * min(xi * s / p_total for s in sizes)
    hi = 1.2 * max(xi * s / p_total for s in sizes)
    hits = 0
    trials = 50
    for seed in range(trials):
        g = sample_clustered_network(sizes, xi, seed=seed)
        gap = spectral_decompose(g).spectral_gap
        hits += lo <= gap / p_total <= hi
    assert hits >= 0.95 * trials


class TestGraphFileFormat:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 9)
        path = tmp_path / "g.txt"
        write_graph(g, path)
        g2 = read_graph(path)
        assert g2.p == g.p
        assert list(g2.edges()) == list(g.edges())

    def test_roundtrip_with_self_loop(self, tmp_path):
        g = Graph(3, edges=[(0, 0), (1, 2)], allow_self_loops=True)
        path = tmp_path / "g.txt"
        write_graph(g, path)
        g2 = read_graph(path)
        assert g2.allow_self_loops
        assert list(g2.edges()) == [(0, 0), (1, 2)]

    def test_header_is_checked(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 nodes\n0 1\n")
        with pytest.raises(ValueError):
            read_graph(path)


def test_path_graph_shape():
    g = path_graph(4)
    assert g.edge_count == 3
    assert g.degrees.tolist() == [1, 2, 2, 1]
