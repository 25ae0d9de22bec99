import numpy as np
import pytest

from epiprofiler.network import (
    UNREACHABLE,
    Network,
    generate_erdos_renyi,
    hop_distances,
    is_interchangeable,
    load_adjacency,
    mobility_matrix,
    save_adjacency,
)


def path_graph(n):
    adj = np.zeros((n, n), dtype=int)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1
    return Network(adj)


def star_graph(leaves):
    adj = np.zeros((leaves + 1, leaves + 1), dtype=int)
    adj[0, 1:] = 1
    adj[1:, 0] = 1
    return Network(adj)


from oracles import relaxation_distances


class TestNetworkValidation:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            Network(np.zeros((2, 3)))

    def test_rejects_non_binary_entry(self):
        adj = np.zeros((2, 2))
        adj[0, 1] = adj[1, 0] = 2
        with pytest.raises(ValueError, match=r"adjacency\[0\]\[1\]"):
            Network(adj)

    def test_rejects_self_loop(self):
        adj = np.zeros((2, 2), dtype=int)
        adj[0, 0] = 1
        with pytest.raises(ValueError, match="self-loops"):
            Network(adj)

    def test_rejects_asymmetry(self):
        adj = np.zeros((3, 3), dtype=int)
        adj[0, 1] = 1
        with pytest.raises(ValueError, match="symmetric"):
            Network(adj)

    def test_default_labels(self):
        net = path_graph(3)
        assert net.labels == ("n0", "n1", "n2")

    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError, match="unique"):
            Network(np.zeros((2, 2), dtype=int), labels=["a", "a"])

    def test_adjacency_is_immutable(self):
        net = path_graph(3)
        with pytest.raises(ValueError):
            net.adjacency[0, 1] = 0


class TestErdosRenyi:
    def test_deterministic_for_fixed_seed(self):
        a = generate_erdos_renyi(10, 3.0, seed=42)
        b = generate_erdos_renyi(10, 3.0, seed=42)
        assert np.array_equal(a.adjacency, b.adjacency)

    def test_different_seeds_differ(self):
        a = generate_erdos_renyi(30, 3.0, seed=1)
        b = generate_erdos_renyi(30, 3.0, seed=2)
        assert not np.array_equal(a.adjacency, b.adjacency)

    def test_two_nodes_unit_mean_degree_forces_edge(self):
        for seed in range(10):
            net = generate_erdos_renyi(2, 1.0, seed=seed)
            assert net.adjacency[0, 1] == 1

    def test_empirical_mean_degree(self):
        # 1000 draws at n=100, target mean degree 2.0
        total = 0.0
        for seed in range(1000):
            net = generate_erdos_renyi(100, 2.0, seed=(99, seed))
            total += net.degrees().mean()
        assert total / 1000 == pytest.approx(2.0, abs=0.1)

    def test_invariants_hold_on_random_draws(self):
        for seed in range(20):
            net = generate_erdos_renyi(25, 3.0, seed=seed)
            adj = net.adjacency
            assert np.array_equal(adj, adj.T)
            assert np.diagonal(adj).sum() == 0

    @pytest.mark.parametrize("n,k", [(1, 0.5), (0, 1.0), (10, 0.0), (10, 10.0), (10, -1.0)])
    def test_parameter_errors(self, n, k):
        with pytest.raises(ValueError):
            generate_erdos_renyi(n, k, seed=0)


class TestHopDistances:
    def test_path_graph(self):
        d = hop_distances(path_graph(3)).d
        assert np.array_equal(d, [[0, 1, 2], [1, 0, 1], [2, 1, 0]])

    def test_isolated_node_unreachable(self):
        adj = np.zeros((4, 4), dtype=int)
        adj[0, 1] = adj[1, 0] = adj[1, 2] = adj[2, 1] = 1
        d = hop_distances(Network(adj)).d
        assert d[0, 3] == UNREACHABLE
        assert d[3, 0] == UNREACHABLE
        assert d[3, 3] == 0

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_relaxation_oracle(self, seed):
        rng = np.random.default_rng((7, seed))
        n = int(rng.integers(2, 21))
        k = float(rng.uniform(0.5, min(n - 1, 4)))
        net = generate_erdos_renyi(n, k, seed=(8, seed))
        assert np.array_equal(hop_distances(net).d, relaxation_distances(net.adjacency))

    def test_adjacent_iff_distance_one(self):
        net = generate_erdos_renyi(40, 3.0, seed=3)
        d = hop_distances(net).d
        assert np.array_equal(d == 1, net.adjacency == 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_symmetry_and_triangle_inequality(self, seed):
        net = generate_erdos_renyi(15, 2.5, seed=(21, seed))
        d = hop_distances(net).d
        assert np.array_equal(d, d.T)
        assert np.all(np.diagonal(d) == 0)
        n = net.n
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if d[i, k] >= 0 and d[k, j] >= 0:
                        assert d[i, j] >= 0  # reachable via k
                        assert d[i, j] <= d[i, k] + d[k, j]


class TestMobilityMatrix:
    def test_path_hand_values(self):
        g = mobility_matrix(path_graph(3), gamma=0.2).g
        expected = np.array([[0.0, 0.2, 0.0], [0.1, 0.0, 0.1], [0.0, 0.2, 0.0]])
        np.testing.assert_allclose(g, expected, rtol=1e-15)

    def test_star_hand_values(self):
        # center with 4 leaves: each center->leaf rate is gamma/4
        g = mobility_matrix(star_graph(4), gamma=0.2).g
        np.testing.assert_allclose(g[0, 1:], 0.05, rtol=1e-15)
        np.testing.assert_allclose(g[1:, 0], 0.2, rtol=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_row_sums_equal_gamma(self, seed):
        net = generate_erdos_renyi(30, 2.0, seed=(5, seed))
        gamma = 0.37
        g = mobility_matrix(net, gamma).g
        sums = g.sum(axis=1)
        degrees = net.degrees()
        np.testing.assert_allclose(sums[degrees > 0], gamma, rtol=1e-12)
        assert np.all(sums[degrees == 0] == 0.0)

    def test_positive_only_on_links(self):
        net = generate_erdos_renyi(20, 2.5, seed=9)
        g = mobility_matrix(net, 0.2).g
        assert np.all((g > 0) == (net.adjacency == 1))

    def test_gamma_must_be_positive(self):
        with pytest.raises(ValueError, match="gamma"):
            mobility_matrix(path_graph(3), 0.0)


class TestPermutationEquivariance:
    @pytest.mark.parametrize("seed", range(10))
    def test_distance_and_mobility_conjugate(self, seed):
        rng = np.random.default_rng((11, seed))
        net = generate_erdos_renyi(12, 2.5, seed=(12, seed))
        perm = rng.permutation(12)
        relabeled = Network(net.adjacency[np.ix_(perm, perm)])
        d = hop_distances(net).d
        d_rel = hop_distances(relabeled).d
        assert np.array_equal(d_rel, d[np.ix_(perm, perm)])
        g = mobility_matrix(net, 0.2).g
        g_rel = mobility_matrix(relabeled, 0.2).g
        np.testing.assert_allclose(g_rel, g[np.ix_(perm, perm)], rtol=1e-12)


class TestInterchangeable:
    def test_star_leaves_interchangeable(self):
        dist = hop_distances(star_graph(3))
        assert is_interchangeable(dist, [1, 2, 3])
        assert not is_interchangeable(dist, [0, 1])

    def test_path_ends_not_interchangeable_with_middle(self):
        dist = hop_distances(path_graph(3))
        assert is_interchangeable(dist, [0, 2])
        assert not is_interchangeable(dist, [0, 1])


class TestAdjacencyCsv:
    def test_round_trip(self, tmp_path):
        net = generate_erdos_renyi(9, 2.0, seed=13)
        path = tmp_path / "net.csv"
        save_adjacency(net, path)
        loaded = load_adjacency(path)
        assert np.array_equal(loaded.adjacency, net.adjacency)
        assert loaded.labels == net.labels

    def test_load_rejects_bad_entry_naming_cell(self, tmp_path):
        path = tmp_path / "net.csv"
        path.write_text("a,b\na,0,2\nb,2,0\n")
        with pytest.raises(ValueError, match=r"\(a, b\)"):
            load_adjacency(path)

    def test_load_rejects_asymmetric(self, tmp_path):
        path = tmp_path / "net.csv"
        path.write_text("a,b,c\na,0,1,0\nb,0,0,1\nc,0,1,0\n")
        with pytest.raises(ValueError, match="symmetric"):
            load_adjacency(path)

    def test_load_rejects_self_loop(self, tmp_path):
        path = tmp_path / "net.csv"
        path.write_text("a,b\na,1,1\nb,1,0\n")
        with pytest.raises(ValueError, match="self-loops"):
            load_adjacency(path)

    def test_load_rejects_row_count_mismatch(self, tmp_path):
        path = tmp_path / "net.csv"
        path.write_text("a,b\na,0,1\n")
        with pytest.raises(ValueError, match="node rows"):
            load_adjacency(path)
