"""Tests for adjacency, power graphs, and normalization.

The power-graph implementation is checked against two independent
oracles: breadth-first search distances and binarized sums of exact
matrix powers.
"""

import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphbind.graphs import (
    adjacency_matrix,
    power_graph,
    prepare_drug,
    raw_power,
    sym_normalize,
)
from graphbind.smiles import parse_smiles


def bfs_distances(adj: np.ndarray, source: int) -> list[float]:
    """Hop distances from ``source`` by breadth-first search."""
    n = adj.shape[0]
    dist = [float("inf")] * n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in range(n):
            if adj[u, v] and dist[v] == float("inf"):
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def power_graph_bfs_oracle(adj: np.ndarray, k: int) -> np.ndarray:
    """Reference power graph: BFS distance in [1, k]."""
    n = adj.shape[0]
    out = np.zeros((n, n))
    for s in range(n):
        dist = bfs_distances(adj, s)
        for t in range(n):
            if s != t and dist[t] <= k:
                out[s, t] = 1
    return out


def power_graph_matrix_oracle(adj: np.ndarray, k: int) -> np.ndarray:
    """Reference power graph: binarized sum of exact integer powers."""
    a = adj.astype(object)  # exact integer arithmetic, no overflow
    acc = np.zeros_like(a)
    term = np.eye(adj.shape[0], dtype=object)
    for _ in range(k):
        term = term @ a
        acc = acc + term
    out = (acc > 0).astype(float)
    np.fill_diagonal(out, 0)
    return out


def all_graphs_up_to(n_max: int):
    """Every simple undirected graph on <= n_max labeled vertices."""
    for n in range(1, n_max + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for bits in range(2 ** len(pairs)):
            adj = np.zeros((n, n))
            for idx, (i, j) in enumerate(pairs):
                if bits >> idx & 1:
                    adj[i, j] = adj[j, i] = 1
            yield adj


class TestAdjacency:
    def test_benzene(self):
        adj = adjacency_matrix(parse_smiles("c1ccccc1"))
        assert adj.shape == (6, 6)
        np.testing.assert_array_equal(adj, adj.T)
        assert adj.sum() == 12  # six bonds, both directions
        assert np.all(np.diag(adj) == 0)

    def test_disconnected(self):
        adj = adjacency_matrix(parse_smiles("[Na+].[Cl-]"))
        np.testing.assert_array_equal(adj, np.zeros((2, 2)))


class TestPowerGraphExhaustive:
    def test_matches_both_oracles_on_all_graphs_up_to_four(self):
        for adj in all_graphs_up_to(4):
            for k in (1, 2, 3, 4):
                ours = power_graph(adj, k)
                np.testing.assert_array_equal(ours, power_graph_bfs_oracle(adj, k))
                np.testing.assert_array_equal(ours, power_graph_matrix_oracle(adj, k))

    def test_path_graph_distances(self):
        # 0-1-2-3-4 path: k=2 reaches two hops out.
        adj = np.diag(np.ones(4), 1) + np.diag(np.ones(4), -1)
        p2 = power_graph(adj, 2)
        assert p2[0, 2] == 1 and p2[0, 3] == 0
        p4 = power_graph(adj, 4)
        assert p4[0, 4] == 1

    def test_k_one_is_binarized_adjacency(self):
        adj = adjacency_matrix(parse_smiles("CC(C)C"))
        np.testing.assert_array_equal(power_graph(adj, 1), adj)

    def test_rejects_nonpositive_order(self):
        with pytest.raises(ValueError):
            power_graph(np.zeros((2, 2)), 0)


class TestRawPower:
    def test_walk_counts_on_triangle(self):
        adj = np.ones((3, 3)) - np.eye(3)
        p2 = raw_power(adj, 2)
        # Two 2-walks between distinct vertices, two closed 2-walks.
        np.testing.assert_array_equal(p2, np.full((3, 3), 1.0) + np.eye(3))

    def test_diagonal_of_square_counts_degree(self):
        adj = adjacency_matrix(parse_smiles("CC(C)C")).astype(np.float64)
        p2 = raw_power(adj, 2)
        degrees = adj.sum(axis=1)
        np.testing.assert_array_equal(np.diag(p2), degrees)


class TestNormalization:
    def test_known_two_node_value(self):
        adj = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = sym_normalize(adj, dtype=np.float64)
        np.testing.assert_allclose(out, np.full((2, 2), 0.5), atol=1e-15)

    def test_isolated_node_keeps_unit_self_loop(self):
        out = sym_normalize(np.zeros((3, 3)), dtype=np.float64)
        np.testing.assert_array_equal(out, np.eye(3))

    def test_exact_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = rng.integers(2, 12)
            adj = (rng.random((n, n)) < 0.4).astype(float)
            adj = np.triu(adj, 1)
            adj = adj + adj.T
            out = sym_normalize(adj, dtype=np.float64)
            np.testing.assert_array_equal(out, out.T)  # bitwise

    def test_top_eigenvalue_is_one_for_connected_graph(self):
        adj = adjacency_matrix(parse_smiles("CC(=O)Oc1ccccc1C(=O)O")).astype(np.float64)
        out = sym_normalize(adj, dtype=np.float64)
        eigs = np.linalg.eigvalsh(out)
        assert abs(eigs[-1] - 1.0) < 1e-12

    def test_rows_of_normalized_matrix_scale_with_sqrt_degree(self):
        # D^{1/2}·1 is the Perron eigenvector: (A_hat @ sqrt(deg)) = sqrt(deg).
        adj = adjacency_matrix(parse_smiles("c1ccc2ccccc2c1")).astype(np.float64)
        out = sym_normalize(adj, dtype=np.float64)
        sqrt_deg = np.sqrt(adj.sum(axis=1) + 1.0)
        np.testing.assert_allclose(out @ sqrt_deg, sqrt_deg, atol=1e-12)


class TestPrepareDrug:
    def test_shapes_and_orders(self):
        dg = prepare_drug("CC(=O)Oc1ccccc1C(=O)O")
        assert dg.n_atoms == 13
        assert dg.features.shape == (13, 78)
        assert set(dg.norm_powers) == {1, 2, 3}
        for mat in dg.norm_powers.values():
            assert mat.shape == (13, 13)
            assert mat.dtype == np.float32

    def test_custom_orders(self):
        dg = prepare_drug("CCO", orders=(2,))
        assert set(dg.norm_powers) == {2}

    def test_binarize_flag_changes_values(self):
        binary = prepare_drug("c1ccccc1", orders=(2,), dtype=np.float64)
        raw = prepare_drug("c1ccccc1", orders=(2,), binarize=False, dtype=np.float64)
        assert not np.array_equal(binary.norm_powers[2], raw.norm_powers[2])

    def test_power_one_normalization_matches_direct_path(self):
        dg = prepare_drug("CCO", dtype=np.float64)
        adj = adjacency_matrix(parse_smiles("CCO"), dtype=np.float64)
        np.testing.assert_array_equal(dg.norm_powers[1], sym_normalize(adj, dtype=np.float64))


@st.composite
def random_adjacency(draw):
    n = draw(st.integers(1, 8))
    bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    adj = np.zeros((n, n))
    for idx, (i, j) in enumerate(itertools.combinations(range(n), 2)):
        if bits[idx]:
            adj[i, j] = adj[j, i] = 1
    return adj


class TestProperties:
    @given(random_adjacency(), st.integers(1, 5))
    @settings(max_examples=150, deadline=None)
    def test_power_graph_matches_bfs_oracle(self, adj, k):
        np.testing.assert_array_equal(power_graph(adj, k), power_graph_bfs_oracle(adj, k))

    @given(random_adjacency(), st.integers(1, 4))
    @settings(max_examples=100, deadline=None)
    def test_power_graphs_are_monotone_in_k(self, adj, k):
        smaller, larger = power_graph(adj, k), power_graph(adj, k + 1)
        assert np.all(larger >= smaller)

    @given(random_adjacency())
    @settings(max_examples=100, deadline=None)
    def test_normalization_preserves_symmetry_and_unit_spectral_bound(self, adj):
        out = sym_normalize(adj, dtype=np.float64)
        np.testing.assert_array_equal(out, out.T)
        eigs = np.linalg.eigvalsh(out)
        assert eigs[-1] <= 1.0 + 1e-9
