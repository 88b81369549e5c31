from collections import deque
from itertools import permutations

import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from .centrality import (
    CentralityTable, betweenness_centrality, closeness_centrality, degree, degree_vector, reachable_count,
)
from .graph import DirectedGraph, GraphBuilder, NodeNotFound


def random_digraph(rng, n, p):
    edges = [(s, t) for s, t in permutations(range(n), 2) if rng.random() < p]
    return DirectedGraph.from_edges(n, edges)


def bfs_counts(adjacency, source):
    """Distances and shortest-path counts from ``source``."""
    dist = {source: 0}
    sigma = {source: 1}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                sigma[w] = 0
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
    return dist, sigma


def brute_force_betweenness(graph):
    adjacency = graph.out_adjacency()
    n = graph.n_nodes
    table = [bfs_counts(adjacency, s) for s in range(n)]
    scores = np.zeros(n)
    for s in range(n):
        dist_s, sigma_s = table[s]
        for t in range(n):
            if t == s or t not in dist_s:
                continue
            for v in range(n):
                if v in (s, t) or v not in dist_s:
                    continue
                dist_v, sigma_v = table[v]
                if t in dist_v and dist_s[v] + dist_v[t] == dist_s[t]:
                    scores[v] += sigma_s[v] * sigma_v[t] / sigma_s[t]
    return scores


def brute_force_closeness(graph):
    adjacency = graph.out_adjacency()
    n = graph.n_nodes
    scores = np.zeros(n)
    for v in range(n):
        dist, _ = bfs_counts(adjacency, v)
        r = len(dist)
        total = sum(dist.values())
        if r > 1 and n > 1:
            scores[v] = ((r - 1) / (n - 1)) * ((r - 1) / total)
    return scores


class GraphBuilderTests(SimpleTestCase):
    def test_repeated_edges_accumulate_weight(self):
        builder = GraphBuilder(2)
        builder.add_edge(0, 1)
        builder.add_edge(0, 1, 4)
        graph = builder.build()
        self.assertEqual(graph.n_edges, 1)
        self.assertEqual(graph.edge_weight(0, 1), 5)

    def test_unknown_endpoint_rejected(self):
        builder = GraphBuilder(2)
        with self.assertRaises(NodeNotFound):
            builder.add_edge(0, 5)

    def test_non_positive_weight_rejected(self):
        builder = GraphBuilder(2)
        with self.assertRaises(ValueError):
            builder.add_edge(0, 1, 0)

    def test_duplicate_pairs_rejected_by_constructor(self):
        with self.assertRaises(ValueError):
            DirectedGraph(2, [0, 0], [1, 1], [1, 1])

    def test_without_self_loops(self):
        graph = DirectedGraph.from_edges(2, [(0, 0, 3), (0, 1), (1, 1)])
        loop_free = graph.without_self_loops()
        self.assertEqual(list(loop_free.edges()), [(0, 1, 1)])
        self.assertEqual(graph.self_loop_weights().tolist(), [3, 1])

    def test_adjacency_sorted_by_index(self):
        graph = DirectedGraph.from_edges(4, [(0, 3), (0, 1), (0, 2)])
        self.assertEqual(graph.successors(0).tolist(), [1, 2, 3])


class DegreeTests(SimpleTestCase):
    def test_three_cycle(self):
        graph = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        for v in range(3):
            self.assertEqual(degree(graph, v, 'out'), 1)
            self.assertEqual(degree(graph, v, 'in'), 1)

    def test_star(self):
        graph = DirectedGraph.from_edges(6, [(0, i) for i in range(1, 6)])
        self.assertEqual(degree(graph, 0, 'out'), 5)
        self.assertEqual(degree(graph, 0, 'in'), 0)

    def test_weighted_mode(self):
        graph = DirectedGraph.from_edges(2, [(0, 1, 7)])
        self.assertEqual(degree(graph, 0, 'out', weighted=True), 7)
        self.assertEqual(degree(graph, 0, 'out'), 1)

    def test_unknown_node(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        with self.assertRaises(NodeNotFound):
            degree(graph, 9)

    def test_degree_sums_match_edge_count(self):
        rng = np.random.default_rng(3)
        graph = random_digraph(rng, 15, 0.3)
        self.assertEqual(degree_vector(graph, 'out').sum(), graph.n_edges)
        self.assertEqual(degree_vector(graph, 'in').sum(), graph.n_edges)


class ReachableCountTests(SimpleTestCase):
    def test_examples(self):
        path = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        self.assertEqual(reachable_count(path, 0), 2)
        self.assertEqual(reachable_count(DirectedGraph.from_edges(1, []), 0), 0)
        cycle = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        self.assertEqual(reachable_count(cycle, 1), 2)


class ClosenessTests(SimpleTestCase):
    def test_path(self):
        graph = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        scores = closeness_centrality(graph)
        self.assertAlmostEqual(scores[0], 2 / 3, places=12)
        self.assertEqual(scores[2], 0.0)

    def test_complete_digraph(self):
        graph = DirectedGraph.from_edges(4, list(permutations(range(4), 2)))
        np.testing.assert_allclose(closeness_centrality(graph), np.ones(4))

    def test_empty_graph_rejected(self):
        with self.assertRaises(ValueError):
            closeness_centrality(DirectedGraph.from_edges(0, []))

    def test_matches_all_pairs_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            graph = random_digraph(rng, int(rng.integers(2, 13)), 0.3)
            np.testing.assert_allclose(closeness_centrality(graph), brute_force_closeness(graph), rtol=0, atol=1e-12)

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(5)
        graph = random_digraph(rng, 10, 0.3)
        perm = rng.permutation(10)
        relabeled = DirectedGraph.from_edges(10, [(int(perm[s]), int(perm[t])) for s, t, _ in graph.edges()])
        np.testing.assert_allclose(closeness_centrality(relabeled)[perm], closeness_centrality(graph), atol=1e-12)


class BetweennessTests(SimpleTestCase):
    def test_path(self):
        graph = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        self.assertEqual(betweenness_centrality(graph).tolist(), [0.0, 1.0, 0.0])

    def test_complete_digraph(self):
        graph = DirectedGraph.from_edges(4, list(permutations(range(4), 2)))
        self.assertEqual(betweenness_centrality(graph).tolist(), [0.0] * 4)

    def test_directed_four_cycle(self):
        # each node lies on the only path of 3 ordered pairs
        graph = DirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        self.assertEqual(betweenness_centrality(graph).tolist(), [3.0] * 4)
        np.testing.assert_allclose(brute_force_betweenness(graph), [3.0] * 4)

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(2022)
        for _ in range(200):
            graph = random_digraph(rng, int(rng.integers(2, 13)), 0.3)
            np.testing.assert_allclose(betweenness_centrality(graph), brute_force_betweenness(graph), rtol=0, atol=1e-9)

    def test_matches_networkx(self):
        rng = np.random.default_rng(8)
        graph = random_digraph(rng, 30, 0.1)
        reference = nx.DiGraph()
        reference.add_nodes_from(range(30))
        reference.add_edges_from((s, t) for s, t, _ in graph.edges())
        expected = nx.betweenness_centrality(reference, normalized=False)
        np.testing.assert_allclose(betweenness_centrality(graph), [expected[v] for v in range(30)], atol=1e-9)

    def test_thread_count_does_not_change_results(self):
        rng = np.random.default_rng(99)
        graph = random_digraph(rng, 150, 0.03)
        np.testing.assert_array_equal(betweenness_centrality(graph, threads=1), betweenness_centrality(graph, threads=3))
        np.testing.assert_array_equal(closeness_centrality(graph, threads=1), closeness_centrality(graph, threads=3))


class CentralityTableTests(SimpleTestCase):
    def test_columns_must_align_with_keys(self):
        with self.assertRaises(ValueError):
            CentralityTable(keys=['a', 'b'], in_degree=[0], out_degree=[0, 0], closeness=[0, 0], betweenness=[0, 0])

    def test_unknown_column(self):
        table = CentralityTable(keys=['a'], in_degree=[0], out_degree=[0], closeness=[0], betweenness=[0])
        with self.assertRaises(ValueError):
            table.column('pagerank')
