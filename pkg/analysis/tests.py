from itertools import permutations

import numpy as np
from django.test import SimpleTestCase
from scipy.stats import spearmanr

from aggregate.cellnet import HEX, CellNetwork
from geo.geodesy import GeoPoint, haversine_km
from graph_core.centrality import CentralityTable
from graph_core.graph import DirectedGraph

from .bivariate import BivariateLevel, bivariate_bins, bivariate_levels
from .hotspots import HotSpotClass, classify, getis_ord_gi_star
from .louvain import community_country_distribution, community_sizes, louvain, modularity
from .spearman import spearman, spearman_matrix
from .suite import centrality_suite, value_distribution, zero_share


def cell_network(n, edges):
    keys = [f'c{i:02d}' for i in range(n)]
    return CellNetwork(kind=HEX, keys=keys, graph=DirectedGraph.from_edges(n, edges), cell_area_km2=100.0)


def clique(nodes):
    return list(permutations(nodes, 2))


def symmetric_weights(graph):
    n = graph.n_nodes
    w = np.zeros((n, n))
    for s, t, weight in graph.edges():
        w[s, t] += weight
    return w + w.T


def dense_modularity(graph, labels):
    a = symmetric_weights(graph)
    two_m = a.sum()
    k = a.sum(axis=1)
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    return float(((a - np.outer(k, k) / two_m) * same).sum() / two_m)


def set_partitions(n):
    """Every partition of n nodes as a restricted growth string, one per row."""
    labels = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        choices = top.astype(np.int64) + 2
        rows = np.repeat(np.arange(len(labels)), choices)
        starts = np.repeat(np.cumsum(choices) - choices, choices)
        label = (np.arange(len(rows)) - starts).astype(np.int8)
        labels = np.column_stack([labels[rows], label])
        top = np.maximum(top[rows], label)
    return labels


def exhaustive_best_partition(graph, chunk=200_000):
    a = symmetric_weights(graph)
    n = len(a)
    two_m = a.sum()
    k = a.sum(axis=1)
    i, j = np.nonzero(np.triu(a, 1))
    partitions = set_partitions(n)
    best_q, best = -np.inf, None
    for start in range(0, len(partitions), chunk):
        part = partitions[start:start + chunk]
        inside = a.trace() + ((part[:, i] == part[:, j]) * (2.0 * a[i, j])).sum(axis=1)
        degree_sums = np.zeros((len(part), n))
        rows = np.arange(len(part))
        for node in range(n):
            degree_sums[rows, part[:, node]] += k[node]
        q = inside / two_m - (degree_sums ** 2).sum(axis=1) / two_m ** 2
        top = int(np.argmax(q))
        if q[top] > best_q:
            best_q, best = float(q[top]), part[top]
    return len(partitions), best_q, best.tolist()


def growth_string(labels):
    first_seen = {}
    return [first_seen.setdefault(label, len(first_seen)) for label in np.asarray(labels).tolist()]


def gi_star_by_formula(values, centroids, k):
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    mean, std = values.mean(), values.std()
    z = np.zeros(n)
    for i in range(n):
        distances = [haversine_km(centroids[i], centroids[j]) if j != i else np.inf for j in range(n)]
        kth = sorted(distances)[k - 1]
        neighbours = [i] + [j for j in range(n) if distances[j] <= kth]
        w = len(neighbours)
        z[i] = (values[neighbours].sum() - mean * w) / (std * np.sqrt((n * w - w * w) / (n - 1)))
    return z


def lattice(size=10, spacing=0.1):
    return [GeoPoint(r * spacing, c * spacing) for r in range(size) for c in range(size)]


def line(n, seed=0):
    """Points along the equator with irregular gaps, so no two distances tie."""
    gaps = np.random.default_rng(seed).uniform(0.05, 0.15, n)
    return [GeoPoint(0.0, float(lon)) for lon in np.cumsum(gaps)]


class CentralitySuiteTests(SimpleTestCase):
    def setUp(self):
        self.net = cell_network(2, [(0, 0, 5), (0, 1, 2)])

    def test_self_loops_are_excluded(self):
        table = centrality_suite(self.net)
        self.assertEqual(table.out_degree.tolist(), [1, 0])
        self.assertEqual(table.in_degree.tolist(), [0, 1])
        self.assertEqual(table.closeness.tolist(), [1.0, 0.0])
        self.assertEqual(table.betweenness.tolist(), [0.0, 0.0])
        self.assertEqual(table.metadata, {'degree_mode': 'unweighted', 'self_loops': 'excluded'})

    def test_weighted_degrees(self):
        table = centrality_suite(self.net, weighted=True)
        self.assertEqual(table.out_degree.tolist(), [2, 0])
        self.assertEqual(table.metadata['degree_mode'], 'weighted')

    def test_empty_network_rejected(self):
        with self.assertRaises(ValueError):
            centrality_suite(cell_network(0, []))

    def test_zero_share(self):
        self.assertEqual(zero_share([0, 1, 0, 3]), 50.0)
        self.assertEqual(zero_share([]), 0.0)

    def test_value_distribution(self):
        summary = value_distribution([0, 0, 1, 2, 3, 4, 5, 6, 7, 8])
        self.assertEqual(list(summary), ['min', 'mean', 'p25', 'p50', 'p75', 'p90', 'p99', 'max', 'zero_share'])
        self.assertEqual(summary['min'], 0.0)
        self.assertEqual(summary['max'], 8.0)
        self.assertAlmostEqual(summary['p50'], 3.5)
        self.assertAlmostEqual(summary['p25'], 1.25)
        self.assertEqual(summary['zero_share'], 20.0)
        with self.assertRaises(ValueError):
            value_distribution([])


class SpearmanTests(SimpleTestCase):
    def test_perfect_inverse(self):
        self.assertAlmostEqual(spearman([1, 2, 3], [9, 4, 1]), -1.0, places=12)

    def test_ties_share_average_rank(self):
        self.assertAlmostEqual(spearman([1, 2, 2, 4], [10, 20, 20, 40]), 1.0, places=12)

    def test_matches_scipy_on_tied_data(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            x = rng.integers(0, 6, 40)
            y = x + rng.integers(0, 4, 40)
            self.assertAlmostEqual(spearman(x, y), spearmanr(x, y)[0], places=12)

    def test_constant_column_rejected(self):
        with self.assertRaisesMessage(ValueError, 'constant'):
            spearman([1, 1, 1], [1, 2, 3])

    def test_too_short(self):
        with self.assertRaises(ValueError):
            spearman([1, 2], [2, 1])

    def test_matrix_is_symmetric_with_unit_diagonal(self):
        rng = np.random.default_rng(3)
        table = CentralityTable(
            keys=list(range(30)),
            in_degree=rng.integers(0, 5, 30),
            out_degree=rng.integers(0, 5, 30),
            closeness=rng.random(30),
            betweenness=rng.integers(0, 3, 30) * rng.random(30),
        )
        names, matrix = spearman_matrix(table)
        self.assertEqual(names, ['in_degree', 'out_degree', 'closeness', 'betweenness'])
        np.testing.assert_array_equal(matrix, matrix.T)
        np.testing.assert_array_equal(np.diag(matrix), np.ones(4))
        self.assertAlmostEqual(matrix[0, 2], spearmanr(table.in_degree, table.closeness)[0], places=12)


class BivariateTests(SimpleTestCase):
    def test_levels(self):
        self.assertEqual(
            bivariate_levels([0, 1, 2, 3]),
            [BivariateLevel.LOW, BivariateLevel.MID, BivariateLevel.HIGH, BivariateLevel.HIGH],
        )
        self.assertEqual(bivariate_levels([0, 0]), [BivariateLevel.LOW] * 2)

    def test_counts_cover_all_nine_classes(self):
        bins = bivariate_bins([0, 1, 2, 3], [5, 0, 0, 5])
        counts = bins.counts()
        self.assertEqual(len(counts), 9)
        self.assertEqual(sum(counts.values()), 4)
        self.assertEqual(counts[(BivariateLevel.HIGH, BivariateLevel.LOW)], 1)
        self.assertEqual(counts[(BivariateLevel.HIGH, BivariateLevel.HIGH)], 1)

    def test_mid_and_high_differ_by_at_most_the_median_ties(self):
        rng = np.random.default_rng(8)
        for trial in range(300):
            values = rng.integers(0, 6, int(rng.integers(1, 40)))
            levels = bivariate_levels(values)
            nonzero = values[values != 0]
            ties = int(np.count_nonzero(nonzero == np.median(nonzero))) if len(nonzero) else 0
            mid = levels.count(BivariateLevel.MID)
            high = levels.count(BivariateLevel.HIGH)
            self.assertLessEqual(abs(mid - high), ties, values.tolist())

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            bivariate_bins([1, 2], [1])


class LouvainTests(SimpleTestCase):
    def test_single_clique_is_one_community(self):
        assignment, q = louvain(cell_network(5, clique(range(5))), seed=1)
        self.assertEqual(assignment.labels.tolist(), [1] * 5)
        self.assertAlmostEqual(q, 0.0, places=12)

    def test_two_cliques_split(self):
        edges = clique(range(6)) + clique(range(6, 12)) + [(5, 6)]
        net = cell_network(12, edges)
        assignment, q = louvain(net, seed=7)
        self.assertEqual(assignment.n_communities, 2)
        self.assertEqual(len(set(assignment.labels[:6].tolist())), 1)
        self.assertEqual(len(set(assignment.labels[6:].tolist())), 1)
        self.assertNotEqual(assignment.labels[0], assignment.labels[6])
        self.assertAlmostEqual(q, dense_modularity(net.graph, [0] * 6 + [1] * 6), places=12)

    def test_two_cliques_are_the_best_partition_of_all(self):
        edges = clique(range(6)) + clique(range(6, 12)) + [(5, 6)]
        net = cell_network(12, edges)
        count, best_q, best = exhaustive_best_partition(net.graph)
        self.assertEqual(count, 4_213_597)
        self.assertEqual(best, [0] * 6 + [1] * 6)
        assignment, q = louvain(net, seed=11)
        self.assertEqual(growth_string(assignment.labels), best)
        self.assertAlmostEqual(q, best_q, places=12)

    def test_never_worse_than_singletons(self):
        rng = np.random.default_rng(17)
        for trial in range(10):
            edges = [(int(s), int(t), int(w)) for s, t, w in zip(rng.integers(0, 25, 80), rng.integers(0, 25, 80), rng.integers(1, 4, 80))]
            net = cell_network(25, edges)
            assignment, q = louvain(net, seed=trial)
            self.assertGreaterEqual(q, modularity(net.graph, np.arange(25)) - 1e-12)
            self.assertAlmostEqual(q, dense_modularity(net.graph, assignment.labels), places=12)

    def test_same_seed_same_partition(self):
        rng = np.random.default_rng(5)
        edges = [(int(s), int(t)) for s, t in rng.integers(0, 40, (150, 2))]
        net = cell_network(40, edges)
        first, q1 = louvain(net, seed=42)
        second, q2 = louvain(net, seed=42)
        np.testing.assert_array_equal(first.labels, second.labels)
        self.assertEqual(q1, q2)

    def test_labels_ordered_by_size(self):
        edges = clique(range(3)) + clique(range(3, 8))
        assignment, _ = louvain(cell_network(8, edges), seed=0)
        self.assertEqual(community_sizes(assignment), [(1, 5), (2, 3)])
        self.assertEqual(assignment.community_of('c00'), 2)

    def test_edgeless_network_keeps_singletons(self):
        assignment, q = louvain(cell_network(3, []), seed=0)
        self.assertEqual(assignment.labels.tolist(), [1, 2, 3])
        self.assertEqual(q, 0.0)

    def test_empty_network_rejected(self):
        with self.assertRaises(ValueError):
            louvain(cell_network(0, []))

    def test_country_distribution(self):
        edges = clique(range(4))
        assignment, _ = louvain(cell_network(4, edges), seed=0)
        countries = {'c00': 'AT', 'c01': 'DE', 'c02': 'AT', 'c03': 'DE'}
        self.assertEqual(community_country_distribution(assignment, countries), {1: [('AT', 50.0), ('DE', 50.0)]})


class HotSpotTests(SimpleTestCase):
    def test_classification_thresholds(self):
        self.assertEqual(classify(1.645), HotSpotClass.HOT90)
        self.assertEqual(classify(1.64), HotSpotClass.NONSIG)
        self.assertEqual(classify(-1.96), HotSpotClass.COLD95)
        self.assertEqual(classify(-2.576), HotSpotClass.COLD99)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(31)
        centroids = [GeoPoint(float(lat), float(lon)) for lat, lon in zip(rng.uniform(40, 55, 100), rng.uniform(0, 20, 100))]
        values = rng.gamma(2.0, 3.0, 100)
        result = getis_ord_gi_star(values, centroids, 8)
        np.testing.assert_allclose(result.z, gi_star_by_formula(values, centroids, 8), rtol=0, atol=1e-9)

    def test_constant_field(self):
        result = getis_ord_gi_star(np.full(100, 4.0), lattice(), 8)
        self.assertEqual(result.z.tolist(), [0.0] * 100)
        self.assertEqual(result.counts()[HotSpotClass.NONSIG], 100)

    def test_constant_field_with_inexact_value(self):
        for value in (0.7, 0.1):
            result = getis_ord_gi_star(np.full(30, value), line(30), 3)
            self.assertEqual(result.z.tolist(), [0.0] * 30)
            self.assertEqual(result.counts()[HotSpotClass.NONSIG], 30)

    def test_affine_invariance(self):
        values = np.random.default_rng(2).random(100)
        base = getis_ord_gi_star(values, lattice(), 8)
        shifted = getis_ord_gi_star(3.0 * values + 7.0, lattice(), 8)
        np.testing.assert_allclose(shifted.z, base.z, atol=1e-9)

    def test_affine_invariance_on_random_fields(self):
        rng = np.random.default_rng(50)
        centroids = line(100, seed=4)
        for _ in range(50):
            values = rng.normal(0.0, 1.0, 100)
            scale, shift = rng.uniform(0.1, 10.0), rng.uniform(-50.0, 50.0)
            base = getis_ord_gi_star(values, centroids, 5)
            moved = getis_ord_gi_star(scale * values + shift, centroids, 5)
            np.testing.assert_allclose(moved.z, base.z, atol=1e-9)
            self.assertEqual(moved.classes, base.classes)

    def test_spike_on_a_line(self):
        values = np.zeros(100)
        values[50] = 100.0
        centroids = line(100, seed=1)
        result = getis_ord_gi_star(values, centroids, 3)
        np.testing.assert_allclose(result.z, gi_star_by_formula(values, centroids, 3), rtol=0, atol=1e-9)
        for i in (49, 50, 51):
            self.assertGreater(result.z[i], 0.0)
        for i in list(range(0, 40)) + list(range(61, 100)):
            self.assertLess(result.z[i], 0.0)

    def test_spike_is_hot(self):
        values = np.ones(100)
        for r in (4, 5, 6):
            for c in (4, 5, 6):
                values[r * 10 + c] = 100.0
        result = getis_ord_gi_star(values, lattice(), 8)
        self.assertEqual(result.classes[55], HotSpotClass.HOT99)
        self.assertEqual(result.classes[0], HotSpotClass.NONSIG)

    def test_k_validation(self):
        for k in (0, 100):
            with self.assertRaises(ValueError):
                getis_ord_gi_star(np.arange(100.0), lattice(), k)
        with self.assertRaises(ValueError):
            getis_ord_gi_star(np.arange(10.0), lattice(), 3)

    def test_thread_count_does_not_change_results(self):
        rng = np.random.default_rng(9)
        centroids = lattice(15)
        values = rng.random(225)
        np.testing.assert_array_equal(
            getis_ord_gi_star(values, centroids, 6, threads=1).z,
            getis_ord_gi_star(values, centroids, 6, threads=2).z,
        )
