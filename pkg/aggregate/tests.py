import os
import tempfile

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from geo.geodesy import BoundingBox, GeoPoint
from geo.hexgrid import CellId, HexGrid
from graph_core.graph import DirectedGraph
from ingest.gazetteer import Precision
from ingest.network import UserNetwork

from .cellnet import COUNTRY, HEX, CellNetwork, aggregate_to_countries, aggregate_to_grid, dominant_countries, subnetwork_by_bbox
from .container import MAGIC, decode_cell_network, encode_cell_network, read_cell_network, write_cell_network
from .countries import UNASSIGNED, CountryPolygons
from .flows import OTHER, Flow, bucket_other, cell_flow_lines, chord_matrix, outflow_table, top_k_flows, within_share

VIENNA = GeoPoint(48.2, 16.37)
BERLIN = GeoPoint(52.52, 13.405)
COUNTRIES_PATH = os.path.join(settings.BASE_DIR, 'fixtures', 'countries.geojson')


def user_network(points, edges):
    n = len(points)
    return UserNetwork(
        graph=DirectedGraph.from_edges(n, edges),
        user_ids=[f'u{i}' for i in range(n)],
        locations=[f'place {i}' for i in range(n)],
        points=list(points),
        precisions=[Precision.CITY] * n,
    )


def square(code, lon0, lat0, size=1.0, population=1000):
    ring = [[lon0, lat0], [lon0 + size, lat0], [lon0 + size, lat0 + size], [lon0, lat0 + size], [lon0, lat0]]
    return {
        'type': 'Feature',
        'properties': {'code': code, 'population': population},
        'geometry': {'type': 'Polygon', 'coordinates': [ring]},
    }


def collection(*features):
    return {'type': 'FeatureCollection', 'features': list(features)}


def country_network(edges, codes=('A', 'B', 'C')):
    index = {code: i for i, code in enumerate(codes)}
    graph = DirectedGraph.from_edges(len(codes), [(index[s], index[t], w) for s, t, w in edges])
    return CellNetwork(kind=COUNTRY, keys=list(codes), graph=graph)


class GridAggregationTests(SimpleTestCase):
    def setUp(self):
        self.grid = HexGrid(1000)
        # three users in Vienna, two in Berlin
        points = [VIENNA] * 3 + [BERLIN] * 2
        edges = [(0, 1), (1, 2), (0, 3), (3, 2), (4, 3)]
        self.net = user_network(points, edges)

    def test_two_cells(self):
        cell_net = aggregate_to_grid(self.net, self.grid)
        vienna = self.grid.cell_for_point(VIENNA)
        berlin = self.grid.cell_for_point(BERLIN)
        self.assertEqual(cell_net.kind, HEX)
        self.assertEqual(cell_net.cell_area_km2, 1000)
        self.assertEqual(cell_net.n_cells, 2)
        self.assertEqual(cell_net.node_weight(vienna), 3)
        self.assertEqual(cell_net.node_weight(berlin), 2)
        self.assertEqual(cell_net.edge_weight(vienna, vienna), 2)
        self.assertEqual(cell_net.edge_weight(vienna, berlin), 1)
        self.assertEqual(cell_net.edge_weight(berlin, vienna), 1)
        self.assertEqual(cell_net.edge_weight(berlin, berlin), 1)

    def test_users_and_edges_are_conserved(self):
        rng = np.random.default_rng(7)
        points = [GeoPoint(float(lat), float(lon)) for lat, lon in zip(rng.uniform(35, 70, 300), rng.uniform(-20, 40, 300))]
        edges = {(int(s), int(t)) for s, t in rng.integers(0, 300, (1500, 2)) if s != t}
        net = user_network(points, sorted(edges))
        cell_net = aggregate_to_grid(net, HexGrid(80000))
        self.assertEqual(cell_net.total_users, net.n_users)
        self.assertEqual(cell_net.total_edges, net.n_edges)

    def test_user_order_does_not_matter(self):
        perm = [4, 2, 0, 3, 1]
        inverse = {old: new for new, old in enumerate(perm)}
        points = [self.net.points[old] for old in perm]
        edges = [(inverse[s], inverse[t]) for s, t, _ in self.net.graph.edges()]
        shuffled = user_network(points, edges)
        self.assertEqual(aggregate_to_grid(shuffled, self.grid), aggregate_to_grid(self.net, self.grid))

    def test_empty_network(self):
        cell_net = aggregate_to_grid(UserNetwork.empty(), self.grid)
        self.assertEqual(cell_net.n_cells, 0)
        self.assertEqual(cell_net.total_edges, 0)


class SubnetworkTests(SimpleTestCase):
    def test_bbox_keeps_inside_users_and_their_edges(self):
        points = [VIENNA, BERLIN, GeoPoint(40.7, -74.0), GeoPoint(34.0, -25.0)]
        net = user_network(points, [(0, 1), (1, 2), (2, 0), (3, 0)])
        sub = subnetwork_by_bbox(net, BoundingBox.parse('34,72,-25,45'))
        self.assertEqual(sub.user_ids, ['u0', 'u1', 'u3'])
        self.assertEqual(sorted(sub.edge_id_pairs()), [('u0', 'u1'), ('u3', 'u0')])

    def test_filtering_commutes_with_grid_aggregation(self):
        grid = HexGrid(1000)
        bbox = BoundingBox.parse('45,60,0,20')
        cities = [VIENNA, BERLIN, GeoPoint(48.85, 2.35), GeoPoint(40.42, -3.7), GeoPoint(41.9, 12.5), GeoPoint(40.7, -74.0)]
        for city in cities:
            ring = grid.cell_polygon(grid.cell_for_point(city))
            # no cell straddles the bbox edge
            self.assertEqual(len({bbox.contains(vertex) for vertex in ring}), 1)

        rng = np.random.default_rng(13)
        points = [cities[i % len(cities)] for i in range(60)]
        edges = {(int(s), int(t)) for s, t in rng.integers(0, 60, (400, 2)) if s != t}
        net = user_network(points, sorted(edges))

        filtered_first = aggregate_to_grid(subnetwork_by_bbox(net, bbox), grid)
        full = aggregate_to_grid(net, grid)
        inside = [key for key in full.keys if bbox.contains(grid.cell_centroid(key))]
        self.assertEqual(len(inside), 3)
        self.assertEqual(filtered_first.keys, inside)
        self.assertEqual([filtered_first.node_weight(key) for key in inside], [full.node_weight(key) for key in inside])
        self.assertEqual(
            sorted(filtered_first.weighted_edges()),
            sorted((s, t, w) for s, t, w in full.weighted_edges() if s in inside and t in inside),
        )


class CountryPolygonTests(SimpleTestCase):
    def test_fixture_assigns_vienna_to_austria(self):
        polygons = CountryPolygons.load(COUNTRIES_PATH)
        self.assertEqual(polygons.country_for_point(VIENNA), 'AT')
        self.assertEqual(polygons.country_for_point(GeoPoint(0, 0)), UNASSIGNED)
        self.assertEqual(polygons.populations['LI'], 39000)

    def test_shared_border_goes_to_first_code(self):
        polygons = CountryPolygons.from_geojson(collection(square('BB', 0, 0), square('AA', 1, 0)))
        self.assertEqual(polygons.country_for_point(GeoPoint(0.5, 1.0)), 'AA')
        self.assertEqual(polygons.country_for_point(GeoPoint(0.5, 0.5)), 'BB')

    def test_self_intersecting_ring_rejected(self):
        bowtie = square('XX', 0, 0)
        bowtie['geometry']['coordinates'] = [[[0, 0], [1, 1], [1, 0], [0, 1], [0, 0]]]
        with self.assertRaisesMessage(ValidationError, 'invalid ring'):
            CountryPolygons.from_geojson(collection(bowtie))

    def test_missing_population_rejected(self):
        feature = square('XX', 0, 0)
        del feature['properties']['population']
        with self.assertRaises(ValidationError):
            CountryPolygons.from_geojson(collection(feature))

    def test_country_aggregation_keeps_unassigned_unit(self):
        polygons = CountryPolygons.from_geojson(collection(square('AA', 0, 0), square('BB', 2, 0)))
        points = [GeoPoint(0.5, 0.5), GeoPoint(0.5, 2.5), GeoPoint(0.5, 5.5)]
        country_net = aggregate_to_countries(user_network(points, [(0, 1), (2, 0)]), polygons)
        self.assertEqual(country_net.keys, ['AA', 'BB', UNASSIGNED])
        self.assertEqual(country_net.edge_weight(UNASSIGNED, 'AA'), 1)
        self.assertEqual([f.src for f in top_k_flows(country_net, 5)], ['AA'])

    def test_dominant_country_of_cells(self):
        polygons = CountryPolygons.from_geojson(collection(square('AA', -1, -1), square('BB', 0, -1)))
        grid = HexGrid(80000)
        # all three sit near the centre of cell 0:0
        points = [GeoPoint(0.05, -0.1), GeoPoint(0.05, 0.1), GeoPoint(-0.05, 0.2), GeoPoint(60.0, 100.0)]
        dominant = dominant_countries(user_network(points, []), grid, polygons)
        self.assertEqual(dominant[CellId(0, 0)], 'BB')
        self.assertEqual(dominant[grid.cell_for_point(points[3])], UNASSIGNED)


class FlowTests(SimpleTestCase):
    def setUp(self):
        self.net = country_network([('A', 'A', 50), ('A', 'B', 20), ('B', 'A', 20), ('C', 'B', 10)])

    def test_top_k_orders_and_breaks_ties(self):
        flows = top_k_flows(self.net, 3)
        self.assertEqual([(f.src, f.dst, f.weight) for f in flows], [('A', 'A', 50), ('A', 'B', 20), ('B', 'A', 20)])
        self.assertAlmostEqual(flows[0].pct, 50.0)

    def test_top_k_must_be_positive(self):
        with self.assertRaises(ValueError):
            top_k_flows(self.net, 0)

    def test_within_share(self):
        self.assertAlmostEqual(within_share(self.net), 50.0)

    def test_outflow_raw_and_normalized(self):
        net = country_network([('A', 'A', 30), ('A', 'B', 10)], codes=('A', 'B'))
        raw = outflow_table(net, 'A')
        self.assertEqual([code for code, _ in raw], ['A', 'B'])
        self.assertAlmostEqual(raw[0][1], 75.0)
        self.assertAlmostEqual(raw[1][1], 25.0)

        normalized = outflow_table(net, 'A', {'A': 1_000_000, 'B': 100_000}, normalized=True)
        self.assertEqual(normalized[0][0], 'B')
        self.assertAlmostEqual(normalized[0][1], 76.92, places=2)
        self.assertAlmostEqual(normalized[1][1], 23.08, places=2)

        rescaled = outflow_table(net, 'A', {'A': 7_000_000, 'B': 700_000}, normalized=True)
        for (code, pct), (other_code, other_pct) in zip(normalized, rescaled):
            self.assertEqual(code, other_code)
            self.assertAlmostEqual(pct, other_pct, places=12)

    def test_outflow_three_countries_by_hand(self):
        net = country_network(
            [('A', 'A', 60), ('A', 'B', 30), ('A', 'C', 10), ('A', UNASSIGNED, 40), ('B', 'A', 5)],
            codes=('A', 'B', 'C', UNASSIGNED),
        )
        self.assertEqual(outflow_table(net, 'A'), [('A', 60.0), ('B', 30.0), ('C', 10.0)])

        populations = {'A': 6_000_000, 'B': 1_000_000, 'C': 500_000}
        normalized = outflow_table(net, 'A', populations, normalized=True)
        self.assertEqual([code for code, _ in normalized], ['B', 'C', 'A'])
        for (_, pct), expected in zip(normalized, (50.0, 100.0 / 3, 100.0 / 6)):
            self.assertAlmostEqual(pct, expected, places=12)

        tripled = outflow_table(net, 'A', {code: 3 * pop for code, pop in populations.items()}, normalized=True)
        for (_, pct), (_, other) in zip(normalized, tripled):
            self.assertAlmostEqual(pct, other, places=12)

    def test_outflow_errors(self):
        with self.assertRaisesMessage(ValidationError, "'ZZ'"):
            outflow_table(self.net, 'ZZ')
        with self.assertRaisesMessage(ValidationError, "'B'"):
            outflow_table(self.net, 'A', {'A': 10}, normalized=True)

    def test_bucket_other(self):
        rows = [('A', 50.0), ('B', 30.0), ('C', 15.0), ('D', 5.0)]
        self.assertEqual(bucket_other(rows, 2), [('A', 50.0), ('B', 30.0), (OTHER, 20.0)])
        self.assertEqual(bucket_other(rows, 10), rows)

    def test_chord_matrix(self):
        chord = chord_matrix([Flow('A', 'B', 20, 40.0), Flow('B', 'A', 5, 10.0), Flow('A', 'A', 25, 50.0)])
        self.assertEqual(chord['codes'], ['A', 'B'])
        self.assertEqual(chord['matrix'], [[25, 20], [5, 0]])

    def test_cell_flow_lines_skip_self_loops(self):
        grid = HexGrid(1000)
        vienna, berlin = grid.cell_for_point(VIENNA), grid.cell_for_point(BERLIN)
        keys = sorted([vienna, berlin])
        graph = DirectedGraph.from_edges(2, [(0, 0, 9), (0, 1, 3), (1, 0, 1)])
        lines = cell_flow_lines(CellNetwork(kind=HEX, keys=keys, graph=graph, cell_area_km2=1000), grid, segments=4)
        self.assertEqual([f['properties']['weight'] for f in lines['features']], [3, 1])
        self.assertEqual(len(lines['features'][0]['geometry']['coordinates']), 5)


class ContainerTests(SimpleTestCase):
    def setUp(self):
        keys = [CellId(-3, 4), CellId(0, 0), CellId(2, 7)]
        graph = DirectedGraph.from_edges(3, [(0, 0, 4), (0, 2, 1), (2, 1, 6)], node_weights=[5, 1, 3])
        self.hex_net = CellNetwork(kind=HEX, keys=keys, graph=graph, cell_area_km2=100.0)
        self.country_net = country_network([('A', 'B', 2), ('C', 'C', 1)])

    def test_round_trip_through_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            for cell_net in (self.hex_net, self.country_net):
                path = os.path.join(tmp, f'{cell_net.kind}.gsna')
                write_cell_network(cell_net, path)
                self.assertEqual(read_cell_network(path), cell_net)

    def test_starts_with_magic(self):
        self.assertTrue(encode_cell_network(self.hex_net).startswith(MAGIC))

    def test_rejects_corrupt_buffers(self):
        payload = encode_cell_network(self.hex_net)
        kind_flipped = payload[:5] + bytes([1]) + payload[6:]
        for buffer in (b'GSNA2' + payload[5:], payload[:-3], payload + b'\x00', kind_flipped, b'GS'):
            with self.assertRaises(ValidationError):
                decode_cell_network(buffer)

    def test_missing_file(self):
        with self.assertRaisesMessage(ValidationError, 'run the aggregate stage first'):
            read_cell_network(os.path.join(tempfile.gettempdir(), 'no-such-network.gsna'))
