import math

import numpy as np
from django.test import SimpleTestCase
from scipy.stats import chisquare

from .geodesy import (
    EARTH_RADIUS_KM, BoundingBox, GeoPoint, destination_point, great_circle_path, haversine_km, haversine_km_arrays,
)
from .hexgrid import CellId, HexGrid, shoelace_area
from .histogram import fd_bin_width, fd_histogram

VIENNA = GeoPoint(48.2082, 16.3738)
BERLIN = GeoPoint(52.52, 13.405)


class GeoPointTests(SimpleTestCase):
    def test_longitude_wraps(self):
        self.assertEqual(GeoPoint(0, 190).lon, -170)
        self.assertEqual(GeoPoint(0, 180).lon, -180)

    def test_invalid_latitude(self):
        with self.assertRaises(ValueError):
            GeoPoint(91, 0)
        with self.assertRaises(ValueError):
            GeoPoint(float('nan'), 0)


class BoundingBoxTests(SimpleTestCase):
    def test_parse_and_inclusive_contains(self):
        bbox = BoundingBox.parse('34,72,-25,45')
        self.assertEqual((bbox.min_lat, bbox.max_lat, bbox.min_lon, bbox.max_lon), (34, 72, -25, 45))
        self.assertTrue(bbox.contains(GeoPoint(34, -25)))
        self.assertTrue(bbox.contains(VIENNA))
        self.assertFalse(bbox.contains(GeoPoint(33.9, 0)))

    def test_min_above_max_rejected(self):
        with self.assertRaises(ValueError):
            BoundingBox(10, 5, 0, 1)


class HaversineTests(SimpleTestCase):
    def test_identical_points(self):
        self.assertEqual(haversine_km(VIENNA, VIENNA), 0.0)

    def test_antipodal_on_equator(self):
        self.assertAlmostEqual(haversine_km(GeoPoint(0, 0), GeoPoint(0, 180)), math.pi * EARTH_RADIUS_KM, places=6)

    def test_vienna_berlin_against_spherical_cosines(self):
        phi1, phi2 = math.radians(VIENNA.lat), math.radians(BERLIN.lat)
        dlon = math.radians(BERLIN.lon - VIENNA.lon)
        central = math.acos(math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dlon))
        self.assertAlmostEqual(haversine_km(VIENNA, BERLIN), EARTH_RADIUS_KM * central, delta=0.1)
        self.assertAlmostEqual(haversine_km(VIENNA, BERLIN), haversine_km(BERLIN, VIENNA), places=9)

    def test_vectorised_matches_scalar(self):
        d = haversine_km_arrays([VIENNA.lat, 0.0], [VIENNA.lon, 0.0], [BERLIN.lat, 0.0], [BERLIN.lon, 90.0])
        self.assertAlmostEqual(d[0], haversine_km(VIENNA, BERLIN), places=9)
        self.assertAlmostEqual(d[1], math.pi / 2 * EARTH_RADIUS_KM, places=6)

    def test_destination_point_distance(self):
        target = destination_point(VIENNA, 45.0, 120.0)
        self.assertAlmostEqual(haversine_km(VIENNA, target), 120.0, places=6)

    def test_great_circle_path_ends(self):
        path = great_circle_path(VIENNA, BERLIN, segments=8)
        self.assertEqual(len(path), 9)
        self.assertAlmostEqual(path[0].lat, VIENNA.lat, places=9)
        self.assertAlmostEqual(path[-1].lon, BERLIN.lon, places=9)
        total = sum(haversine_km(a, b) for a, b in zip(path, path[1:]))
        self.assertAlmostEqual(total, haversine_km(VIENNA, BERLIN), places=6)


class HexGridTests(SimpleTestCase):
    def setUp(self):
        self.grid = HexGrid(80000)

    def test_invalid_area(self):
        with self.assertRaises(ValueError):
            HexGrid(0)

    def test_centroid_round_trip(self):
        for cell in (CellId(0, 0), CellId(3, -7), CellId(-12, 40), CellId(25, 10)):
            self.assertEqual(self.grid.cell_for_point(self.grid.cell_centroid(cell)), cell)

    def test_points_one_metre_apart_share_a_cell(self):
        start = self.grid.cell_centroid(CellId(5, 9))
        nearby = destination_point(start, 30.0, 0.001)
        self.assertEqual(self.grid.cell_for_point(start), self.grid.cell_for_point(nearby))

    def test_polygon_ring_and_area(self):
        for area in (100.0, 80000.0):
            grid = HexGrid(area)
            cell = CellId(2, -3)
            ring = grid.cell_polygon(cell)
            self.assertEqual(len(ring), 7)
            self.assertEqual(ring[0], ring[-1])
            xs, ys = grid.cell_vertices_xy(cell)
            self.assertAlmostEqual(shoelace_area(xs, ys) / area, 1.0, delta=0.001)

    def test_vertices_are_nearest_to_own_centre(self):
        grid = HexGrid(500)
        cell = CellId(4, 4)
        cx, cy = grid.center_xy(cell.row, cell.col)
        xs, ys = grid.cell_vertices_xy(cell)
        # pull each vertex slightly toward the centre
        rows, cols = grid.cells_for_xy(cx + 0.99 * (xs - cx), cy + 0.99 * (ys - cy))
        self.assertTrue(np.all(rows == 4) and np.all(cols == 4))

    def test_uniform_points_fill_interior_cells_evenly(self):
        rng = np.random.default_rng(12345)
        n = 1_000_000
        lat = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))
        lon = rng.uniform(-180.0, 180.0, n)
        rows, cols = self.grid.cells_for_arrays(lat, lon)
        cells, counts = np.unique(np.stack([rows, cols], axis=1), axis=0, return_counts=True)
        interior = np.array([self.grid.is_interior(CellId(int(r), int(c))) for r, c in cells])
        observed = counts[interior]
        self.assertGreater(len(observed), 1000)
        self.assertGreater(chisquare(observed).pvalue, 0.001)


class HistogramTests(SimpleTestCase):
    def test_freedman_diaconis_width(self):
        self.assertAlmostEqual(fd_bin_width(np.arange(1, 9)), 3.5, places=12)

    def test_histogram_bins_start_at_minimum(self):
        histogram = fd_histogram(np.arange(1, 9))
        self.assertEqual(histogram.edges[0], 1.0)
        self.assertAlmostEqual(float(histogram.shares.sum()), 1.0, places=12)
        self.assertGreaterEqual(histogram.edges[-1], 8.0)

    def test_scale_equivariance(self):
        samples = np.random.default_rng(4).gamma(2.0, 300.0, 500)
        self.assertAlmostEqual(fd_bin_width(samples * 3.0), 3.0 * fd_bin_width(samples), places=9)

    def test_degenerate_inputs(self):
        for samples in ([1.0], [2.0, 2.0, 2.0], [1.0, 1.0, 1.0, 1.0, 5.0]):
            with self.assertRaises(ValueError):
                fd_histogram(samples)

    def test_right_skewed_peak(self):
        samples = np.random.default_rng(6).lognormal(np.log(350.0), 0.8, 5000)
        histogram = fd_histogram(samples)
        self.assertLess(histogram.peak_center, float(np.mean(samples)))
