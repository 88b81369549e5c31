import os
import tempfile

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from geo.geodesy import GeoPoint

from .filters import STAGES, filter_and_build
from .gazetteer import Gazetteer, GeocodeResult, Precision, geocode
from .network import read_user_network, write_user_network
from .population import PopulationRaster
from .records import RawUserRecord, load_edges, load_users, write_edges, write_users


def write_text(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as fout:
        fout.write(text)
    return path


def small_world():
    gazetteer = Gazetteer({
        'Vienna': GeocodeResult(GeoPoint(48.2, 16.37), Precision.CITY),
        'Graz': GeocodeResult(GeoPoint(47.07, 15.44), Precision.CITY),
        'Austria': GeocodeResult(GeoPoint(47.5, 14.5), Precision.COUNTRY),
        'Bir Tawil': GeocodeResult(GeoPoint(21.87, 33.75), Precision.POINT),
    })
    population = PopulationRaster(1.0)
    population.set(48.2, 16.37, 1_900_000)
    population.set(47.07, 15.44, 290_000)
    return gazetteer, population


def table_one_fixture():
    """
    1662 users (913 located, 812 geocodable over 160 unique places, 85
    unresolvable strings) and 4323 unique edges, 1182 of them between
    geocodable users.
    """
    gazetteer = Gazetteer()
    population = PopulationRaster(1.0)
    for i in range(160):
        point = GeoPoint(46.0 + (i % 10) * 0.4, 5.0 + (i // 10) * 0.5)
        gazetteer.add(f'place {i}', GeocodeResult(point, Precision.CITY))
        population.set(point.lat, point.lon, 1000)

    users = [RawUserRecord(f'u{i:04d}', f'place {i % 160}') for i in range(812)]
    users += [RawUserRecord(f'u{i:04d}', f'nowhere {(i - 812) % 85}') for i in range(812, 913)]
    users += [RawUserRecord(f'u{i:04d}', None) for i in range(913, 1662)]
    geocodable = [u.user_id for u in users[:812]]
    others = [u.user_id for u in users[812:]]

    inner = []
    for a in range(812):
        inner.append((geocodable[a], geocodable[(a + 1) % 812]))
        inner.append((geocodable[a], geocodable[(a + 2) % 812]))
    outer = []
    for a in range(850):
        outer.append((others[a], geocodable[a % 812]))
        outer.append((others[a], others[(a + 1) % 850]))
        outer.append((others[a], geocodable[(a + 5) % 812]))
        outer.append((others[a], others[(a + 3) % 850]))
    return users, inner[:1182] + outer[:3141], gazetteer, population


class RecordLoaderTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_load_users(self):
        path = write_text(self.tmp.name, 'users.csv', "user_id,location\na,Vienna\nb,\n")
        users = load_users(path)
        self.assertEqual(users, [RawUserRecord('a', 'Vienna'), RawUserRecord('b', None)])

    def test_malformed_user_row_names_line(self):
        path = write_text(self.tmp.name, 'users.csv', "user_id,location\na,Vienna\n,Graz\n")
        with self.assertRaisesMessage(ValidationError, 'line 3'):
            load_users(path)

    def test_duplicate_user_id(self):
        path = write_text(self.tmp.name, 'users.csv', "user_id,location\na,Vienna\na,Graz\n")
        with self.assertRaisesMessage(ValidationError, 'duplicate user_id'):
            load_users(path)

    def test_wrong_header(self):
        path = write_text(self.tmp.name, 'users.csv', "id,place\na,Vienna\n")
        with self.assertRaises(ValidationError):
            load_users(path)

    def test_repeated_edges_collapse(self):
        path = write_text(self.tmp.name, 'edges.csv', "src,dst\na,b\na,b\nb,a\n")
        self.assertEqual(load_edges(path), [('a', 'b'), ('b', 'a')])

    def test_self_follow_is_malformed(self):
        path = write_text(self.tmp.name, 'edges.csv', "src,dst\na,b\nc,c\n")
        with self.assertRaisesMessage(ValidationError, 'line 3'):
            load_edges(path)

    def test_empty_edge_file(self):
        path = write_text(self.tmp.name, 'edges.csv', "src,dst\n")
        self.assertEqual(load_edges(path), [])

    def test_writers_round_trip(self):
        users = [RawUserRecord('a', 'Vienna'), RawUserRecord('b', None)]
        write_users(users, os.path.join(self.tmp.name, 'users.csv'))
        write_edges([('a', 'b')], os.path.join(self.tmp.name, 'edges.csv'))
        self.assertEqual(load_users(os.path.join(self.tmp.name, 'users.csv')), users)
        self.assertEqual(load_edges(os.path.join(self.tmp.name, 'edges.csv')), [('a', 'b')])


class GazetteerTests(SimpleTestCase):
    def test_lookup_is_case_and_space_insensitive(self):
        gazetteer, _ = small_world()
        self.assertEqual(geocode(gazetteer, '  vIENNA ').precision, Precision.CITY)
        self.assertIsNone(geocode(gazetteer, 'Atlantis'))
        self.assertIsNone(geocode(gazetteer, None))

    def test_interior_whitespace_must_match(self):
        gazetteer, _ = small_world()
        self.assertEqual(geocode(gazetteer, 'bir tawil').precision, Precision.POINT)
        self.assertIsNone(geocode(gazetteer, 'Bir  Tawil'))

    def test_load_tsv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, 'gazetteer.tsv', "location\tlat\tlon\tprecision\nVienna\t48.2\t16.37\tcity\n")
            gazetteer = Gazetteer.load(path)
        self.assertEqual(gazetteer.lookup('vienna').point, GeoPoint(48.2, 16.37))

    def test_unknown_precision(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, 'gazetteer.tsv', "Vienna\t48.2\t16.37\ttown\n")
            with self.assertRaisesMessage(ValidationError, 'unknown precision'):
                Gazetteer.load(path)


class PopulationRasterTests(SimpleTestCase):
    def test_outside_coverage_is_unpopulated(self):
        _, population = small_world()
        self.assertTrue(population.is_populated(GeoPoint(48.7, 16.9)))
        self.assertFalse(population.is_populated(GeoPoint(21.87, 33.75)))

    def test_write_and_load(self):
        _, population = small_world()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'population.tsv')
            population.write(path)
            loaded = PopulationRaster.load(path)
        self.assertEqual(loaded.population_at(GeoPoint(48.2, 16.37)), 1_900_000)
        self.assertEqual(len(loaded), 2)

    def test_missing_cellsize_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, 'population.tsv', "lat,lon,count\n48,16,10\n")
            with self.assertRaises(ValidationError):
                PopulationRaster.load(path)


class FilterTests(SimpleTestCase):
    def test_filter_order_and_edge_survival(self):
        gazetteer, population = small_world()
        users = [
            RawUserRecord('vie', 'Vienna'),
            RawUserRecord('grz', 'graz'),
            RawUserRecord('none', None),
            RawUserRecord('lost', 'Atlantis'),
            RawUserRecord('coarse', 'Austria'),
            RawUserRecord('fake', 'Bir Tawil'),
        ]
        edges = [('vie', 'grz'), ('grz', 'vie'), ('vie', 'coarse'), ('fake', 'vie'), ('ghost', 'vie')]
        net, stats = filter_and_build(users, edges, gazetteer, population)

        self.assertEqual(net.user_ids, ['vie', 'grz'])
        self.assertEqual(set(net.edge_id_pairs()), {('vie', 'grz'), ('grz', 'vie')})
        self.assertEqual(
            [stats.users.counts[s] for s in STAGES], [6, 5, 4, 3, 2],
        )
        self.assertEqual(stats.edges.counts['total'], 5)
        self.assertEqual(stats.edges.counts['after_filters'], 2)

    def test_stats_are_monotone_and_consistent(self):
        net, stats = filter_and_build(*table_one_fixture())
        for row in (stats.users, stats.edges, stats.locations):
            counts = [row.counts[s] for s in STAGES]
            self.assertEqual(counts, sorted(counts, reverse=True))
        self.assertEqual(stats.users_after_filters, net.n_users)
        self.assertEqual(stats.edges_after_filters, net.n_edges)

    def test_table_one_percentages(self):
        _, stats = filter_and_build(*table_one_fixture())
        report = stats.as_dict()
        self.assertEqual(report['users']['total']['count'], 1662)
        self.assertEqual(report['users']['with_location']['percent'], 54.93)
        self.assertEqual(report['users']['geocoded']['percent'], 48.86)
        self.assertEqual(report['edges']['total']['count'], 4323)
        self.assertEqual(report['edges']['after_filters']['count'], 1182)
        self.assertEqual(report['edges']['after_filters']['percent'], 27.34)
        self.assertEqual(report['locations']['with_location']['count'], 245)
        self.assertEqual(report['locations']['geocoded']['percent'], 65.31)

    def test_idempotent(self):
        users, edges, gazetteer, population = table_one_fixture()
        net, _ = filter_and_build(users, edges, gazetteer, population)
        again, stats = filter_and_build(*net.to_records(), gazetteer, population)
        self.assertEqual(again.user_ids, net.user_ids)
        self.assertEqual(again.graph, net.graph)
        self.assertEqual(stats.users.percent('after_filters'), 100.0)

    def test_user_network_files_round_trip(self):
        gazetteer, population = small_world()
        net, _ = filter_and_build(
            [RawUserRecord('vie', 'Vienna'), RawUserRecord('grz', 'Graz')], [('vie', 'grz')], gazetteer, population,
        )
        with tempfile.TemporaryDirectory() as tmp:
            write_user_network(net, tmp)
            loaded = read_user_network(tmp)
        self.assertEqual(loaded.user_ids, net.user_ids)
        self.assertEqual(loaded.points, net.points)
        self.assertEqual(loaded.graph, net.graph)

    def test_reading_without_ingest_fails(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaisesMessage(ValidationError, 'run the ingest stage first'):
                read_user_network(tmp)
