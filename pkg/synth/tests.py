import os
import tempfile
from collections import deque

from django.conf import settings
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from sklearn.metrics import homogeneity_score

from aggregate.cellnet import aggregate_to_grid, cells_of_users
from analysis.louvain import louvain
from geo.geodesy import GeoPoint
from geo.hexgrid import HexGrid
from ingest.filters import filter_and_build
from ingest.gazetteer import Gazetteer
from ingest.population import PopulationRaster
from ingest.records import load_edges, load_users

from .config import FollowerTier, Region, Seed, SnowballConfig
from .generator import PRECISE, SnowballGenerator, generate

OUTPUT_FILES = ('users.csv', 'edges.csv', 'gazetteer.tsv', 'population.tsv', 'ground_truth.json')
SMALL_TIERS = {FollowerTier.FEW: (3, 6), FollowerTier.MEDIUM: (6, 10), FollowerTier.MANY: (10, 20)}


def regions():
    return [
        Region('alpha', GeoPoint(48.2, 16.4), 50.0, 2.0, 'AT', 'de'),
        Region('beta', GeoPoint(52.5, 13.4), 80.0, 8.0, 'DE', 'de'),
        Region('gamma', GeoPoint(40.0, -100.0), 300.0, 30.0, 'US', 'en'),
    ]


def small_config(**overrides):
    values = {
        'seeds': [Seed('alpha', FollowerTier.MEDIUM), Seed('gamma', FollowerTier.FEW)],
        'iterations': 2,
        'tier_ranges': dict(SMALL_TIERS),
        'follower_sample': 1.0,
        'places_per_region': 5,
        'rng_seed': 11,
    }
    values.update(overrides)
    return SnowballConfig(**values)


def ingest_directory(directory):
    return filter_and_build(
        load_users(os.path.join(directory, 'users.csv')),
        load_edges(os.path.join(directory, 'edges.csv')),
        Gazetteer.load(os.path.join(directory, 'gazetteer.tsv')),
        PopulationRaster.load(os.path.join(directory, 'population.tsv')),
    )


class SnowballConfigTests(SimpleTestCase):
    def test_fixture_loads(self):
        config, loaded = SnowballConfig.load(os.path.join(settings.BASE_DIR, 'fixtures', 'snowball.json'))
        self.assertEqual(len(config.seeds), 5)
        self.assertEqual({r.country for r in loaded}, {'AT', 'DE', 'CH', 'US', 'GB'})

    def test_unknown_seed_region(self):
        config = small_config(seeds=[Seed('delta', FollowerTier.FEW)])
        with self.assertRaisesMessage(ValidationError, 'delta'):
            config.validate(regions())

    def test_location_shares_over_one(self):
        config = small_config(missing_share=0.7, unresolvable_share=0.4)
        with self.assertRaises(ValidationError):
            config.validate(regions())

    def test_bad_tier_range(self):
        config = small_config(tier_ranges={**SMALL_TIERS, FollowerTier.FEW: (6, 3)})
        with self.assertRaises(ValidationError):
            config.validate(regions())

    def test_from_dict_missing_region_field(self):
        data = {'seeds': [{'region': 'a', 'tier': 'few'}], 'regions': [{'id': 'a', 'lat': 1, 'lon': 2}]}
        with self.assertRaisesMessage(ValidationError, 'Invalid snowball configuration'):
            SnowballConfig.from_dict(data)

    def test_region_needs_positive_weight(self):
        with self.assertRaises(ValueError):
            Region('x', GeoPoint(0, 0), 10.0, 0.0, 'XX', 'xx')


class SnowballGeneratorTests(SimpleTestCase):
    def test_zero_iterations_yields_only_seeds(self):
        generator = SnowballGenerator(small_config(iterations=0), regions()).run()
        self.assertEqual(len(generator.users), 2)
        self.assertEqual(generator.edges, [])
        self.assertEqual([u['depth'] for u in generator.users], [0, 0])

    def test_reruns_are_byte_identical(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            generate(small_config(), regions(), first)
            generate(small_config(), regions(), second)
            for name in OUTPUT_FILES:
                with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                    self.assertEqual(a.read(), b.read(), name)

    def test_everyone_reachable_from_seeds(self):
        generator = SnowballGenerator(small_config(iterations=3), regions()).run()
        followers = {}
        for followed, follower in generator.edges:
            followers.setdefault(followed, []).append(follower)
        seen = {i for i, u in enumerate(generator.users) if u['depth'] == 0}
        queue = deque(seen)
        while queue:
            node = queue.popleft()
            for other in followers.get(node, []):
                if other not in seen:
                    seen.add(other)
                    queue.append(other)
        self.assertEqual(len(seen), len(generator.users))
        self.assertLessEqual(max(u['depth'] for u in generator.users), 3)

    def test_full_homophily_keeps_edges_in_region(self):
        generator = SnowballGenerator(small_config(geo_homophily=1.0), regions()).run()
        self.assertGreater(len(generator.edges), 0)
        self.assertEqual(generator.ground_truth()['within_region_share'], 1.0)

    def test_ground_truth_matches_gazetteer(self):
        generator = SnowballGenerator(small_config(), regions()).run()
        gazetteer = generator.gazetteer()
        for user in generator.users:
            if user['location_kind'] == PRECISE:
                self.assertEqual(gazetteer.lookup(user['location']).point, GeoPoint(user['lat'], user['lon']))

    def test_ingest_keeps_exactly_the_precise_users(self):
        with tempfile.TemporaryDirectory() as tmp:
            generator = generate(small_config(iterations=3), regions(), tmp)
            net, stats = ingest_directory(tmp)
        precise = {u['user_id'] for u in generator.users if u['location_kind'] == PRECISE}
        self.assertEqual(set(net.user_ids), precise)
        self.assertEqual(stats.users.counts['total'], len(generator.users))

    def test_communities_never_mix_regions_without_cross_edges(self):
        config = small_config(
            iterations=3, geo_homophily=1.0, missing_share=0.0, unresolvable_share=0.0,
            imprecise_share=0.0, fake_share=0.0,
        )
        with tempfile.TemporaryDirectory() as tmp:
            generator = generate(config, regions(), tmp)
            net, _ = ingest_directory(tmp)
        grid = HexGrid(100)
        cell_net = aggregate_to_grid(net, grid)
        assignment, _ = louvain(cell_net, seed=3)

        region_of_user = {u['user_id']: u['region'] for u in generator.users}
        region_of_cell = {}
        for uid, cell in zip(net.user_ids, cells_of_users(net, grid)):
            region_of_cell[cell] = region_of_user[uid]
        truth = [region_of_cell[cell] for cell in cell_net.keys]
        self.assertEqual(homogeneity_score(truth, assignment.labels.tolist()), 1.0)
