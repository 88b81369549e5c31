"""
Synthetic snowball crawl.

Starting from the seed users, every user on the current frontier receives
followers, level by level, for ``iterations`` levels. A follower's region
is the followed user's region with probability ``geo_homophily``; otherwise
another region of the same language, picked by population weight, with
probability ``language_share``; otherwise any region by population weight.
With probability ``reuse_probability`` the follower is an existing user of
that region instead of a new one, which closes cycles in the graph.

All randomness comes from one generator seeded with ``rng_seed``, so the
written files depend on nothing else.
"""
import json
import logging
import math
import os

import numpy as np

from geo.geodesy import GeoPoint, destination_point
from ingest.gazetteer import Gazetteer, GeocodeResult, Precision
from ingest.population import PopulationRaster
from ingest.records import RawUserRecord, write_edges, write_users

from .config import FollowerTier

logger = logging.getLogger(__name__)

RASTER_CELL_DEG = 1.0
PEOPLE_PER_WEIGHT = 1_000_000

# A real place name with no permanent population
FAKE_LOCATION = 'Bir Tawil'
FAKE_POINT = GeoPoint(21.87, 33.75)

UNRESOLVABLE_LOCATIONS = (
    'Earth', 'the internet', 'everywhere', 'somewhere over the rainbow',
    'Mars', 'in my head', 'wherever the wifi is', 'home',
)

MISSING = 'missing'
UNRESOLVABLE = 'unresolvable'
IMPRECISE = 'imprecise'
FAKE = 'fake'
PRECISE = 'precise'


def _place_name(region, i):
    return f'{region.id} {i + 1}'


def _sample_in_disc(rng, region):
    bearing = rng.uniform(0.0, 360.0)
    distance = region.radius_km * math.sqrt(rng.random())
    return destination_point(region.center, bearing, distance)


class SnowballGenerator:
    def __init__(self, config, regions):
        config.validate(regions)
        self.config = config
        self.regions = list(regions)
        self.by_id = {region.id: region for region in self.regions}
        self.rng = np.random.default_rng(config.rng_seed)
        self.places = {}
        self.users = []
        self.edges = []
        self._edge_set = set()
        self._users_in_region = {region.id: [] for region in self.regions}
        self._tiers = list(FollowerTier)
        weights = np.array([config.tier_weights[t] for t in self._tiers], dtype=np.float64)
        self._tier_p = weights / weights.sum()

    # ---- drawing ----
    def _weighted_region(self, candidates):
        weights = np.array([r.weight for r in candidates], dtype=np.float64)
        return candidates[int(self.rng.choice(len(candidates), p=weights / weights.sum()))]

    def _follower_region(self, home):
        if self.rng.random() < self.config.geo_homophily:
            return home
        same_language = [r for r in self.regions if r.language == home.language and r.id != home.id]
        if same_language and self.rng.random() < self.config.language_share:
            return self._weighted_region(same_language)
        return self._weighted_region(self.regions)

    def _draw_tier(self):
        return self._tiers[int(self.rng.choice(len(self._tiers), p=self._tier_p))]

    def _follower_count(self, tier):
        low, high = self.config.tier_ranges[tier]
        followers = math.exp(self.rng.uniform(math.log(low), math.log(high)))
        return int(round(followers * self.config.follower_sample))

    def _location(self, region, place):
        c = self.config
        u = self.rng.random()
        if u < c.missing_share:
            return MISSING, ''
        u -= c.missing_share
        if u < c.unresolvable_share:
            return UNRESOLVABLE, UNRESOLVABLE_LOCATIONS[int(self.rng.integers(len(UNRESOLVABLE_LOCATIONS)))]
        u -= c.unresolvable_share
        if u < c.imprecise_share:
            return IMPRECISE, region.country
        u -= c.imprecise_share
        if u < c.fake_share:
            return FAKE, FAKE_LOCATION
        return PRECISE, place[0]

    # ---- building ----
    def _build_places(self):
        for region in self.regions:
            self.places[region.id] = [
                (_place_name(region, i), _sample_in_disc(self.rng, region))
                for i in range(self.config.places_per_region)
            ]

    def _new_user(self, region, tier, depth):
        places = self.places[region.id]
        place = places[int(self.rng.integers(len(places)))]
        kind, location = self._location(region, place)
        user = {
            'user_id': f'u{len(self.users) + 1:06d}',
            'region': region.id,
            'country': region.country,
            'language': region.language,
            'tier': tier.value,
            'depth': depth,
            'place': place[0],
            'lat': place[1].lat,
            'lon': place[1].lon,
            'location': location,
            'location_kind': kind,
        }
        self.users.append(user)
        self._users_in_region[region.id].append(len(self.users) - 1)
        return len(self.users) - 1

    def _link(self, followed, follower):
        key = (followed, follower)
        if followed == follower or key in self._edge_set:
            return False
        self._edge_set.add(key)
        self.edges.append(key)
        return True

    def _follower_for(self, followed, region, depth):
        pool = self._users_in_region[region.id]
        if pool and self.rng.random() < self.config.reuse_probability:
            candidate = pool[int(self.rng.integers(len(pool)))]
            if self._link(followed, candidate):
                return None
        follower = self._new_user(region, self._draw_tier(), depth)
        self._link(followed, follower)
        return follower

    def run(self):
        self._build_places()
        frontier = [
            self._new_user(self.by_id[seed.region], seed.tier, 0)
            for seed in self.config.seeds
        ]
        for depth in range(1, self.config.iterations + 1):
            next_frontier = []
            for followed in frontier:
                user = self.users[followed]
                home = self.by_id[user['region']]
                for _ in range(self._follower_count(FollowerTier(user['tier']))):
                    follower = self._follower_for(followed, self._follower_region(home), depth)
                    if follower is not None:
                        next_frontier.append(follower)
            logger.info('Snowball level %d: %d new users, %d edges so far', depth, len(next_frontier), len(self.edges))
            frontier = next_frontier
        return self

    # ---- output ----
    def gazetteer(self):
        gazetteer = Gazetteer()
        for region in self.regions:
            for name, point in self.places[region.id]:
                gazetteer.add(name, GeocodeResult(point, Precision.CITY))
            gazetteer.add(region.country, GeocodeResult(region.center, Precision.COUNTRY))
        gazetteer.add(FAKE_LOCATION, GeocodeResult(FAKE_POINT, Precision.POINT))
        return gazetteer

    def population(self):
        raster = PopulationRaster(RASTER_CELL_DEG)
        for region in self.regions:
            share = int(round(region.weight * PEOPLE_PER_WEIGHT / self.config.places_per_region))
            for _, point in self.places[region.id]:
                raster.set(point.lat, point.lon, raster.population_at(point) + max(1, share))
        return raster

    def ground_truth(self):
        within = sum(1 for s, t in self.edges if self.users[s]['region'] == self.users[t]['region'])
        return {
            'rng_seed': self.config.rng_seed,
            'n_users': len(self.users),
            'n_edges': len(self.edges),
            'within_region_share': within / len(self.edges) if self.edges else 0.0,
            'language_groups': {r.id: r.language for r in self.regions},
            'regions': {
                r.id: {
                    'country': r.country, 'language': r.language, 'lat': r.center.lat,
                    'lon': r.center.lon, 'radius_km': r.radius_km, 'weight': r.weight,
                }
                for r in self.regions
            },
            'users': self.users,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        ids = [user['user_id'] for user in self.users]
        write_users([RawUserRecord(user['user_id'], user['location']) for user in self.users],
                    os.path.join(out_dir, 'users.csv'))
        write_edges(sorted((ids[s], ids[t]) for s, t in self.edges), os.path.join(out_dir, 'edges.csv'))
        self.gazetteer().write(os.path.join(out_dir, 'gazetteer.tsv'))
        self.population().write(os.path.join(out_dir, 'population.tsv'))
        with open(os.path.join(out_dir, 'ground_truth.json'), 'w', encoding='utf-8') as fout:
            json.dump(self.ground_truth(), fout, sort_keys=True, indent=2)
            fout.write("\n")
        logger.info('Wrote synthetic network with %d users and %d edges to %s', len(self.users), len(self.edges), out_dir)


def generate(config, regions, out_dir):
    """Generate and write the five input files; returns the generator for inspection."""
    generator = SnowballGenerator(config, regions).run()
    generator.write(out_dir)
    return generator
