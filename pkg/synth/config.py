"""Snowball generator settings and the regions users are drawn from."""
import json
import logging
from dataclasses import dataclass, field

from django.core.exceptions import ValidationError
from django.db import models

from geo.geodesy import GeoPoint

logger = logging.getLogger(__name__)


class FollowerTier(models.TextChoices):
    FEW = 'few', 'Fewer than 500 followers'
    MEDIUM = 'medium', '500 to 5,000 followers'
    MANY = 'many', 'More than 5,000 followers'


DEFAULT_TIER_RANGES = {
    FollowerTier.FEW: (10, 500),
    FollowerTier.MEDIUM: (500, 5000),
    FollowerTier.MANY: (5000, 50000),
}
DEFAULT_TIER_WEIGHTS = {
    FollowerTier.FEW: 0.9,
    FollowerTier.MEDIUM: 0.09,
    FollowerTier.MANY: 0.01,
}


@dataclass(frozen=True)
class Region:
    id: str
    center: GeoPoint
    radius_km: float
    weight: float
    country: str
    language: str

    def __post_init__(self):
        if not self.id:
            raise ValueError('Region id must not be empty')
        if not self.weight > 0:
            raise ValueError(f"Region '{self.id}' weight must be positive, got {self.weight}")
        if not self.radius_km > 0:
            raise ValueError(f"Region '{self.id}' radius must be positive, got {self.radius_km}")


@dataclass(frozen=True)
class Seed:
    region: str
    tier: FollowerTier


@dataclass
class SnowballConfig:
    seeds: list
    iterations: int = 2
    tier_ranges: dict = field(default_factory=lambda: dict(DEFAULT_TIER_RANGES))
    tier_weights: dict = field(default_factory=lambda: dict(DEFAULT_TIER_WEIGHTS))
    follower_sample: float = 0.025
    reuse_probability: float = 0.3
    geo_homophily: float = 0.45
    language_share: float = 0.8
    places_per_region: int = 12
    missing_share: float = 0.45
    unresolvable_share: float = 0.10
    imprecise_share: float = 0.13
    fake_share: float = 0.005
    rng_seed: int = 0

    def validate(self, regions):
        if not regions:
            raise ValidationError('At least one region is required', code='no_regions')
        if not self.seeds:
            raise ValidationError('At least one seed user is required', code='no_seeds')
        ids = [region.id for region in regions]
        if len(set(ids)) != len(ids):
            raise ValidationError('Region ids must be unique', code='duplicate_region')
        for seed in self.seeds:
            if seed.region not in ids:
                raise ValidationError(f"Seed references unknown region '{seed.region}'", code="unknown_region")
        if self.iterations < 0:
            raise ValidationError(f'iterations must be >= 0, got {self.iterations}', code='bad_parameter')
        if self.places_per_region < 1:
            raise ValidationError('places_per_region must be >= 1', code='bad_parameter')
        for name in ('follower_sample', 'reuse_probability', 'geo_homophily', 'language_share',
                     'missing_share', 'unresolvable_share', 'imprecise_share', 'fake_share'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f'{name} must lie in [0, 1], got {value}', code='bad_parameter')
        if self.missing_share + self.unresolvable_share + self.imprecise_share + self.fake_share > 1.0:
            raise ValidationError('Location shares add up to more than 1', code='bad_parameter')
        for tier in FollowerTier:
            if tier not in self.tier_ranges or tier not in self.tier_weights:
                raise ValidationError(f"Tier '{tier.value}' needs a range and a weight", code="bad_parameter")
            low, high = self.tier_ranges[tier]
            if not 0 < low < high:
                raise ValidationError(f"Tier '{tier.value}' range must satisfy 0 < low < high", code="bad_parameter")
        if sum(self.tier_weights.values()) <= 0:
            raise ValidationError('Tier weights must not all be zero', code='bad_parameter')

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        try:
            seeds = [Seed(s['region'], FollowerTier(s['tier'])) for s in data.pop('seeds', [])]
            regions = [
                Region(
                    id=r['id'],
                    center=GeoPoint(float(r['lat']), float(r['lon'])),
                    radius_km=float(r['radius_km']),
                    weight=float(r['weight']),
                    country=r['country'],
                    language=r['language'],
                )
                for r in data.pop('regions', [])
            ]
            if 'tier_ranges' in data:
                data['tier_ranges'] = {FollowerTier(k): tuple(v) for k, v in data['tier_ranges'].items()}
            if 'tier_weights' in data:
                data['tier_weights'] = {FollowerTier(k): float(v) for k, v in data['tier_weights'].items()}
            config = cls(seeds=seeds, **data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f'Invalid snowball configuration: {exc}', code='bad_config') from exc
        config.validate(regions)
        return config, regions

    @classmethod
    def load(cls, path):
        """Read ``(config, regions)`` from a JSON file."""
        try:
            with open(path, encoding='utf-8') as fin:
                data = json.load(fin)
        except FileNotFoundError as exc:
            raise ValidationError(f'Snowball configuration {path} does not exist', code='missing_file') from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f'{path}: invalid JSON: {exc}', code='bad_config') from exc
        config, regions = cls.from_dict(data)
        logger.info('Loaded snowball configuration with %d seeds and %d regions from %s', len(config.seeds), len(regions), path)
        return config, regions
