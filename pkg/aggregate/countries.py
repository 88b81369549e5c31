"""
Country polygons and populations from a GeoJSON FeatureCollection.

Each feature carries ``code`` (country code) and ``population`` properties.
Containment counts the boundary as inside; when polygons overlap, the
first code in sorted order wins.
"""
import json
import logging

import numpy as np
import shapely
from django.core.exceptions import ValidationError
from shapely.errors import GEOSException
from shapely.geometry import shape
from shapely.validation import explain_validity

logger = logging.getLogger(__name__)

UNASSIGNED = 'unassigned'


class CountryPolygons:
    def __init__(self, geometries, populations):
        self.codes = sorted(geometries)
        self.geometries = {code: geometries[code] for code in self.codes}
        self.populations = dict(populations)
        for geometry in self.geometries.values():
            shapely.prepare(geometry)

    def __len__(self):
        return len(self.codes)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as fin:
            data = json.load(fin)
        return cls.from_geojson(data, source=path)

    @classmethod
    def from_geojson(cls, data, source='<geojson>'):
        if data.get('type') != 'FeatureCollection':
            raise ValidationError(f'{source}: expected a GeoJSON FeatureCollection', code='bad_geojson')
        geometries, populations = {}, {}
        for i, feature in enumerate(data.get('features', [])):
            props = feature.get('properties') or {}
            code = props.get('code')
            if not code:
                raise ValidationError(f"{source}: feature {i} has no 'code' property", code="bad_geojson")
            if code in geometries:
                raise ValidationError(f"{source}: duplicate country code '{code}'", code="duplicate_country")
            population = props.get('population')
            if not isinstance(population, (int, float)) or population <= 0:
                raise ValidationError(f"{source}: country '{code}' needs a positive population", code="bad_population")
            try:
                geometry = shape(feature['geometry'])
            except (KeyError, TypeError, ValueError, GEOSException) as exc:
                raise ValidationError(f"{source}: country '{code}' has an unreadable geometry: {exc}", code="bad_geometry") from exc
            if geometry.geom_type not in ('Polygon', 'MultiPolygon'):
                raise ValidationError(f"{source}: country '{code}' is a {geometry.geom_type}, not a polygon", code="bad_geometry")
            if not geometry.is_valid:
                raise ValidationError(
                    f"{source}: country '{code}' has an invalid ring: {explain_validity(geometry)}", code="bad_geometry",
                )
            geometries[code] = geometry
            populations[code] = population
        logger.info('Loaded %d country polygons from %s', len(geometries), source)
        return cls(geometries, populations)

    def assign_arrays(self, lat, lon):
        """Country code per point, ``UNASSIGNED`` where no polygon covers it."""
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        points = shapely.points(lon, lat)
        result = np.full(len(lat), UNASSIGNED, dtype=object)
        open_mask = np.ones(len(lat), dtype=bool)
        for code in self.codes:
            if not open_mask.any():
                break
            hits = shapely.covers(self.geometries[code], points) & open_mask
            result[hits] = code
            open_mask &= ~hits
        return result.tolist()

    def country_for_point(self, point):
        return self.assign_arrays([point.lat], [point.lon])[0]
