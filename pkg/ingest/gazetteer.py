"""
Offline geocoding against a gazetteer table.

``gazetteer.tsv`` rows are ``location<TAB>lat<TAB>lon<TAB>precision``. The
precision column stands in for the feature type a geocoding service reports
(a city hit versus the centroid of a whole country or continent).
"""
import csv
import logging
from dataclasses import dataclass

from django.core.exceptions import ValidationError
from django.db import models

from geo.geodesy import GeoPoint

logger = logging.getLogger(__name__)


class Precision(models.TextChoices):
    POINT = 'point', 'Point'
    CITY = 'city', 'City'
    REGION = 'region', 'Region'
    COUNTRY = 'country', 'Country'
    CONTINENT = 'continent', 'Continent'


# Too coarse for regional connectivity
IMPRECISE = frozenset({Precision.COUNTRY, Precision.CONTINENT})


@dataclass(frozen=True)
class GeocodeResult:
    point: GeoPoint
    precision: Precision

    @property
    def is_precise(self):
        return self.precision not in IMPRECISE


def normalize_location(text):
    return str(text).strip().casefold()


class Gazetteer:
    def __init__(self, entries=None):
        self._entries = {}
        for location, result in (entries or {}).items():
            self.add(location, result)

    def add(self, location, result):
        key = normalize_location(location)
        if not key:
            raise ValueError('Gazetteer location must not be empty')
        self._entries[key] = result

    def __len__(self):
        return len(self._entries)

    def __contains__(self, location):
        return normalize_location(location) in self._entries

    def lookup(self, location):
        if location is None:
            return None
        return self._entries.get(normalize_location(location))

    @classmethod
    def load(cls, path):
        gazetteer = cls()
        precisions = set(Precision.values)
        with open(path, newline='', encoding='utf-8') as fin:
            reader = csv.reader(fin, delimiter="\t")
            for line_no, row in enumerate(reader, start=1):
                if not row or row[0].startswith('#'):
                    continue
                if len(row) != 4:
                    raise ValidationError(f'{path}: line {line_no}: expected 4 tab-separated fields', code='malformed_row')
                location, lat, lon, precision = (field.strip() for field in row)
                if line_no == 1 and location.lower() == 'location':
                    continue
                if precision not in precisions:
                    raise ValidationError(
                        f"{path}: line {line_no}: unknown precision '{precision}'", code="bad_precision",
                    )
                try:
                    point = GeoPoint(float(lat), float(lon))
                except ValueError as exc:
                    raise ValidationError(f'{path}: line {line_no}: {exc}', code='bad_coordinates') from exc
                gazetteer.add(location, GeocodeResult(point, Precision(precision)))
        logger.info('Loaded %d gazetteer entries from %s', len(gazetteer), path)
        return gazetteer

    def write(self, path):
        with open(path, 'w', newline='', encoding='utf-8') as fout:
            writer = csv.writer(fout, delimiter='\t', lineterminator='\n')
            writer.writerow(['location', 'lat', 'lon', 'precision'])
            for key in sorted(self._entries):
                result = self._entries[key]
                writer.writerow([key, repr(result.point.lat), repr(result.point.lon), result.precision.value])


def geocode(gazetteer, location):
    """Case-insensitive, whitespace-trimmed exact lookup; ``None`` on a miss."""
    return gazetteer.lookup(location)
