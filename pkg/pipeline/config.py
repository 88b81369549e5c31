"""
Pipeline configuration.

Values come from three layers: command-line flags override the JSON config
file, which overrides the ``GEOSNA_*`` settings. Relative paths in a config
file are resolved against the file's own directory. Input files the user
does not name default to the synth stage's output under ``<output_dir>/synth``.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

from django.conf import settings
from django.core.exceptions import ValidationError

from geo.geodesy import BoundingBox

logger = logging.getLogger(__name__)

INPUT_FILES = {
    'users': 'users.csv',
    'edges': 'edges.csv',
    'gazetteer': 'gazetteer.tsv',
    'population': 'population.tsv',
}
PATH_FIELDS = ('users', 'edges', 'gazetteer', 'population', 'countries', 'snowball', 'output_dir')


def _defaults():
    return {
        'output_dir': settings.GEOSNA_OUTPUT_DIR,
        'global_cell_area_km2': settings.GEOSNA_GLOBAL_CELL_AREA_KM2,
        'aoi_cell_area_km2': settings.GEOSNA_AOI_CELL_AREA_KM2,
        'aoi_bbox': settings.GEOSNA_AOI_BBOX,
        'gistar_k': settings.GEOSNA_GISTAR_K,
        'louvain_seed': settings.GEOSNA_LOUVAIN_SEED,
        'top_k': settings.GEOSNA_TOP_K_FLOWS,
        'weighted_degree': settings.GEOSNA_WEIGHTED_DEGREE,
        'threads': settings.GEOSNA_THREADS,
        'origin_country': settings.GEOSNA_ORIGIN_COUNTRY,
    }


@dataclass
class PipelineConfig:
    output_dir: str
    global_cell_area_km2: float
    aoi_cell_area_km2: float
    aoi_bbox: BoundingBox
    gistar_k: int
    louvain_seed: int
    top_k: int
    weighted_degree: bool
    threads: int
    origin_country: str
    users: Optional[str] = None
    edges: Optional[str] = None
    gazetteer: Optional[str] = None
    population: Optional[str] = None
    countries: Optional[str] = None
    snowball: Optional[str] = None

    def __post_init__(self):
        for name, filename in INPUT_FILES.items():
            if getattr(self, name) is None:
                setattr(self, name, os.path.join(self.synth_dir, filename))
        self.validate_numbers()

    @property
    def synth_dir(self):
        return os.path.join(self.output_dir, 'synth')

    @property
    def aoi_dir(self):
        return os.path.join(self.output_dir, 'aoi')

    def scope_dir(self, scope):
        return self.aoi_dir if scope == 'aoi' else self.output_dir

    def cell_area(self, scope):
        return self.aoi_cell_area_km2 if scope == 'aoi' else self.global_cell_area_km2

    def validate_numbers(self):
        for name in ('global_cell_area_km2', 'aoi_cell_area_km2', 'gistar_k', 'top_k', 'threads'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ValidationError(f'{name} must be a positive number, got {value!r}', code='bad_parameter')
        if not isinstance(self.louvain_seed, int) or self.louvain_seed < 0:
            raise ValidationError(f'louvain_seed must be a non-negative integer, got {self.louvain_seed!r}', code='bad_parameter')
        if not self.origin_country:
            raise ValidationError('origin_country must not be empty', code='bad_parameter')

    def require(self, *names):
        """Fail unless every named input file exists."""
        for name in names:
            path = getattr(self, name)
            if not path:
                raise ValidationError(f"No '{name}' file configured", code="missing_file")
            if not os.path.isfile(path):
                raise ValidationError(f'Configured {name} file {path} does not exist', code='missing_file')

    def parameters(self):
        """JSON-ready view for run manifests."""
        values = asdict(self)
        values['aoi_bbox'] = self.aoi_bbox.as_text()
        values.pop('threads')
        return values

    @classmethod
    def build(cls, path=None, overrides=None):
        values = _defaults()
        if path:
            values.update(_read_file(path))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"Unknown configuration keys: {', '.join(unknown)}", code="bad_config")
        bbox = values['aoi_bbox']
        if not isinstance(bbox, BoundingBox):
            try:
                values['aoi_bbox'] = BoundingBox.parse(str(bbox))
            except ValueError as exc:
                raise ValidationError(f"Invalid aoi_bbox '{bbox}': {exc}", code="bad_parameter") from exc
        config = cls(**values)
        logger.debug('Pipeline configuration: %s', config.parameters())
        return config


def _read_file(path):
    try:
        with open(path, encoding='utf-8') as fin:
            data = json.load(fin)
    except FileNotFoundError as exc:
        raise ValidationError(f'Config file {path} does not exist', code='missing_file') from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f'{path}: invalid JSON: {exc}', code='bad_config') from exc
    if not isinstance(data, dict):
        raise ValidationError(f'{path}: expected a JSON object', code='bad_config')
    base = os.path.dirname(os.path.abspath(path))
    for name in PATH_FIELDS:
        if data.get(name) and not os.path.isabs(data[name]):
            data[name] = os.path.normpath(os.path.join(base, data[name]))
    return data
