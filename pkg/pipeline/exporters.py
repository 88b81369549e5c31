"""
Artifact writers and run manifests.

Every writer produces the same bytes for the same input: JSON keys are
sorted, floats are written with ``repr`` and CSV rows end in a bare newline.
"""
import csv
import hashlib
import json
import logging
import os
from importlib import metadata

from django.core.exceptions import ValidationError

import geosna
from geo.hexgrid import CellId
from graph_core.centrality import CentralityTable

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ('Django', 'numpy', 'scipy', 'shapely')

CSV_COLUMNS = {
    'in_degree': 'in_deg',
    'out_degree': 'out_deg',
    'closeness': 'closeness',
    'betweenness': 'betweenness',
}


def number(value):
    """Integral floats as integers, everything else round-trippable."""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def write_json(path, data):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fout:
        json.dump(data, fout, sort_keys=True, indent=2)
        fout.write("\n")
    return path


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as fout:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_csv(path):
    with open(path, newline='', encoding='utf-8') as fin:
        reader = csv.reader(fin)
        header = next(reader, None)
        return header, [row for row in reader if row]


def cell_feature(grid, cell, properties):
    ring = [[p.lon, p.lat] for p in grid.cell_polygon(cell)]
    return {
        'type': 'Feature',
        'properties': dict(properties, cell=str(cell)),
        'geometry': {'type': 'Polygon', 'coordinates': [ring]},
    }


def write_feature_collection(path, features):
    return write_json(path, {'type': 'FeatureCollection', 'features': list(features)})


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as fin:
        for chunk in iter(lambda: fin.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions():
    versions = {'geosna': geosna.__version__}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def _relative(path, root):
    return os.path.relpath(os.path.abspath(path), os.path.abspath(root)).replace(os.sep, '/')


def write_manifest(path, subcommand, root, inputs, outputs, parameters):
    """
    Describe one stage run: what it read and wrote (SHA-256 each), with
    which parameters and package versions. No timestamps, so identical runs
    give identical manifests.
    """
    manifest = {
        'subcommand': subcommand,
        'parameters': parameters,
        'versions': package_versions(),
        'inputs': {_relative(p, root): sha256_file(p) for p in sorted(set(inputs))},
        'outputs': {_relative(p, root): sha256_file(p) for p in sorted(set(outputs))},
    }
    write_json(path, manifest)
    logger.info('Manifest for %s written to %s', subcommand, path)
    return manifest


def write_centralities(path, table):
    header = ['cell'] + [CSV_COLUMNS[name] for name in CSV_COLUMNS]
    columns = [table.column(name) for name in CSV_COLUMNS]
    rows = (
        [str(key)] + [number(column[i]) for column in columns]
        for i, key in enumerate(table.keys)
    )
    return write_csv(path, header, rows)


def read_centralities(path):
    """Read ``centralities.csv`` back into a CentralityTable keyed by CellId."""
    if not os.path.isfile(path):
        raise ValidationError(f'Missing {path}; run the centrality stage first', code='missing_artifact')
    header, rows = read_csv(path)
    expected = ['cell'] + list(CSV_COLUMNS.values())
    if header != expected:
        raise ValidationError(f"{path}: expected header {','.join(expected)}", code="bad_header")
    try:
        keys = [CellId.parse(row[0]) for row in rows]
        columns = {name: [float(row[i + 1]) for row in rows] for i, name in enumerate(CSV_COLUMNS)}
    except (IndexError, ValueError) as exc:
        raise ValidationError(f'{path}: malformed centrality row', code='malformed_row') from exc
    return CentralityTable(keys=keys, metadata={'source': os.path.basename(path)}, **columns)
