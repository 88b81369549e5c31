"""
Pipeline stages behind ``manage.py gsna``.

Stages communicate only through files in the output directory, so running
one stage on stored artifacts gives the same result as the fused ``report``
run. Global-scope artifacts live in ``<output_dir>``, the area-of-interest
subnetwork and its artifacts in ``<output_dir>/aoi``.
"""
import logging
import os
import sys
from dataclasses import dataclass, field

from django.core.exceptions import ValidationError
from django.db import DatabaseError

from aggregate.cellnet import aggregate_to_countries, aggregate_to_grid, dominant_countries, subnetwork_by_bbox
from aggregate.container import read_cell_network, write_cell_network
from aggregate.countries import CountryPolygons
from aggregate.flows import (
    bucket_other, cell_flow_lines, chord_matrix, outflow_table, top_k_flows, within_share,
)
from analysis.bivariate import bivariate_bins
from analysis.hotspots import getis_ord_gi_star
from analysis.louvain import community_country_distribution, community_sizes, louvain
from analysis.spearman import spearman_matrix
from analysis.suite import centrality_suite, value_distribution, zero_share
from geo.geodesy import BoundingBox
from geo.hexgrid import HexGrid
from geo.histogram import fd_histogram
from graph_core.centrality import COLUMNS
from ingest.filters import filter_and_build
from ingest.gazetteer import Gazetteer
from ingest.network import EDGES_FILE, USERS_FILE, read_user_network, write_user_network
from ingest.population import PopulationRaster
from ingest.records import load_edges, load_users
from synth.config import SnowballConfig
from synth.generator import generate

from . import exporters
from .config import PipelineConfig
from .models import PipelineRun

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 64

SCOPES = ('global', 'aoi')
DEFAULT_PAIR = 'betweenness:out_degree'
DEFAULT_HOTSPOT_VALUES = 'closeness'
REPORT_HOTSPOT_VALUES = ('closeness', 'betweenness')
USER_COUNT = 'users'

CELLS_FILE = 'cells.gsna'
COUNTRIES_FILE = 'countries.gsna'
CENTRALITIES_FILE = 'centralities.csv'

SUBCOMMANDS = {
    'synth': 'generate a synthetic snowball network from the snowball config',
    'ingest': 'geocode, filter and account users and edges (ingest_stats.json)',
    'aggregate': 'collapse users onto hex cells (--grid) and/or countries (--countries)',
    'subnet': 'cut the area-of-interest subnetwork (--bbox)',
    'centrality': 'in/out degree, closeness and betweenness per cell',
    'spearman': 'Spearman matrix of the centrality columns',
    'bivariate': 'low/mid/high classes for a centrality pair (--pair a:b)',
    'communities': 'Louvain communities and their spread over countries',
    'hotspots': 'Getis-Ord Gi* hot spots (--values, --k)',
    'flows': 'top country flows, chord matrix, outflow table and flow lines',
    'histogram': 'Freedman-Diaconis histogram of edge lengths',
    'report': 'run every analysis stage and bundle the results in report.json',
}


def usage():
    lines = ['usage: manage.py gsna <subcommand> [options]', '', 'subcommands:']
    lines += [f'  {name:<12} {text}' for name, text in SUBCOMMANDS.items()]
    return "\n".join(lines)


@dataclass
class StageRun:
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def merge(self, other):
        self.inputs.extend(other.inputs)
        self.outputs.extend(other.outputs)


class Pipeline:
    def __init__(self, config, flags=None):
        self.config = config
        self.flags = dict(flags or {})
        self.scope = self.flags.get('scope') or 'global'
        if self.scope not in SCOPES:
            raise ValidationError(f"Unknown scope '{self.scope}', expected global or aoi", code="bad_parameter")

    @property
    def directory(self):
        return self.config.scope_dir(self.scope)

    def path(self, name):
        return os.path.join(self.directory, name)

    def scoped(self, scope, **flags):
        return Pipeline(self.config, dict(self.flags, scope=scope, **flags))

    @property
    def hotspot_values(self):
        return self.flags.get('values') or DEFAULT_HOTSPOT_VALUES

    def hotspots_name(self):
        if self.hotspot_values == DEFAULT_HOTSPOT_VALUES:
            return 'hotspots'
        return f'hotspots_{self.hotspot_values}'

    def manifest_path(self, name):
        if name == 'hotspots':
            name = self.hotspots_name()
        if name == 'synth':
            directory = self.config.synth_dir
        elif name in ('ingest', 'report'):
            directory = self.config.output_dir
        elif name == 'subnet':
            directory = self.config.aoi_dir
        else:
            directory = self.directory
        return os.path.join(directory, f'manifest_{name}.json')

    def execute(self, name):
        run = getattr(self, f'run_{name}')()
        parameters = {'config': self.config.parameters(), 'flags': _json_flags(self.flags), 'scope': self.scope}
        exporters.write_manifest(
            self.manifest_path(name), name, self.config.output_dir, run.inputs, run.outputs, parameters,
        )
        return run

    # ---- shared readers ----
    def _user_files(self, directory=None):
        directory = directory or self.directory
        return [os.path.join(directory, USERS_FILE), os.path.join(directory, EDGES_FILE)]

    def _cells(self):
        return read_cell_network(self.path(CELLS_FILE))

    def _centralities(self, cells):
        table = exporters.read_centralities(self.path(CENTRALITIES_FILE))
        if table.keys != cells.keys:
            raise ValidationError(
                f'{self.path(CENTRALITIES_FILE)} does not match {self.path(CELLS_FILE)}; rerun the centrality stage',
                code='stale_artifact',
            )
        return table

    def _polygons(self):
        self.config.require('countries')
        return CountryPolygons.load(self.config.countries)

    @staticmethod
    def _grid_of(cells):
        return HexGrid(cells.cell_area_km2)

    # ---- stages ----
    def run_synth(self):
        self.config.require('snowball')
        snowball, regions = SnowballConfig.load(self.config.snowball)
        generator = generate(snowball, regions, self.config.synth_dir)
        outputs = [self.config.users, self.config.edges, self.config.gazetteer, self.config.population,
                   os.path.join(self.config.synth_dir, 'ground_truth.json')]
        return StageRun(
            inputs=[self.config.snowball],
            outputs=outputs,
            summary={'users': len(generator.users), 'edges': len(generator.edges)},
        )

    def run_ingest(self):
        c = self.config
        c.require('users', 'edges', 'gazetteer', 'population')
        net, stats = filter_and_build(
            load_users(c.users), load_edges(c.edges), Gazetteer.load(c.gazetteer), PopulationRaster.load(c.population),
        )
        write_user_network(net, c.output_dir)
        stats_path = exporters.write_json(os.path.join(c.output_dir, 'ingest_stats.json'), stats.as_dict())
        return StageRun(
            inputs=[c.users, c.edges, c.gazetteer, c.population],
            outputs=[stats_path] + self._user_files(c.output_dir),
            summary=stats.as_dict(),
        )

    def run_subnet(self):
        text = self.flags.get('bbox')
        try:
            bbox = BoundingBox.parse(text) if text else self.config.aoi_bbox
        except ValueError as exc:
            raise ValidationError(f"Invalid --bbox '{text}': {exc}", code="bad_parameter") from exc
        net = read_user_network(self.config.output_dir)
        sub = subnetwork_by_bbox(net, bbox)
        write_user_network(sub, self.config.aoi_dir)
        return StageRun(
            inputs=self._user_files(self.config.output_dir),
            outputs=self._user_files(self.config.aoi_dir),
            summary={'bbox': bbox.as_text(), 'users': sub.n_users, 'edges': sub.n_edges},
        )

    def run_aggregate(self):
        want_countries = bool(self.flags.get('countries'))
        want_grid = bool(self.flags.get('grid')) or not want_countries
        net = read_user_network(self.directory)
        run = StageRun(inputs=self._user_files(), summary={'users': net.n_users, 'edges': net.n_edges})
        if want_grid:
            cells = aggregate_to_grid(net, HexGrid(self.config.cell_area(self.scope)))
            write_cell_network(cells, self.path(CELLS_FILE))
            run.outputs.append(self.path(CELLS_FILE))
            run.summary['cells'] = cells.n_cells
        if want_countries:
            countries = aggregate_to_countries(net, self._polygons())
            write_cell_network(countries, self.path(COUNTRIES_FILE))
            run.inputs.append(self.config.countries)
            run.outputs.append(self.path(COUNTRIES_FILE))
            run.summary['countries'] = countries.n_cells
        return run

    def run_centrality(self):
        cells = self._cells()
        table = centrality_suite(cells, weighted=self.config.weighted_degree, threads=self.config.threads)
        path = exporters.write_centralities(self.path(CENTRALITIES_FILE), table)
        return StageRun(
            inputs=[self.path(CELLS_FILE)],
            outputs=[path],
            summary={
                'cells': len(table),
                'degree_mode': table.metadata['degree_mode'],
                'zero_share': {name: zero_share(table.column(name)) for name in COLUMNS},
                'distributions': {name: value_distribution(table.column(name)) for name in COLUMNS},
            },
        )

    def run_spearman(self):
        table = exporters.read_centralities(self.path(CENTRALITIES_FILE))
        names, matrix = spearman_matrix(table)
        labels = [exporters.CSV_COLUMNS[name] for name in names]
        rows = [[label] + [repr(float(v)) for v in matrix[i]] for i, label in enumerate(labels)]
        path = exporters.write_csv(self.path('spearman.csv'), ['column'] + labels, rows)
        return StageRun(
            inputs=[self.path(CENTRALITIES_FILE)],
            outputs=[path],
            summary={a: {b: float(matrix[i][j]) for j, b in enumerate(names)} for i, a in enumerate(names)},
        )

    def run_bivariate(self):
        pair = self.flags.get('pair') or DEFAULT_PAIR
        try:
            name_a, name_b = pair.split(':')
        except ValueError as exc:
            raise ValidationError(f"--pair must look like column_a:column_b, got '{pair}'", code="bad_parameter") from exc
        for name in (name_a, name_b):
            if name not in COLUMNS:
                raise ValidationError(f"Unknown centrality column '{name}'", code="bad_parameter")
        cells = self._cells()
        table = self._centralities(cells)
        a, b = table.column(name_a), table.column(name_b)
        classes = bivariate_bins(a, b)
        grid = self._grid_of(cells)
        features = [
            exporters.cell_feature(grid, key, {
                'a': name_a, 'b': name_b, 'value_a': float(a[i]), 'value_b': float(b[i]),
                'class_a': classes.class_a[i].value, 'class_b': classes.class_b[i].value,
            })
            for i, key in enumerate(cells.keys)
        ]
        path = exporters.write_feature_collection(self.path('bivariate.geojson'), features)
        counts = {f'{ca.value}-{cb.value}': n for (ca, cb), n in classes.counts().items()}
        return StageRun(
            inputs=[self.path(CELLS_FILE), self.path(CENTRALITIES_FILE)],
            outputs=[path],
            summary={'pair': [name_a, name_b], 'counts': counts},
        )

    def run_communities(self):
        cells = self._cells()
        assignment, q = louvain(cells, seed=self.config.louvain_seed)
        path = exporters.write_csv(
            self.path('communities.csv'), ['cell', 'community'],
            ([str(key), label] for key, label in zip(assignment.keys, assignment.labels.tolist())),
        )
        run = StageRun(
            inputs=[self.path(CELLS_FILE)],
            outputs=[path],
            summary={'modularity': q, 'sizes': community_sizes(assignment)},
        )
        if self.config.countries and os.path.isfile(self.config.countries):
            net = read_user_network(self.directory)
            country_of_cell = dominant_countries(net, self._grid_of(cells), self._polygons())
            distribution = community_country_distribution(assignment, country_of_cell)
            rows = [
                [cid, country, repr(pct)]
                for cid, shares in distribution.items() for country, pct in shares
            ]
            path = exporters.write_csv(self.path('community_countries.csv'), ['community', 'country', 'pct'], rows)
            run.inputs += self._user_files() + [self.config.countries]
            run.outputs.append(path)
            run.summary['countries'] = {str(cid): dict(shares) for cid, shares in distribution.items()}
        else:
            logger.info('No countries file configured; skipping the community country distribution')
        return run

    def run_hotspots(self):
        name = self.hotspot_values
        cells = self._cells()
        run = StageRun(inputs=[self.path(CELLS_FILE)])
        if name == USER_COUNT:
            values = cells.graph.node_weights
        elif name in COLUMNS:
            values = self._centralities(cells).column(name)
            run.inputs.append(self.path(CENTRALITIES_FILE))
        else:
            raise ValidationError(f"--values must be '{USER_COUNT}' or a centrality column, got '{name}'", code="bad_parameter")
        k = self.config.gistar_k
        if not 1 <= k < cells.n_cells:
            raise ValidationError(f'Gi* needs 1 <= k < cells; got k={k} for {cells.n_cells} cells', code='bad_parameter')
        grid = self._grid_of(cells)
        centroids = [grid.cell_centroid(key) for key in cells.keys]
        result = getis_ord_gi_star(values, centroids, k, threads=self.config.threads)
        features = [
            exporters.cell_feature(grid, key, {
                'values': name, 'value': float(values[i]), 'z': float(result.z[i]), 'class': result.classes[i].value,
            })
            for i, key in enumerate(cells.keys)
        ]
        run.outputs.append(exporters.write_feature_collection(self.path(f'{self.hotspots_name()}.geojson'), features))
        run.summary = {'values': name, 'k': k, 'counts': {c.value: n for c, n in result.counts().items()}}
        return run

    def run_flows(self):
        c = self.config
        countries = read_cell_network(self.path(COUNTRIES_FILE))
        cells = self._cells()
        flows = top_k_flows(countries, c.top_k)
        origin = self.flags.get('origin') or c.origin_country
        normalized = bool(self.flags.get('normalized'))

        run = StageRun(inputs=[self.path(COUNTRIES_FILE), self.path(CELLS_FILE)])
        populations = None
        if c.countries and os.path.isfile(c.countries):
            populations = self._polygons().populations
            run.inputs.append(c.countries)
        elif normalized:
            c.require('countries')
        raw = outflow_table(countries, origin)
        rows = outflow_table(countries, origin, populations, normalized=True) if normalized else raw

        run.outputs = [
            exporters.write_csv(
                self.path('flows.csv'), ['src', 'dst', 'weight', 'pct'],
                ([f.src, f.dst, f.weight, repr(f.pct)] for f in flows),
            ),
            exporters.write_json(self.path('chord.json'), chord_matrix(flows)),
            exporters.write_csv(
                self.path('outflow.csv'), ['country', 'pct'],
                ([country, repr(pct)] for country, pct in bucket_other(rows, self.flags.get('top_n'))),
            ),
            exporters.write_json(
                self.path('flowlines.geojson'), cell_flow_lines(cells, self._grid_of(cells), top=c.top_k),
            ),
        ]
        run.summary = {
            'within_share': within_share(countries),
            'top_flows': [[f.src, f.dst, f.weight, f.pct] for f in flows],
            'top_flows_share': sum(f.pct for f in flows),
            'origin': origin,
            'outflow': [list(row) for row in raw],
        }
        if populations is not None:
            run.summary['outflow_normalized'] = [
                list(row) for row in outflow_table(countries, origin, populations, normalized=True)
            ]
        return run

    def run_histogram(self):
        net = read_user_network(self.directory)
        lengths = net.edge_lengths_km()
        histogram = fd_histogram(lengths)
        lengths_path = exporters.write_csv(
            self.path('edge_lengths.csv'), ['src', 'dst', 'km'],
            ([src, dst, repr(float(km))] for (src, dst), km in zip(net.edge_id_pairs(), lengths.tolist())),
        )
        summary = {
            'n_edges': int(len(lengths)),
            'bin_width_km': histogram.bin_width,
            'peak_center_km': histogram.peak_center,
            'edges': [float(e) for e in histogram.edges],
            'shares': [float(s) for s in histogram.shares],
        }
        histogram_path = exporters.write_json(self.path('histogram.json'), summary)
        return StageRun(inputs=self._user_files(), outputs=[lengths_path, histogram_path], summary=summary)

    def run_report(self):
        """Run every stage after synth in order and bundle their results."""
        global_ = self.scoped('global')
        aoi = self.scoped('aoi')
        steps = [
            ('ingest', global_),
            ('subnet', global_),
            ('aggregate', self.scoped('global', grid=True, countries=True)),
            ('aggregate', aoi),
            ('centrality', global_),
            ('centrality', aoi),
            ('spearman', global_),
            ('bivariate', global_),
            ('communities', global_),
            ('communities', aoi),
            *[('hotspots', self.scoped('aoi', values=values)) for values in REPORT_HOTSPOT_VALUES],
            ('flows', global_),
            ('histogram', global_),
        ]
        run = StageRun()
        results = {}
        for name, stage in steps:
            logger.info('Report: %s (%s)', name, stage.scope)
            stage_run = stage.execute(name)
            run.merge(stage_run)
            key = stage.hotspot_values if name == 'hotspots' else stage.scope
            results.setdefault(name, {})[key] = stage_run.summary

        produced = set(run.outputs)
        run.inputs = [path for path in run.inputs if path not in produced]
        report = {
            'ingest': results['ingest']['global'],
            'subnetwork': results['subnet']['global'],
            'aggregation': results['aggregate'],
            'centrality': results['centrality'],
            'spearman': results['spearman']['global'],
            'bivariate': results['bivariate']['global'],
            'communities': results['communities'],
            'hotspots': results['hotspots'],
            'flows': results['flows']['global'],
            'edge_lengths': {
                key: value for key, value in results['histogram']['global'].items() if key not in ('edges', 'shares')
            },
        }
        run.outputs.append(exporters.write_json(os.path.join(self.config.output_dir, 'report.json'), report))
        run.summary = report
        return run


def _json_flags(flags):
    return {key: value for key, value in sorted(flags.items()) if value is not None and key not in ('threads', 'manifest')}


CONFIG_FLAGS = {
    'k': 'gistar_k',
    'seed': 'louvain_seed',
    'top_k': 'top_k',
    'threads': 'threads',
    'origin': 'origin_country',
    'output_dir': 'output_dir',
}


def config_overrides(flags):
    overrides = {target: flags.get(source) for source, target in CONFIG_FLAGS.items()}
    if flags.get('weighted'):
        overrides['weighted_degree'] = True
    return overrides


def _record(name, parameters, digest, exit_code, message):
    try:
        PipelineRun.objects.create(
            subcommand=name, parameters=parameters, manifest_digest=digest, exit_code=exit_code, message=message[:2000],
        )
    except DatabaseError as exc:
        logger.warning('Could not record the %s run: %s', name, exc)


def run_subcommand(name, config=None, flags=None, out=None):
    """
    Run one stage and return its exit code: 0 on success, 2 on invalid input
    or configuration, 1 on any other failure, 64 for an unknown subcommand.
    """
    flags = dict(flags or {})
    if name not in SUBCOMMANDS:
        (out or sys.stderr).write(f"Unknown subcommand '{name}'\n{usage()}\n")
        return EXIT_USAGE

    parameters = {'flags': _json_flags(flags)}
    digest = ''
    try:
        if config is None:
            config = PipelineConfig.build(flags.get('config'), config_overrides(flags))
        parameters['config'] = config.parameters()
        pipeline = Pipeline(config, flags)
        run = pipeline.execute(name)
        digest = exporters.sha256_file(pipeline.manifest_path(name))
        code, message = EXIT_OK, f'{name} wrote {len(set(run.outputs))} artifacts'
        logger.info(message)
    except ValidationError as exc:
        code, message = EXIT_VALIDATION, '; '.join(exc.messages)
        logger.error('%s: %s', name, message)
    except Exception as exc:
        code, message = EXIT_RUNTIME, f'{type(exc).__name__}: {exc}'
        logger.exception('%s failed', name)
    _record(name, parameters, digest, code, message)
    return code
