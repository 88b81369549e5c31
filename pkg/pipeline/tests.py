import io
import json
import os
import shutil
import tempfile
import time

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase, TestCase
from scipy.stats import skew
from sklearn.metrics import adjusted_rand_score

from aggregate.cellnet import cells_of_users
from aggregate.container import read_cell_network
from geo.hexgrid import HexGrid
from ingest.network import read_user_network

from . import exporters
from .config import PipelineConfig
from .models import PipelineRun
from .runner import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION, run_subcommand

COUNTRIES_PATH = os.path.join(settings.BASE_DIR, 'fixtures', 'countries.geojson')
PIPELINE_PATH = os.path.join(settings.BASE_DIR, 'fixtures', 'pipeline.json')

SNOWBALL = {
    'seeds': [
        {'region': 'vienna', 'tier': 'medium'},
        {'region': 'germany', 'tier': 'medium'},
        {'region': 'usa', 'tier': 'few'},
    ],
    'iterations': 3,
    'tier_ranges': {'few': [2, 5], 'medium': [10, 20], 'many': [20, 40]},
    'follower_sample': 1.0,
    'places_per_region': 25,
    'missing_share': 0.1,
    'unresolvable_share': 0.05,
    'imprecise_share': 0.05,
    'fake_share': 0.01,
    'rng_seed': 5,
    'regions': [
        {'id': 'vienna', 'lat': 48.2, 'lon': 16.37, 'radius_km': 60, 'weight': 1.0, 'country': 'AT', 'language': 'de'},
        {'id': 'germany', 'lat': 51.0, 'lon': 10.0, 'radius_km': 250, 'weight': 8.0, 'country': 'DE', 'language': 'de'},
        {'id': 'usa', 'lat': 39.5, 'lon': -95.0, 'radius_km': 900, 'weight': 33.0, 'country': 'US', 'language': 'en'},
    ],
}


def write_workspace(directory, snowball=None, **config):
    with open(os.path.join(directory, 'snowball.json'), 'w', encoding='utf-8') as fout:
        json.dump(snowball or SNOWBALL, fout)
    values = {
        'snowball': 'snowball.json',
        'countries': COUNTRIES_PATH,
        'output_dir': 'out',
        'gistar_k': 3,
        'top_k': 5,
        'louvain_seed': 42,
    }
    values.update(config)
    path = os.path.join(directory, 'pipeline.json')
    with open(path, 'w', encoding='utf-8') as fout:
        json.dump(values, fout)
    return path


def read_bytes(path):
    with open(path, 'rb') as fin:
        return fin.read()


class PipelineConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_settings_are_the_defaults(self):
        config = PipelineConfig.build()
        self.assertEqual(config.gistar_k, settings.GEOSNA_GISTAR_K)
        self.assertEqual(config.output_dir, settings.GEOSNA_OUTPUT_DIR)
        self.assertEqual(config.users, os.path.join(settings.GEOSNA_OUTPUT_DIR, 'synth', 'users.csv'))

    def test_flags_override_file_override_settings(self):
        path = write_workspace(self.tmp.name, gistar_k=12, top_k=9)
        config = PipelineConfig.build(path, {'gistar_k': 7, 'top_k': None})
        self.assertEqual(config.gistar_k, 7)
        self.assertEqual(config.top_k, 9)
        self.assertEqual(config.louvain_seed, 42)
        self.assertEqual(config.output_dir, os.path.join(self.tmp.name, 'out'))
        self.assertEqual(config.users, os.path.join(self.tmp.name, 'out', 'synth', 'users.csv'))
        self.assertEqual(config.snowball, os.path.join(self.tmp.name, 'snowball.json'))

    def test_invalid_values(self):
        for values in ({'gistar_k': 0}, {'aoi_bbox': '10,5,0,1'}, {'colour': 'red'}, {'louvain_seed': -1}):
            with self.assertRaises(ValidationError):
                PipelineConfig.build(overrides=values)

    def test_missing_config_file(self):
        with self.assertRaisesMessage(ValidationError, 'does not exist'):
            PipelineConfig.build(os.path.join(self.tmp.name, 'absent.json'))

    def test_manifest_parameters_leave_out_threads(self):
        parameters = PipelineConfig.build(overrides={'threads': 3}).parameters()
        self.assertNotIn('threads', parameters)
        self.assertEqual(parameters['aoi_bbox'], '34,72,-25,45')


class RunSubcommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.config_path = write_workspace(self.tmp.name)
        self.out = os.path.join(self.tmp.name, 'out')

    def run_stage(self, name, **flags):
        return run_subcommand(name, flags=dict({'config': self.config_path, 'threads': 1}, **flags), out=io.StringIO())

    def test_unknown_subcommand(self):
        out = io.StringIO()
        self.assertEqual(run_subcommand('pagerank', out=out), EXIT_USAGE)
        self.assertIn('usage:', out.getvalue())
        self.assertFalse(PipelineRun.objects.exists())

    def test_missing_config_is_a_validation_error(self):
        code = run_subcommand('ingest', flags={'config': os.path.join(self.tmp.name, 'nope.json')})
        self.assertEqual(code, EXIT_VALIDATION)
        run = PipelineRun.objects.get()
        self.assertEqual(run.exit_code, EXIT_VALIDATION)
        self.assertFalse(run.succeeded)

    def test_stage_without_its_inputs(self):
        self.assertEqual(self.run_stage('centrality'), EXIT_VALIDATION)
        self.assertIn('aggregate', PipelineRun.objects.get().message)

    def test_unexpected_failure_exits_one(self):
        snowball = dict(SNOWBALL, iterations=0)
        self.config_path = write_workspace(self.tmp.name, snowball=snowball)
        self.assertEqual(self.run_stage('synth'), EXIT_OK)
        self.assertEqual(self.run_stage('ingest'), EXIT_OK)
        # no edges survive, so there is nothing to bin
        self.assertEqual(self.run_stage('histogram'), EXIT_RUNTIME)

    def test_full_report(self):
        self.assertEqual(self.run_stage('synth'), EXIT_OK)
        self.assertEqual(self.run_stage('report'), EXIT_OK)

        with open(os.path.join(self.out, 'report.json'), encoding='utf-8') as fin:
            report = json.load(fin)
        self.assertEqual(set(report['centrality']), {'global', 'aoi'})
        self.assertEqual(report['flows']['origin'], 'AT')
        self.assertAlmostEqual(sum(pct for _, pct in report['flows']['outflow']), 100.0, places=9)
        self.assertGreater(report['communities']['global']['modularity'], 0.0)
        self.assertEqual(set(report['hotspots']), {'closeness', 'betweenness'})
        for summary in report['hotspots'].values():
            self.assertEqual(sum(summary['counts'].values()), report['aggregation']['aoi']['cells'])
        distributions = report['centrality']['global']['distributions']
        self.assertEqual(set(distributions), {'in_degree', 'out_degree', 'closeness', 'betweenness'})
        self.assertLessEqual(distributions['closeness']['p25'], distributions['closeness']['p75'])

        manifest_path = os.path.join(self.out, 'manifest_report.json')
        with open(manifest_path, encoding='utf-8') as fin:
            manifest = json.load(fin)
        self.assertEqual(manifest['subcommand'], 'report')
        self.assertIn('report.json', manifest['outputs'])
        self.assertIn('aoi/hotspots.geojson', manifest['outputs'])
        self.assertIn('aoi/hotspots_betweenness.geojson', manifest['outputs'])
        self.assertIn('synth/users.csv', manifest['inputs'])
        self.assertNotIn('threads', manifest['parameters']['config'])
        self.assertEqual(
            manifest['outputs']['centralities.csv'], exporters.sha256_file(os.path.join(self.out, 'centralities.csv')),
        )

        last = PipelineRun.objects.filter(subcommand='report').get()
        self.assertTrue(last.succeeded)
        self.assertEqual(last.manifest_digest, exporters.sha256_file(manifest_path))

    def test_single_stage_matches_report(self):
        self.run_stage('synth')
        self.run_stage('report')
        fused = read_bytes(os.path.join(self.out, 'aoi', 'centralities.csv'))
        os.remove(os.path.join(self.out, 'aoi', 'centralities.csv'))
        self.assertEqual(self.run_stage('centrality', scope='aoi'), EXIT_OK)
        self.assertEqual(read_bytes(os.path.join(self.out, 'aoi', 'centralities.csv')), fused)

    def test_thread_count_does_not_change_artifacts(self):
        self.run_stage('synth')
        self.assertEqual(self.run_stage('report'), EXIT_OK)
        other = os.path.join(self.tmp.name, 'other')
        shutil.copytree(os.path.join(self.out, 'synth'), os.path.join(other, 'synth'))
        code = run_subcommand('report', flags={'config': self.config_path, 'output_dir': other, 'threads': 2})
        self.assertEqual(code, EXIT_OK)
        for name in ('report.json', 'centralities.csv', 'aoi/hotspots.geojson', 'aoi/hotspots_betweenness.geojson',
                     'communities.csv'):
            self.assertEqual(read_bytes(os.path.join(self.out, name)), read_bytes(os.path.join(other, name)), name)
        first = json.loads(read_bytes(os.path.join(self.out, 'manifest_report.json')))
        second = json.loads(read_bytes(os.path.join(other, 'manifest_report.json')))
        self.assertEqual(first['outputs'], second['outputs'])

    def test_flows_outflow_modes(self):
        self.run_stage('synth')
        self.run_stage('report')
        self.assertEqual(self.run_stage('flows', normalized=True, top_n=2), EXIT_OK)
        header, rows = exporters.read_csv(os.path.join(self.out, 'outflow.csv'))
        self.assertEqual(header, ['country', 'pct'])
        self.assertLessEqual(len(rows), 3)
        self.assertAlmostEqual(sum(float(pct) for _, pct in rows), 100.0, places=9)

    def test_hotspot_maps_keep_their_own_files(self):
        self.run_stage('synth')
        self.run_stage('report')
        closeness = read_bytes(os.path.join(self.out, 'aoi', 'hotspots.geojson'))
        betweenness = read_bytes(os.path.join(self.out, 'aoi', 'hotspots_betweenness.geojson'))
        os.remove(os.path.join(self.out, 'aoi', 'hotspots_betweenness.geojson'))

        self.assertEqual(self.run_stage('hotspots', scope='aoi', values='betweenness'), EXIT_OK)
        self.assertEqual(read_bytes(os.path.join(self.out, 'aoi', 'hotspots_betweenness.geojson')), betweenness)
        self.assertEqual(read_bytes(os.path.join(self.out, 'aoi', 'hotspots.geojson')), closeness)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'aoi', 'manifest_hotspots_betweenness.json')))
        feature = json.loads(betweenness)['features'][0]
        self.assertEqual(feature['properties']['values'], 'betweenness')


class BundledFixtureTests(TestCase):
    """The shipped snowball fixture, generated and analysed end to end."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = cls.tmp.name
        flags = {'config': PIPELINE_PATH, 'output_dir': cls.out, 'threads': 1}
        cls.synth_code = run_subcommand('synth', flags=flags, out=io.StringIO())
        started = time.perf_counter()
        cls.report_code = run_subcommand('report', flags=flags, out=io.StringIO())
        cls.report_seconds = time.perf_counter() - started
        with open(os.path.join(cls.out, 'report.json'), encoding='utf-8') as fin:
            cls.report = json.load(fin)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_report_runs_within_a_minute(self):
        self.assertEqual(self.synth_code, EXIT_OK)
        self.assertEqual(self.report_code, EXIT_OK)
        self.assertLess(self.report_seconds, 60.0)

    def test_aggregation_conserves_users_and_edges(self):
        net = read_user_network(self.out)
        self.assertGreater(net.n_users, 10_000)
        for name in ('cells.gsna', 'countries.gsna'):
            cells = read_cell_network(os.path.join(self.out, name))
            self.assertEqual(cells.total_users, net.n_users, name)
            self.assertEqual(cells.total_edges, net.n_edges, name)

    def test_within_nation_share(self):
        self.assertLessEqual(abs(self.report['flows']['within_share'] - 44.0), 5.0)

    def test_edge_lengths_are_right_skewed(self):
        _, rows = exporters.read_csv(os.path.join(self.out, 'edge_lengths.csv'))
        lengths = np.array([float(km) for _, _, km in rows])
        self.assertGreater(skew(lengths), 0.0)
        self.assertGreater(lengths.mean(), np.median(lengths))
        self.assertLess(self.report['edge_lengths']['peak_center_km'], 2000.0)

    def test_global_communities_follow_language_groups(self):
        with open(os.path.join(self.out, 'synth', 'ground_truth.json'), encoding='utf-8') as fin:
            truth = json.load(fin)
        language_of_user = {
            user['user_id']: truth['regions'][user['region']]['language'] for user in truth['users']
        }
        net = read_user_network(self.out)
        cells = read_cell_network(os.path.join(self.out, 'cells.gsna'))
        languages = {}
        for uid, cell in zip(net.user_ids, cells_of_users(net, HexGrid(cells.cell_area_km2))):
            languages.setdefault(str(cell), []).append(language_of_user[uid])

        _, rows = exporters.read_csv(os.path.join(self.out, 'communities.csv'))
        planted, found = [], []
        for cell, community in rows:
            votes = languages[cell]
            planted.append(max(sorted(set(votes)), key=votes.count))
            found.append(int(community))
        self.assertGreaterEqual(adjusted_rand_score(planted, found), 0.8)


class GsnaCommandTests(TestCase):
    def test_no_subcommand_prints_usage(self):
        out = io.StringIO()
        with self.assertRaises(SystemExit) as cm:
            call_command('gsna', stdout=out, stderr=io.StringIO())
        self.assertEqual(cm.exception.code, EXIT_USAGE)
        self.assertIn('subcommands:', out.getvalue())

    def test_failure_exit_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(SystemExit) as cm:
                call_command('gsna', 'ingest', '--config', os.path.join(tmp, 'missing.json'),
                             stdout=io.StringIO(), stderr=io.StringIO())
        self.assertEqual(cm.exception.code, EXIT_VALIDATION)

    def test_synth_with_manifest_flag(self):
        with tempfile.TemporaryDirectory() as tmp:
            config_path = write_workspace(tmp, snowball=dict(SNOWBALL, iterations=1))
            out = io.StringIO()
            call_command('gsna', 'synth', '--config', config_path, '--manifest', stdout=out, stderr=io.StringIO())
            manifest = os.path.join(tmp, 'out', 'synth', 'manifest_synth.json')
            self.assertIn(manifest, out.getvalue())
            self.assertTrue(os.path.isfile(manifest))
