# pipeline/management/commands/gsna.py
import sys

from django.core.management.base import BaseCommand

import geosna
from pipeline.config import PipelineConfig
from pipeline.runner import EXIT_OK, SCOPES, Pipeline, config_overrides, run_subcommand, usage


class Command(BaseCommand):
    help = 'Run a stage of the spatial-social network pipeline'

    def get_version(self):
        return f'geosna {geosna.__version__}'

    def add_arguments(self, parser):
        parser.add_argument('subcommand', nargs='?', help='Pipeline stage to run (see --help-stages)')
        parser.add_argument('--help-stages', action='store_true', help='List the pipeline stages and exit')
        parser.add_argument('--config', help='JSON pipeline configuration file')
        parser.add_argument('--output-dir', dest='output_dir', help='Directory for every artifact')
        parser.add_argument('--scope', choices=SCOPES, default='global', help='Global grid or area-of-interest subnetwork')
        parser.add_argument('--threads', type=int, help='Worker processes for centralities and hot spots')
        parser.add_argument('--manifest', action='store_true', help='Print the run manifest path afterwards')

        parser.add_argument('--grid', action='store_true', help='aggregate: build the hex cell network')
        parser.add_argument('--countries', action='store_true', help='aggregate: build the country network')
        parser.add_argument('--bbox', help='subnet: min_lat,max_lat,min_lon,max_lon')
        parser.add_argument('--weighted', action='store_true', help='centrality: weighted degrees')
        parser.add_argument('--pair', help='bivariate: two centrality columns as a:b')
        parser.add_argument('--seed', type=int, help='communities: Louvain seed')
        parser.add_argument('--k', type=int, help='hotspots: nearest neighbours per cell')
        parser.add_argument('--values', help="hotspots: centrality column or 'users'")
        parser.add_argument('--top-k', dest='top_k', type=int, help='flows: number of heaviest flows')
        parser.add_argument('--origin', help='flows: origin country of the outflow table')
        parser.add_argument('--normalized', action='store_true', help='flows: normalise the outflow by population')
        parser.add_argument('--top-n', dest='top_n', type=int, help="flows: fold outflow rows past N into 'Other'")

    def handle(self, *args, **options):
        name = options.pop('subcommand')
        if options.pop('help_stages') or not name:
            self.stdout.write(usage())
            if not name:
                sys.exit(64)
            return

        flags = {
            key: options.get(key)
            for key in ('config', 'output_dir', 'scope', 'threads', 'manifest', 'grid', 'countries', 'bbox',
                        'weighted', 'pair', 'seed', 'k', 'values', 'top_k', 'origin', 'normalized', 'top_n')
        }
        code = run_subcommand(name, None, flags, out=self.stderr)
        if code != EXIT_OK:
            self.stderr.write(self.style.ERROR(f'{name} failed with exit code {code}'))
            sys.exit(code)

        self.stdout.write(self.style.SUCCESS(f'{name} completed'))
        if flags['manifest']:
            config = PipelineConfig.build(flags['config'], config_overrides(flags))
            self.stdout.write(Pipeline(config, flags).manifest_path(name))
