# -*- coding: utf-8 -*-
"""Module with the command that runs a whole experiment from a TOML config.
"""
import dataclasses

import tornado.options

from app.base_command import EXIT_FAILURE, EXIT_OK, EXIT_PARTIAL, ApplicationError, BaseCommand
from app.commands.common import failures, read_version
from app.modules.harness import run_experiment
from app.modules.harness.fixtures import MEASUREMENTS, TARGETS
from app.modules.harness.reports import correlation_table, measurement_table, robustness_table
from app.validation.commands import RUN_SCHEMA
from app.validation.experiment import load_experiment_config


class RunCommand(BaseCommand):
	name = 'run'
	description = 'train, measure, attack and correlate every (model, dataset) cell of a config'
	schema = RUN_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		options.define('config', default='', type=str, help='experiment TOML file (see experiment.toml)')
		options.define('out', default='', type=str, help='output directory; overrides [output] dir')
		options.define('workers', default=0, type=int, help='concurrent cells; overrides the config when positive')

	def run(self, args: dict) -> int:
		path = args['config']
		with failures():
			try:
				config = load_experiment_config(path, read_version(), defaults={'seed': args['seed']})
			except FileNotFoundError as e:
				raise ApplicationError(EXIT_FAILURE, f'config file not found: {path}') from e
		overrides = {}
		if args['out']:
			overrides['out_dir'] = args['out']
		if args['workers']:
			overrides['workers'] = args['workers']
		config = dataclasses.replace(config, **overrides)

		with failures():
			report = run_experiment(config)

		self.write(measurement_table(report.measurements))
		if report.robustness:
			self.write('')
			self.write(robustness_table(report.robustness))
		self.write('')
		self.write(correlation_table(report.correlations, MEASUREMENTS, TARGETS))
		for cell in report.failed:
			self.write(f'FAILED {cell.variant}/{cell.dataset}: {cell.error}')
		self.write(f'reports in {config.out_dir}')
		return EXIT_PARTIAL if report.failed else EXIT_OK
