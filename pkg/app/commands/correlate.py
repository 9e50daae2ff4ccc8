# -*- coding: utf-8 -*-
"""Module with the command that correlates measurements with robustness results.
"""
import os

import tornado.options

from app.base_command import EXIT_FAILURE, EXIT_OK, ApplicationError, BaseCommand
from app.commands.common import define_out_option, failures
from app.modules.harness import correlate_records
from app.modules.harness.fixtures import MEASUREMENTS, TARGETS
from app.modules.harness.reports import (
	CORRELATION_HEADER,
	CORRELATIONS_CSV,
	correlation_table,
	read_measurements,
	read_robustness,
	write_csv,
)
from app.validation.commands import CORRELATE_SCHEMA


class CorrelateCommand(BaseCommand):
	name = 'correlate'
	description = 'Pearson r between M1-M5 and the robustness targets; writes correlations.csv'
	schema = CORRELATE_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		options.define('measurements', default='', type=str, help='measurements.csv (model, dataset, n, m1..m5)')
		options.define('robustness', default='', type=str, help='robustness.csv, one row per (model, dataset, attack)')
		define_out_option(options)

	def run(self, args: dict) -> int:
		with failures():
			measurements = read_measurements(args['measurements'])
			robustness = {(r.model, r.dataset): r for r in read_robustness(args['robustness'])}
		missing = [f'{m.model}/{m.dataset}' for m in measurements if (m.model, m.dataset) not in robustness]
		if missing:
			raise ApplicationError(EXIT_FAILURE, f'no robustness rows for {", ".join(missing)}')

		paired = [robustness[(m.model, m.dataset)] for m in measurements]
		results = correlate_records(measurements, [r.clean_accuracy for r in paired], paired)
		with failures():
			os.makedirs(args['out'], exist_ok=True)
			write_csv(os.path.join(args['out'], CORRELATIONS_CSV), CORRELATION_HEADER, [r.to_row() for r in results])
		self.write(correlation_table(results, MEASUREMENTS, TARGETS))
		return EXIT_OK
