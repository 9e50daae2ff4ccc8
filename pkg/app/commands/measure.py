# -*- coding: utf-8 -*-
"""Module with the command that computes M1-M5 for a trained checkpoint.
"""
import os

import tornado.options

from app.base_command import EXIT_OK, BaseCommand
from app.commands.common import define_dataset_options, define_out_option, failures, load_splits
from app.environs import env
from app.modules.harness.reports import MEASUREMENTS_CSV, measurement_table, write_csv
from app.modules.metrics import IobConfig, MeasureConfig, measure_all
from app.modules.metrics.measure import CSV_HEADER
from app.modules.modelzoo import load_checkpoint
from app.validation.commands import MEASURE_SCHEMA


class MeasureCommand(BaseCommand):
	name = 'measure'
	description = 'M1-M5 of a checkpoint on a dataset; writes measurements.csv'
	schema = MEASURE_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		measure, iob = MeasureConfig(), IobConfig()
		options.define('checkpoint', default='', type=str, help='model file written by train')
		define_dataset_options(options)
		options.define('max_samples', default=env.MAX_DC_SAMPLES, type=int, help='test samples for the distance correlations')
		options.define('iob_train_samples', default=measure.iob_train_samples, type=int, help='train samples for the IoB decoders')
		options.define('iob_max_epochs', default=iob.max_epochs, type=int, help='IoB decoder epochs')
		options.define('iob_patience', default=iob.patience, type=int, help='IoB early-stopping patience')
		define_out_option(options)

	def run(self, args: dict) -> int:
		splits = load_splits(args)
		with failures():
			model = load_checkpoint(args['checkpoint'])
			config = MeasureConfig(
				max_samples=args['max_samples'],
				iob_train_samples=args['iob_train_samples'],
				seed=args['seed'],
				iob=IobConfig(max_epochs=args['iob_max_epochs'], patience=args['iob_patience'], seed=args['seed']),
			)
			record = measure_all(model, splits.train, splits.test, config, model.variant, splits.name)
			os.makedirs(args['out'], exist_ok=True)
			write_csv(os.path.join(args['out'], MEASUREMENTS_CSV), CSV_HEADER, [record.to_row()])
		self.write(measurement_table([record]))
		return EXIT_OK
