# -*- coding: utf-8 -*-
"""Module with the command that runs the attack suite against a checkpoint.
"""
import os

import tornado.options

from app.base_command import EXIT_OK, BaseCommand
from app.commands.common import define_dataset_options, define_out_option, failures, load_splits
from app.environs import env
from app.modules.attacks import SUITE, TABLE_ATTACKS
from app.modules.harness import evaluate_robustness
from app.modules.harness.reports import ROBUSTNESS_CSV, robustness_table, write_csv
from app.modules.harness.robustness import CSV_HEADER
from app.modules.modelzoo import load_checkpoint
from app.validation.commands import ATTACK_SCHEMA


class AttackCommand(BaseCommand):
	name = 'attack'
	description = 'clean and attacked accuracy of a checkpoint; writes robustness.csv'
	schema = ATTACK_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		options.define('checkpoint', default='', type=str, help='model file written by train')
		define_dataset_options(options)
		options.define(
			'attack', default=[cfg.name for cfg in TABLE_ATTACKS], type=str, multiple=True,
			help=f'comma-separated attack names: {", ".join(SUITE)}'
		)
		options.define('workers', default=env.WORKERS, type=int, help='threads per attack')
		define_out_option(options)

	def run(self, args: dict) -> int:
		splits = load_splits(args)
		with failures():
			model = load_checkpoint(args['checkpoint'])
			record = evaluate_robustness(
				model,
				splits.test,
				[SUITE[name] for name in args['attack']],
				seed=args['seed'],
				workers=args['workers'],
				model_id=model.variant,
			)
			os.makedirs(args['out'], exist_ok=True)
			write_csv(os.path.join(args['out'], ROBUSTNESS_CSV), CSV_HEADER, record.to_rows())
		self.write(robustness_table([record]))
		return EXIT_OK
