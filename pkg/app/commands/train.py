# -*- coding: utf-8 -*-
"""Module with the command that trains one model variant and saves its checkpoint.
"""
import os

import tornado.options

from app.base_command import EXIT_OK, BaseCommand
from app.commands.common import define_dataset_options, define_out_option, failures, load_splits
from app.modules.harness import TrainingBudget, train_model
from app.modules.harness.reports import TRACKING_CSV, write_csv, write_json
from app.modules.harness.training import TRACKING_HEADER
from app.modules.modelzoo import VARIANTS, save_checkpoint
from app.validation.commands import TRAIN_SCHEMA


def checkpoint_name(variant: str, dataset: str) -> str:
	return f'{variant}-{dataset}.cdnb'


class TrainCommand(BaseCommand):
	name = 'train'
	description = 'train one variant; writes <model>-<dataset>.cdnb and its epoch log'
	schema = TRAIN_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		budget = TrainingBudget()
		options.define('model', default='', type=str, help=f'variant to train: {", ".join(VARIANTS)}')
		define_dataset_options(options)
		options.define('epochs', default=budget.epochs, type=int, help='training epochs')
		options.define('batch_size', default=budget.batch_size, type=int, help='mini-batch size')
		options.define('learning_rate', default=budget.learning_rate, type=float, help='Adam learning rate')
		options.define('tracking', default=False, type=bool, help='record M1 and PGD40 accuracy every epoch (tracking.csv)')
		options.define('tracking_samples', default=budget.tracking_samples, type=int, help='validation samples for tracking')
		define_out_option(options)

	def run(self, args: dict) -> int:
		splits = load_splits(args)
		variant, out = args['model'], args['out']
		with failures():
			budget = TrainingBudget(
				epochs=args['epochs'],
				batch_size=args['batch_size'],
				learning_rate=args['learning_rate'],
				tracking=args['tracking'],
				tracking_samples=args['tracking_samples'],
			)
			result = train_model(variant, splits.train, splits.val, budget, args['seed'])
			os.makedirs(out, exist_ok=True)
			path = os.path.join(out, checkpoint_name(variant, splits.name))
			save_checkpoint(result.model, path)
			write_json(os.path.join(out, f'{variant}-{splits.name}.json'), {
				'model': variant,
				'dataset': splits.name,
				'seed': args['seed'],
				'best_epoch': result.best_epoch,
				'epochs': result.log_dicts(),
			})
			if budget.tracking:
				write_csv(os.path.join(out, TRACKING_CSV), TRACKING_HEADER, result.tracking_rows(variant, splits.name))

		best = result.log[result.best_epoch - 1]
		self.write(f'{variant}/{splits.name}: best val accuracy {best.val_accuracy * 100:.1f}% at epoch {result.best_epoch}')
		self.write(f'checkpoint: {path}')
		return EXIT_OK
