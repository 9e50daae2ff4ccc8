# -*- coding: utf-8 -*-
"""Flags and helpers shared by the commands."""
from contextlib import contextmanager
import json
import logging
import os

import tornado.options

from app.base_command import EXIT_FAILURE, EXIT_USAGE, ApplicationError
from app.environs import env
from app.modules.attacks import AttackError
from app.modules.autograd import AutogradError
from app.modules.harness import ConfigError, DatasetSpec, DatasetSplits, HarnessError, SyntheticFactors, load_dataset
from app.modules.metrics import MetricsError
from app.modules.modelzoo import ModelZooError

logger = logging.getLogger(__name__)

SYNTHETIC = 'synthetic'
DATASET_JSON = 'dataset.json'

LIBRARY_ERRORS = (AttackError, AutogradError, HarnessError, MetricsError, ModelZooError, OSError)


def define_dataset_options(options: tornado.options.OptionParser):
	defaults = DatasetSpec()
	factors = SyntheticFactors()
	options.define(
		'dataset', default=SYNTHETIC, type=str,
		help=f'"{SYNTHETIC}" to generate in memory, or a directory with MNIST-named IDX files (see gen-data)'
	)
	options.define('name', default='', type=str, help='dataset id in reports; defaults to the generator or directory name')
	options.define('image_size', default=defaults.image_size, type=int, help='synthetic image side, a multiple of 4')
	options.define('num_classes', default=defaults.num_classes, type=int, help='number of classes')
	options.define('train_size', default=defaults.train_size, type=int, help='train samples before the 4:1 validation cut')
	options.define('test_size', default=defaults.test_size, type=int, help='test samples')
	options.define('rho', default=factors.rho, type=float, help='P(background level = label) in synthetic data')
	options.define('noise', default=factors.noise, type=float, help='std of pixel noise in synthetic data')


def define_out_option(options: tornado.options.OptionParser, default: str = env.RESULTS_DIR):
	options.define('out', default=default, type=str, help='output directory')


def dataset_entry(args: dict) -> tuple:
	"""(DatasetSpec, SyntheticFactors) described by the dataset flags.

	A directory written by gen-data carries a dataset.json whose name and
	class count are used unless the flags say otherwise.
	"""
	factors = SyntheticFactors(rho=args['rho'], noise=args['noise'])
	if args['dataset'] == SYNTHETIC:
		spec = DatasetSpec(
			source='synthetic',
			name=args['name'] or SYNTHETIC,
			image_size=args['image_size'],
			num_classes=args['num_classes'],
			train_size=args['train_size'],
			test_size=args['test_size'],
			seed=args['seed'],
		)
		return spec, factors

	path = args['dataset']
	if not os.path.isdir(path):
		raise ApplicationError(EXIT_FAILURE, f'dataset directory not found: {path}')
	described = {}
	described_path = os.path.join(path, DATASET_JSON)
	if os.path.exists(described_path):
		with open(described_path, encoding='utf-8') as file:
			described = json.load(file)
	spec = DatasetSpec(
		source='mnist_idx',
		name=args['name'] or described.get('name') or os.path.basename(os.path.normpath(path)),
		num_classes=described.get('num_classes', args['num_classes']),
		train_size=args['train_size'],
		test_size=args['test_size'],
		seed=args['seed'],
		path=path,
	)
	return spec, factors


def load_splits(args: dict) -> DatasetSplits:
	with failures():
		spec, factors = dataset_entry(args)
		return load_dataset(spec, factors)


@contextmanager
def failures():
	"""Library errors leave the command as ApplicationError: usage for bad config, failure otherwise."""
	try:
		yield
	except ConfigError as e:
		raise ApplicationError(EXIT_USAGE, str(e)) from e
	except LIBRARY_ERRORS as e:
		raise ApplicationError(EXIT_FAILURE, str(e)) from e


def read_version() -> str:
	"""Contents of ./VERSION at the repository root, '' when absent."""
	workdir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.realpath(__file__))))
	try:
		with open(os.path.join(workdir, 'VERSION'), encoding='utf-8') as file:
			return file.read().strip()
	except FileNotFoundError:
		return ''
