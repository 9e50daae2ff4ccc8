# -*- coding: utf-8 -*-
"""Module with validation schemas for experiment config files.

A config is a TOML file with optional top-level `seed` and `workers` and the
sections `dataset` (a table or an array of tables), `models`, `attacks`,
`metrics` and `output`. Every key has a default; see experiment.toml.
"""
from fractions import Fraction
try:
	import tomllib
except ImportError:  # Python < 3.11
	import tomli as tomllib
from typing import Optional

import voluptuous as vlps

from app.environs import env
from app.modules.attacks import SUITE, TABLE_ATTACKS, AttackConfig, AttackError
from app.modules.attacks.common import FAMILIES, NORMS
from app.modules.harness import (
	ConfigError,
	DatasetEntry,
	DatasetSpec,
	ExperimentConfig,
	SyntheticFactors,
	TrainingBudget,
)
from app.modules.harness.datasets import SOURCES
from app.modules.metrics import IobConfig, MeasureConfig
from app.modules.modelzoo import VARIANTS, ZooConfig


def fraction(value) -> float:
	"""Accepts numbers and fraction strings such as '8/255'."""
	if isinstance(value, bool):
		raise vlps.Invalid('expected a number')
	if isinstance(value, (int, float)):
		return float(value)
	try:
		return float(Fraction(str(value).strip()))
	except (ValueError, ZeroDivisionError) as e:
		raise vlps.Invalid(f'not a number or fraction: {value!r}') from e


_POSITIVE_INT = vlps.All(int, vlps.Range(min=1))
_UNIT = vlps.All(vlps.Coerce(float), vlps.Range(min=0.0, max=1.0))

DATASET_SCHEMA = vlps.Schema({
	vlps.Optional('source', default='synthetic'): vlps.In(SOURCES),
	vlps.Optional('name', default='synthetic'): vlps.All(str, vlps.Length(min=1)),
	vlps.Optional('image_size', default=16): _POSITIVE_INT,
	vlps.Optional('num_classes', default=10): vlps.All(int, vlps.Range(min=2)),
	vlps.Optional('train_size', default=4000): _POSITIVE_INT,
	vlps.Optional('test_size', default=1000): _POSITIVE_INT,
	vlps.Optional('path', default=''): str,
	vlps.Optional('rho', default=0.9): _UNIT,
	vlps.Optional('noise', default=0.05): vlps.All(vlps.Coerce(float), vlps.Range(min=0.0)),
})

_ZOO_KEYS = tuple(ZooConfig().as_vector())

MODELS_SCHEMA = vlps.Schema({
	vlps.Optional('variants', default=list(VARIANTS)): vlps.All([vlps.In(VARIANTS)], vlps.Length(min=1)),
	vlps.Optional('epochs', default=30): _POSITIVE_INT,
	vlps.Optional('batch_size', default=64): _POSITIVE_INT,
	vlps.Optional('learning_rate', default=1e-3): vlps.All(vlps.Coerce(float), vlps.Range(min=0.0, min_included=False)),
	vlps.Optional('tracking', default=False): bool,
	vlps.Optional('tracking_samples', default=200): _POSITIVE_INT,
	vlps.Optional('save_checkpoints', default=False): bool,
	vlps.Optional('options', default={}): {vlps.In(_ZOO_KEYS): vlps.Any(bool, int, float)},
})

ATTACK_SCHEMA = vlps.Schema({
	vlps.Required('name'): vlps.All(str, vlps.Length(min=1)),
	vlps.Required('family'): vlps.In(FAMILIES),
	vlps.Required('norm'): vlps.In(NORMS),
	vlps.Required('eps'): vlps.All(fraction, vlps.Range(min=0.0)),
	vlps.Optional('steps', default=1): vlps.All(int, vlps.Range(min=0)),
	vlps.Optional('alpha', default=0.0): vlps.All(fraction, vlps.Range(min=0.0)),
	vlps.Optional('random_init', default=False): bool,
	vlps.Optional('c', default=1.0): vlps.All(fraction, vlps.Range(min=0.0)),
	vlps.Optional('kappa', default=0.0): vlps.All(fraction, vlps.Range(min=0.0)),
	vlps.Optional('lr', default=0.01): vlps.All(fraction, vlps.Range(min=0.0, min_included=False)),
})

ATTACKS_SCHEMA = vlps.Schema({
	vlps.Optional('suite', default=[cfg.name for cfg in TABLE_ATTACKS]): [vlps.In(SUITE)],
	vlps.Optional('custom', default=[]): [ATTACK_SCHEMA],
})

METRICS_SCHEMA = vlps.Schema({
	vlps.Optional('max_samples', default=env.MAX_DC_SAMPLES): vlps.All(int, vlps.Range(min=2)),
	vlps.Optional('iob_train_samples', default=2000): vlps.All(int, vlps.Range(min=10)),
	vlps.Optional('batch_size', default=256): _POSITIVE_INT,
	vlps.Optional('iob_max_epochs', default=100): _POSITIVE_INT,
	vlps.Optional('iob_patience', default=40): _POSITIVE_INT,
	vlps.Optional('iob_hidden', default=256): _POSITIVE_INT,
	vlps.Optional('iob_parallel', default=False): bool,
})

OUTPUT_SCHEMA = vlps.Schema({
	vlps.Optional('dir', default=env.RESULTS_DIR): vlps.All(str, vlps.Length(min=1)),
})

EXPERIMENT_SCHEMA = vlps.Schema({
	vlps.Optional('seed', default=env.SEED): vlps.All(int, vlps.Range(min=0)),
	vlps.Optional('workers', default=env.WORKERS): _POSITIVE_INT,
	vlps.Optional('dataset', default={}): vlps.Any([DATASET_SCHEMA], DATASET_SCHEMA),
	vlps.Optional('models', default={}): MODELS_SCHEMA,
	vlps.Optional('attacks', default={}): ATTACKS_SCHEMA,
	vlps.Optional('metrics', default={}): METRICS_SCHEMA,
	vlps.Optional('output', default={}): OUTPUT_SCHEMA,
})


def attack_from_row(row: dict) -> AttackConfig:
	"""One validated custom attack row."""
	try:
		return AttackConfig(
			name=row['name'],
			family=row['family'],
			norm=row['norm'],
			epsilon=row['eps'],
			steps=row['steps'],
			step_size=row['alpha'],
			random_init=row['random_init'],
			cw_c=row['c'],
			cw_kappa=row['kappa'],
			cw_lr=row['lr'],
		)
	except AttackError as e:
		raise ConfigError(f'attacks.custom: {e}') from e


def _dataset_entry(section: dict, seed: int) -> DatasetEntry:
	spec = DatasetSpec(
		source=section['source'],
		name=section['name'],
		image_size=section['image_size'],
		num_classes=section['num_classes'],
		train_size=section['train_size'],
		test_size=section['test_size'],
		seed=seed,
		path=section['path'],
	)
	return DatasetEntry(spec, SyntheticFactors(rho=section['rho'], noise=section['noise']))


def _validated(sub_schema: vlps.Schema, value, section: str):
	# Sections default to {} before their own defaults are filled in.
	try:
		return sub_schema(value)
	except vlps.Invalid as e:
		raise ConfigError(f'{section}: {e}') from e


def build_experiment_config(data: dict, version: str = '') -> ExperimentConfig:
	"""Validates a parsed config mapping and turns it into an ExperimentConfig."""
	try:
		data = EXPERIMENT_SCHEMA(data)
	except vlps.Invalid as e:
		raise ConfigError(f'invalid experiment config: {e}') from e

	seed = data['seed']
	sections = data['dataset'] if isinstance(data['dataset'], list) else [data['dataset']]
	datasets = tuple(_dataset_entry(_validated(DATASET_SCHEMA, s, 'dataset'), seed) for s in sections)
	names = [entry.spec.name for entry in datasets]
	if len(set(names)) != len(names):
		raise ConfigError(f'dataset names must be unique, got {names}')

	models = _validated(MODELS_SCHEMA, data['models'], 'models')
	attacks = _validated(ATTACKS_SCHEMA, data['attacks'], 'attacks')
	metrics = _validated(METRICS_SCHEMA, data['metrics'], 'metrics')
	output = _validated(OUTPUT_SCHEMA, data['output'], 'output')

	attack_configs = tuple(SUITE[name] for name in attacks['suite'])
	attack_configs += tuple(attack_from_row(row) for row in attacks['custom'])
	attack_names = [cfg.name for cfg in attack_configs]
	if len(set(attack_names)) != len(attack_names):
		raise ConfigError(f'attack names must be unique, got {attack_names}')

	iob = IobConfig(
		max_epochs=metrics['iob_max_epochs'],
		patience=metrics['iob_patience'],
		hidden=metrics['iob_hidden'],
		seed=seed,
		parallel=metrics['iob_parallel'],
	)
	return ExperimentConfig(
		datasets=datasets,
		variants=tuple(models['variants']),
		zoo=ZooConfig.from_vector(models['options']),
		budget=TrainingBudget(
			epochs=models['epochs'],
			batch_size=models['batch_size'],
			learning_rate=models['learning_rate'],
			tracking=models['tracking'],
			tracking_samples=models['tracking_samples'],
		),
		attacks=attack_configs,
		measure=MeasureConfig(
			max_samples=metrics['max_samples'],
			iob_train_samples=metrics['iob_train_samples'],
			batch_size=metrics['batch_size'],
			seed=seed,
			iob=iob,
		),
		seed=seed,
		workers=data['workers'],
		out_dir=output['dir'],
		save_checkpoints=models['save_checkpoints'],
		version=version,
	)


def load_experiment_config(path: str, version: str = '', defaults: Optional[dict] = None) -> ExperimentConfig:
	"""Reads and validates a TOML config; top-level keys in `defaults` fill what the file leaves out.

	A missing file raises FileNotFoundError.
	"""
	with open(path, 'rb') as file:
		try:
			data = tomllib.load(file)
		except tomllib.TOMLDecodeError as e:
			raise ConfigError(f'{path}: {e}') from e
	return build_experiment_config({**(defaults or {}), **data}, version)
