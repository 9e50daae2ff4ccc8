# -*- coding: utf-8 -*-
"""Module with validation schemas for command flags.

tornado.options already checks flag types; these schemas check ranges and
required values. Unlisted keys (tornado's logging flags) pass through.
"""
import voluptuous as vlps

from app.modules.attacks import SUITE
from app.modules.modelzoo import VARIANTS

_POSITIVE_INT = vlps.All(int, vlps.Range(min=1))
_REQUIRED_PATH = vlps.All(str, vlps.Length(min=1))

SEED = {vlps.Required('seed'): vlps.All(int, vlps.Range(min=0))}

# Shared by every command that loads a dataset.
DATASET = {
	vlps.Required('dataset'): _REQUIRED_PATH,
	vlps.Required('name'): str,
	vlps.Required('image_size'): _POSITIVE_INT,
	vlps.Required('num_classes'): vlps.All(int, vlps.Range(min=2)),
	vlps.Required('train_size'): _POSITIVE_INT,
	vlps.Required('test_size'): _POSITIVE_INT,
	vlps.Required('rho'): vlps.All(float, vlps.Range(min=0.0, max=1.0)),
	vlps.Required('noise'): vlps.All(float, vlps.Range(min=0.0)),
}

OUT = {vlps.Required('out'): vlps.All(str, vlps.Length(min=1, msg='--out is required'))}

CHECKPOINT = {vlps.Required('checkpoint'): vlps.All(str, vlps.Length(min=1, msg='--checkpoint is required'))}


def _schema(*parts: dict) -> vlps.Schema:
	merged = {}
	for part in parts:
		merged.update(part)
	return vlps.Schema(merged, extra=vlps.ALLOW_EXTRA)


GEN_DATA_SCHEMA = _schema(SEED, DATASET, OUT)

TRAIN_SCHEMA = _schema(SEED, DATASET, OUT, {
	vlps.Required('model'): vlps.In(VARIANTS, msg=f'--model must be one of {", ".join(VARIANTS)}'),
	vlps.Required('epochs'): _POSITIVE_INT,
	vlps.Required('batch_size'): _POSITIVE_INT,
	vlps.Required('learning_rate'): vlps.All(float, vlps.Range(min=0.0, min_included=False)),
	vlps.Required('tracking'): bool,
	vlps.Required('tracking_samples'): _POSITIVE_INT,
})

MEASURE_SCHEMA = _schema(SEED, DATASET, OUT, CHECKPOINT, {
	vlps.Required('max_samples'): vlps.All(int, vlps.Range(min=2)),
	vlps.Required('iob_train_samples'): vlps.All(int, vlps.Range(min=10)),
	vlps.Required('iob_max_epochs'): _POSITIVE_INT,
	vlps.Required('iob_patience'): _POSITIVE_INT,
})

ATTACK_SCHEMA = _schema(SEED, DATASET, OUT, CHECKPOINT, {
	vlps.Required('attack'): vlps.All(
		[vlps.In(SUITE, msg=f'--attack names one of {", ".join(SUITE)}')],
		vlps.Length(min=1, msg='--attack needs at least one name'),
	),
	vlps.Required('workers'): _POSITIVE_INT,
})

CORRELATE_SCHEMA = _schema(OUT, {
	vlps.Required('measurements'): vlps.All(str, vlps.Length(min=1, msg='--measurements is required')),
	vlps.Required('robustness'): vlps.All(str, vlps.Length(min=1, msg='--robustness is required')),
})

RUN_SCHEMA = _schema(SEED, {
	vlps.Required('config'): vlps.All(str, vlps.Length(min=1, msg='--config is required')),
	vlps.Required('out'): str,
	# 0 keeps the config's value.
	vlps.Required('workers'): vlps.All(int, vlps.Range(min=0)),
})
