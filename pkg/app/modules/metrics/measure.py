# -*- coding: utf-8 -*-
"""The five disentanglement measurements of a (model, dataset) pair.

  M1 = 1 - DC(C, S)     causal/confounder separation
  M2 = DC(X, C)         input/causal correlation
  M3 = DC(X, S)         input/confounder correlation
  M4 = 1 - BoI(X, C)    pixel information in the causal signal
  M5 = 1 - BoI(X, S)    pixel information in the confounder signal

DC values use the test split (subsampled to `max_samples`). IoB decoders are
fitted on taps of the training split and evaluated on the test split only.
"""
from dataclasses import dataclass, field
import logging
from typing import Optional, Protocol

import numpy as np

from app.modules.metrics.common import SignalBatch
from app.modules.metrics.distance import distance_correlation, subsample_indices
from app.modules.metrics.iob import IobConfig, boi, iob, train_iob_decoders

logger = logging.getLogger(__name__)

CSV_HEADER = ('model', 'dataset', 'n', 'm1', 'm2', 'm3', 'm4', 'm5')


class TapsLike(Protocol):
	x: np.ndarray
	c: np.ndarray
	s: np.ndarray


class TapSource(Protocol):
	"""Anything that yields paired (x, c, s) for a batch of inputs."""

	def taps(self, x: np.ndarray, y: np.ndarray) -> TapsLike:
		...


class LabelledImages(Protocol):
	images: np.ndarray
	labels: np.ndarray


@dataclass(frozen=True)
class MeasureConfig:
	max_samples: int = 2000
	iob_train_samples: int = 2000
	batch_size: int = 256
	seed: int = 0
	iob: IobConfig = field(default_factory=IobConfig)


def _clamp(value: float) -> float:
	return float(min(1.0, max(0.0, value)))


@dataclass(frozen=True)
class MeasurementRecord:
	model: str
	dataset: str
	n: int
	m1: float
	m2: float
	m3: float
	m4: float
	m5: float

	def __post_init__(self):
		for name in ('m1', 'm2', 'm3', 'm4', 'm5'):
			object.__setattr__(self, name, _clamp(getattr(self, name)))

	def values(self) -> tuple:
		return self.m1, self.m2, self.m3, self.m4, self.m5

	def to_row(self) -> list:
		return [self.model, self.dataset, str(self.n)] + [f'{v:.6f}' for v in self.values()]

	def to_dict(self) -> dict:
		return dict(zip(CSV_HEADER, [self.model, self.dataset, self.n, *self.values()]))


def extract_signals(
	source: TapSource,
	images: np.ndarray,
	labels: np.ndarray,
	batch_size: int = 256
) -> tuple:
	"""Runs the taps over `images` in batches; returns (X, C, S) batches."""
	xs, cs, ss = [], [], []
	for start in range(0, images.shape[0], batch_size):
		taps = source.taps(images[start:start + batch_size], labels[start:start + batch_size])
		xs.append(np.asarray(taps.x))
		cs.append(np.asarray(taps.c))
		ss.append(np.asarray(taps.s))
	return (
		SignalBatch('X', np.concatenate(xs)),
		SignalBatch('C', np.concatenate(cs)),
		SignalBatch('S', np.concatenate(ss)),
	)


def separation(
	source: TapSource,
	data: LabelledImages,
	max_samples: int = 2000,
	rng: Optional[np.random.Generator] = None,
	batch_size: int = 256
) -> float:
	"""M1 alone; used per epoch while tracking a training run."""
	rng = np.random.default_rng(0) if rng is None else rng
	idx = subsample_indices(data.labels.shape[0], max_samples, rng)
	_, c, s = extract_signals(source, data.images[idx], data.labels[idx], batch_size)
	return _clamp(1.0 - distance_correlation(c, s))


def measure_all(
	source: TapSource,
	train: LabelledImages,
	test: LabelledImages,
	config: MeasureConfig = MeasureConfig(),
	model_id: str = 'model',
	dataset_id: str = 'dataset'
) -> MeasurementRecord:
	"""Computes M1-M5 for one model on one dataset."""
	seed_seq = np.random.SeedSequence(config.seed)
	test_rng, train_rng = (np.random.default_rng(s) for s in seed_seq.spawn(2))

	test_idx = subsample_indices(test.labels.shape[0], config.max_samples, test_rng)
	x_test, c_test, s_test = extract_signals(source, test.images[test_idx], test.labels[test_idx], config.batch_size)

	dc_cs = distance_correlation(c_test, s_test)
	dc_xc = distance_correlation(x_test, c_test)
	dc_xs = distance_correlation(x_test, s_test)

	train_idx = subsample_indices(train.labels.shape[0], config.iob_train_samples, train_rng)
	x_train, c_train, s_train = extract_signals(
		source, train.images[train_idx], train.labels[train_idx], config.batch_size
	)
	iob_values = {}
	for signal_train, signal_test in ((c_train, c_test), (s_train, s_test)):
		pair = train_iob_decoders(x_train, signal_train, config.iob)
		held_out = iob(x_test, signal_test, pair)
		# Reported for the leakage guard only; never stored in the record.
		on_train = iob(x_train, signal_train, pair)
		logger.info(
			'%s/%s IoB(X,%s): held-out %.4f (n=%d), train %.4f (n=%d)',
			model_id, dataset_id, signal_test.name, held_out, x_test.n, on_train, x_train.n
		)
		iob_values[signal_test.name] = held_out

	record = MeasurementRecord(
		model=model_id,
		dataset=dataset_id,
		n=int(test_idx.size),
		m1=1.0 - dc_cs,
		m2=dc_xc,
		m3=dc_xs,
		m4=1.0 - boi(iob_values['C']),
		m5=1.0 - boi(iob_values['S']),
	)
	logger.info('%s/%s measurements: %s', model_id, dataset_id, ' '.join(f'{v:.3f}' for v in record.values()))
	return record
