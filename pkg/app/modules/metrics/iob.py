# -*- coding: utf-8 -*-
"""Information over Bias: how much better x is reconstructed from a signal z
than from a constant dummy input.

Two decoders of identical architecture and budget are trained: one on z, one
on the all-ones vector of z's flattened length. IoB is the per-sample ratio
MSE(x_i, g_ones(1)) / MSE(x_i, g_z(z_i)) averaged over the evaluation set;
an uninformative z gives about 1.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np

from app.modules.autograd import Tensor, backward, no_grad, ops, tape_scope
from app.modules.autograd.nn import MLP
from app.modules.autograd.optim import OptimizerState, adam_step
from app.modules.metrics.common import IobError, SignalBatch, paired_n

logger = logging.getLogger(__name__)

# Decoders need enough pairs for a validation split.
MIN_SAMPLES = 10


@dataclass(frozen=True)
class IobConfig:
	max_epochs: int = 100
	patience: int = 40
	val_fraction: float = 0.2
	hidden: int = 256
	batch_size: int = 64
	learning_rate: float = 1e-3
	seed: int = 0
	# Train the two decoders of a pair on two threads.
	parallel: bool = False


@dataclass
class DecoderLog:
	epochs: int = 0
	best_epoch: int = 0
	best_val_mse: float = float('inf')
	val_mse: list = field(default_factory=list)


@dataclass
class IobDecoderPair:
	decoder_z: MLP
	decoder_ones: MLP
	log_z: DecoderLog
	log_ones: DecoderLog
	# Indices (into the training pairs) used for fitting; kept for leakage checks.
	train_indices: np.ndarray
	val_indices: np.ndarray

	def predict(self, z: SignalBatch) -> tuple:
		"""Reconstructions from z and from the dummy input, flattened."""
		flat = z.flat()
		with no_grad():
			from_z = self.decoder_z(Tensor(flat)).data
			from_ones = self.decoder_ones(Tensor(np.ones_like(flat))).data
		return from_z, from_ones


def _train_decoder(
	inputs: np.ndarray,
	targets: np.ndarray,
	train_idx: np.ndarray,
	val_idx: np.ndarray,
	config: IobConfig,
	seed_seq: np.random.SeedSequence,
	label: str
) -> tuple:
	init_rng, shuffle_rng = (np.random.default_rng(s) for s in seed_seq.spawn(2))
	decoder = MLP(inputs.shape[1], config.hidden, targets.shape[1], init_rng)
	params = decoder.parameters()
	state = OptimizerState.create('adam', params, config.learning_rate)
	log = DecoderLog()
	best_state = decoder.state_dict()
	val_x, val_y = Tensor(inputs[val_idx]), Tensor(targets[val_idx])

	for epoch in range(1, config.max_epochs + 1):
		order = shuffle_rng.permutation(train_idx)
		for start in range(0, order.size, config.batch_size):
			batch = order[start:start + config.batch_size]
			decoder.zero_grad()
			with tape_scope():
				backward(ops.mse(decoder(Tensor(inputs[batch])), Tensor(targets[batch])))
			adam_step(params, None, state)

		with no_grad():
			val_mse = ops.mse(decoder(val_x), val_y).item()
		log.epochs = epoch
		log.val_mse.append(val_mse)
		if val_mse < log.best_val_mse:
			log.best_val_mse, log.best_epoch = val_mse, epoch
			best_state = decoder.state_dict()
		elif epoch - log.best_epoch >= config.patience:
			logger.debug('IoB decoder %s: early stop at epoch %d (best %d)', label, epoch, log.best_epoch)
			break

	decoder.load_state_dict(best_state)
	return decoder, log


def train_iob_decoders(x: SignalBatch, z: SignalBatch, config: IobConfig) -> IobDecoderPair:
	"""Fits the signal decoder and the bias decoder on paired (x, z)."""
	n = paired_n(x, z)
	if n < MIN_SAMPLES:
		raise IobError(f'IoB decoders need at least {MIN_SAMPLES} samples, got {n}')

	seed_seq = np.random.SeedSequence(config.seed)
	split_seq, z_seq, ones_seq = seed_seq.spawn(3)
	order = np.random.default_rng(split_seq).permutation(n)
	n_val = max(1, int(round(config.val_fraction * n)))
	val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])

	targets = x.flat()
	inputs_z = z.flat()
	inputs_ones = np.ones_like(inputs_z)
	jobs = (
		(inputs_z, targets, train_idx, val_idx, config, z_seq, f'{z.name}'),
		(inputs_ones, targets, train_idx, val_idx, config, ones_seq, 'ones'),
	)
	if config.parallel:
		with ThreadPoolExecutor(max_workers=2) as pool:
			(decoder_z, log_z), (decoder_ones, log_ones) = pool.map(lambda job: _train_decoder(*job), jobs)
	else:
		(decoder_z, log_z), (decoder_ones, log_ones) = (_train_decoder(*job) for job in jobs)

	logger.debug(
		'IoB decoders for %s: val mse %.6f (signal) vs %.6f (ones)',
		z.name, log_z.best_val_mse, log_ones.best_val_mse
	)
	return IobDecoderPair(decoder_z, decoder_ones, log_z, log_ones, train_idx, val_idx)


def iob(x: SignalBatch, z: SignalBatch, pair: IobDecoderPair) -> float:
	"""Mean per-sample ratio of bias-decoder MSE to signal-decoder MSE."""
	paired_n(x, z)
	targets = x.flat()
	from_z, from_ones = pair.predict(z)
	mse_z = np.mean((targets - from_z) ** 2, axis=1)
	mse_ones = np.mean((targets - from_ones) ** 2, axis=1)
	perfect = np.flatnonzero(mse_z == 0.0)
	if perfect.size:
		raise IobError(f'signal decoder reconstructs sample {int(perfect[0])} perfectly (zero MSE)')
	return float(np.mean(mse_ones / mse_z))


def boi(iob_value: float) -> float:
	"""Bias over Information, the reciprocal of IoB."""
	if iob_value <= 0:
		raise IobError(f'IoB must be positive, got {iob_value}')
	return 1.0 / iob_value
