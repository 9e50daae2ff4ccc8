# -*- coding: utf-8 -*-
"""Training loop: Adam over shuffled mini-batches, best-validation restore.

In tracking mode every epoch additionally records M1 = 1 - DC(C, S) on the
validation split and the PGD40 (linf) accuracy on a fixed validation subset.
"""
from dataclasses import asdict, dataclass, field
import logging
from typing import Callable, Optional

import numpy as np

from app.modules.attacks import SUITE, attack_dataset
from app.modules.attacks.suite import TRACKING_ATTACK
from app.modules.autograd import AutogradError, backward, tape_scope
from app.modules.autograd.optim import OptimizerState, adam_step
from app.modules.harness.common import HarnessError, TrainingDivergedError, stage_int, stage_rng
from app.modules.harness.datasets import Dataset
from app.modules.harness.robustness import clean_accuracy
from app.modules.metrics import separation
from app.modules.modelzoo import CausalModel, ZooConfig, build_model

logger = logging.getLogger(__name__)

TRACKING_HEADER = ('model', 'dataset', 'epoch', 'm1', 'clean_accuracy', 'pgd40_accuracy')


@dataclass(frozen=True)
class TrainingBudget:
	epochs: int = 30
	batch_size: int = 64
	learning_rate: float = 1e-3
	tracking: bool = False
	# Validation samples used for the per-epoch tracking series.
	tracking_samples: int = 200

	def __post_init__(self):
		if self.epochs < 1:
			raise HarnessError(f'training budget needs at least one epoch, got {self.epochs}')
		if self.batch_size < 1:
			raise HarnessError(f'batch size must be positive, got {self.batch_size}')


@dataclass
class EpochRecord:
	epoch: int
	loss: float
	val_accuracy: float
	m1: Optional[float] = None
	adversarial_accuracy: Optional[float] = None


@dataclass
class TrainingResult:
	model: CausalModel
	best_epoch: int
	log: list = field(default_factory=list)

	def log_dicts(self) -> list:
		return [asdict(record) for record in self.log]

	def tracking_rows(self, model_id: str, dataset_id: str) -> list:
		return [
			[model_id, dataset_id, str(r.epoch), f'{r.m1:.6f}', f'{r.val_accuracy:.6f}', f'{r.adversarial_accuracy:.6f}']
			for r in self.log if r.m1 is not None
		]


def _train_epoch(
	model: CausalModel,
	train: Dataset,
	state: OptimizerState,
	budget: TrainingBudget,
	rng: np.random.Generator,
	epoch: int,
	on_step: Optional[Callable[[int, CausalModel], None]] = None
) -> float:
	params = model.parameters()
	order = rng.permutation(len(train))
	losses = []
	for start in range(0, len(train), budget.batch_size):
		indices = order[start:start + budget.batch_size]
		x, y = train.images[indices], train.labels[indices]
		with tape_scope():
			try:
				model.zero_grad()
				loss = model.training_loss(x, y, rng, indices)
				value = loss.item()
				if not np.isfinite(value):
					raise TrainingDivergedError(epoch)
				backward(loss)
			except AutogradError as e:
				raise TrainingDivergedError(epoch, str(e)) from e
		adam_step(params, None, state)
		model.after_step(x, y, rng)
		if on_step is not None:
			on_step(epoch, model)
		losses.append(value)
	return float(np.mean(losses))


def _track(model: CausalModel, val: Dataset, budget: TrainingBudget, seed: int, epoch: int) -> tuple:
	subset = val.subset(np.arange(min(len(val), budget.tracking_samples)))
	m1 = separation(model, subset, max_samples=budget.tracking_samples, rng=stage_rng(seed, 'tracking', epoch))
	result = attack_dataset(
		model, subset.images, subset.labels, SUITE[TRACKING_ATTACK], seed=stage_int(seed, 'tracking-attack', epoch)
	)
	return m1, float(1.0 - np.mean(result.success))


def train_model(
	variant: str,
	train: Dataset,
	val: Dataset,
	budget: TrainingBudget = TrainingBudget(),
	seed: int = 0,
	config: ZooConfig = ZooConfig(),
	on_step: Optional[Callable[[int, CausalModel], None]] = None
) -> TrainingResult:
	"""Trains a fresh `variant` model; returns the epoch with the best clean validation accuracy.

	`on_step(epoch, model)` runs after every optimizer step.
	"""
	model = build_model(variant, train.image_shape, train.num_classes, config, stage_int(seed, 'init', variant))
	state = OptimizerState.create('adam', model.parameters(), budget.learning_rate)
	rng = stage_rng(seed, 'train', variant)
	log = []
	best_accuracy, best_epoch, best_state = -1.0, 0, None

	for epoch in range(1, budget.epochs + 1):
		model.on_epoch_start(epoch, train.images, train.labels, rng)
		loss = _train_epoch(model, train, state, budget, rng, epoch, on_step)
		record = EpochRecord(epoch=epoch, loss=loss, val_accuracy=clean_accuracy(model, val))
		if budget.tracking:
			record.m1, record.adversarial_accuracy = _track(model, val, budget, seed, epoch)
		log.append(record)
		if record.val_accuracy > best_accuracy:
			best_accuracy, best_epoch, best_state = record.val_accuracy, epoch, model.state_dict()
		logger.info(
			'%s/%s epoch %d/%d: loss %.4f, val acc %.4f (best %.4f @ %d)',
			variant, train.name, epoch, budget.epochs, loss, record.val_accuracy, best_accuracy, best_epoch
		)

	model.load_state_dict(best_state)
	return TrainingResult(model=model, best_epoch=best_epoch, log=log)
