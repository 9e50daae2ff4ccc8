# -*- coding: utf-8 -*-
"""Clean versus attacked accuracy of one model on one test split.

  Δ_abs = a_c - mean a_p,  Δ_rel = Δ_abs / a_c
"""
from dataclasses import dataclass, field
import logging
from typing import Sequence

import numpy as np

from app.modules.attacks import AttackConfig, attack_dataset
from app.modules.attacks.common import Classifier, predict
from app.modules.harness.common import HarnessError, stage_int
from app.modules.harness.datasets import Dataset

logger = logging.getLogger(__name__)

CSV_HEADER = ('model', 'dataset', 'clean_accuracy', 'attack', 'accuracy', 'mean_adversarial', 'delta_abs', 'delta_rel')


@dataclass(frozen=True)
class RobustnessRecord:
	model: str
	dataset: str
	clean_accuracy: float
	# Attack name -> accuracy on the perturbed test split, in run order.
	attack_accuracy: dict = field(default_factory=dict)

	def __post_init__(self):
		for name, value in (('clean', self.clean_accuracy), *self.attack_accuracy.items()):
			if not 0.0 <= value <= 1.0:
				raise HarnessError(f'{self.model}/{self.dataset}: {name} accuracy {value} outside [0, 1]')

	@property
	def mean_adversarial(self) -> float:
		if not self.attack_accuracy:
			return self.clean_accuracy
		return float(np.mean(list(self.attack_accuracy.values())))

	@property
	def delta_abs(self) -> float:
		return self.clean_accuracy - self.mean_adversarial

	@property
	def delta_rel(self) -> float:
		# Undefined for a model that is never right; reported as no drop.
		if self.clean_accuracy == 0:
			return 0.0
		return self.delta_abs / self.clean_accuracy

	def to_rows(self) -> list:
		"""One CSV row per attack; the summary columns repeat on each."""
		summary = [f'{self.mean_adversarial:.6f}', f'{self.delta_abs:.6f}', f'{self.delta_rel:.6f}']
		return [
			[self.model, self.dataset, f'{self.clean_accuracy:.6f}', name, f'{value:.6f}', *summary]
			for name, value in self.attack_accuracy.items()
		]

	def to_dict(self) -> dict:
		return {
			'model': self.model,
			'dataset': self.dataset,
			'clean_accuracy': self.clean_accuracy,
			'attack_accuracy': dict(self.attack_accuracy),
			'mean_adversarial': self.mean_adversarial,
			'delta_abs': self.delta_abs,
			'delta_rel': self.delta_rel,
		}


def clean_accuracy(model: Classifier, data: Dataset, batch_size: int = 256) -> float:
	if not len(data):
		raise HarnessError(f'{data.name}: empty split')
	predicted = np.concatenate([
		predict(model, data.images[start:start + batch_size]) for start in range(0, len(data), batch_size)
	])
	return float(np.mean(predicted == data.labels))


def evaluate_robustness(
	model: Classifier,
	test: Dataset,
	attacks: Sequence[AttackConfig],
	seed: int = 0,
	workers: int = 1,
	model_id: str = 'model'
) -> RobustnessRecord:
	"""Runs every attack over the whole test split."""
	if not attacks:
		raise HarnessError('robustness evaluation needs at least one attack')
	a_c = clean_accuracy(model, test)
	accuracy = {}
	for cfg in attacks:
		result = attack_dataset(
			model, test.images, test.labels, cfg, seed=stage_int(seed, 'attack', model_id, test.name, cfg.name), workers=workers
		)
		accuracy[cfg.name] = float(1.0 - np.mean(result.success))
		if result.projected is not None and result.projected.any():
			logger.info('%s: %s projected %d/%d CW perturbations onto the ε-ball', model_id, cfg.name, int(result.projected.sum()), len(test))
		logger.info('%s/%s: %s accuracy %.4f (clean %.4f)', model_id, test.name, cfg.name, accuracy[cfg.name], a_c)
	return RobustnessRecord(model=model_id, dataset=test.name, clean_accuracy=a_c, attack_accuracy=accuracy)
