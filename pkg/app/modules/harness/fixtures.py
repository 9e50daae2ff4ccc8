# -*- coding: utf-8 -*-
"""Published reference numbers and the correlation check built on them.

Twelve (dataset, model) cells: four models on MNIST, CIFAR10 and CIFAR100.
Accuracies are in percent. Only Δ_rel is published per cell; Δ_abs is
reconstructed as clean - mean a_p. The correlation table prints p only for
significant entries.
"""
from dataclasses import dataclass
from typing import Optional

from app.modules.attacks import TABLE_ATTACKS
from app.modules.harness.statistics import CorrelationResult, pearson

MODELS = ('CAMA', 'CaaM', 'CausalAdv', 'DICE')
DATASETS = ('MNIST', 'CIFAR10', 'CIFAR100')

MEASUREMENTS = ('m1', 'm2', 'm3', 'm4', 'm5')
MEASUREMENT_LABELS = {
	'm1': '1-DC(C,S)',
	'm2': 'DC(X,C)',
	'm3': 'DC(X,S)',
	'm4': '1-BoI(X,C)',
	'm5': '1-BoI(X,S)',
}
TARGETS = ('clean', 'adversarial', 'delta_abs', 'delta_rel')
TARGET_LABELS = {
	'clean': 'Clean acc.',
	'adversarial': 'Adv acc.',
	'delta_abs': 'Δabs',
	'delta_rel': 'Δrel',
}

# The attack rows the robustness numbers were measured with.
ATTACKS = tuple(cfg.name for cfg in TABLE_ATTACKS)

# pylint: disable=bad-whitespace
# (dataset, model) -> (clean %, mean a_p %, Δ_rel %)
ACCURACY = {
	('MNIST',    'CAMA'):      (95.6, 81.8, 14.5),
	('MNIST',    'CaaM'):      (99.6, 18.3, 81.7),
	('MNIST',    'CausalAdv'): (99.3, 97.4,  1.9),
	('MNIST',    'DICE'):      (99.1, 97.0,  2.1),
	('CIFAR10',  'CAMA'):      (35.1, 23.3, 33.6),
	('CIFAR10',  'CaaM'):      (83.6,  4.5, 94.6),
	('CIFAR10',  'CausalAdv'): (80.5, 45.4, 43.6),
	('CIFAR10',  'DICE'):      (79.3, 39.7, 49.9),
	('CIFAR100', 'CAMA'):      (15.2,  9.2, 39.3),
	('CIFAR100', 'CaaM'):      (54.7,  1.7, 96.8),
	('CIFAR100', 'CausalAdv'): (52.4, 23.7, 54.8),
	('CIFAR100', 'DICE'):      (52.1, 22.3, 57.2),
}

# (dataset, model) -> (M1, M2, M3, M4, M5)
METRICS = {
	('MNIST',    'CAMA'):      (0.916, 0.689, 0.508, 0.215, 0.115),
	('MNIST',    'CaaM'):      (0.016, 0.692, 0.689, 0.505, 0.529),
	('MNIST',    'CausalAdv'): (0.715, 0.681, 0.209, 0.069, 0.002),
	('MNIST',    'DICE'):      (0.743, 0.692, 0.296, 0.495, 0.060),
	('CIFAR10',  'CAMA'):      (0.930, 0.331, 0.808, 0.042, 0.507),
	('CIFAR10',  'CaaM'):      (0.064, 0.427, 0.441, 0.403, 0.441),
	('CIFAR10',  'CausalAdv'): (0.845, 0.420, 0.092, 0.184, 0.015),
	('CIFAR10',  'DICE'):      (0.332, 0.528, 0.705, 0.432, 0.385),
	('CIFAR100', 'CAMA'):      (0.905, 0.307, 0.816, 0.212, 0.481),
	('CIFAR100', 'CaaM'):      (0.315, 0.416, 0.349, 0.336, 0.409),
	('CIFAR100', 'CausalAdv'): (0.896, 0.470, 0.083, 0.317, 0.002),
	('CIFAR100', 'DICE'):      (0.196, 0.681, 0.761, 0.438, 0.382),
}

# (target, measurement) -> (r, printed p or None, significant)
CORRELATIONS = {
	('clean',       'm1'): (-0.275, None,  False),
	('clean',       'm2'): ( 0.741, 0.006, True),
	('clean',       'm3'): (-0.410, None,  False),
	('clean',       'm4'): ( 0.299, None,  False),
	('clean',       'm5'): (-0.430, None,  False),
	('adversarial', 'm1'): ( 0.429, None,  False),
	('adversarial', 'm2'): ( 0.638, 0.026, True),
	('adversarial', 'm3'): (-0.377, None,  False),
	('adversarial', 'm4'): (-0.189, None,  False),
	('adversarial', 'm5'): (-0.725, 0.008, True),
	('delta_abs',   'm1'): (-0.820, 0.001, True),
	('delta_abs',   'm2'): (-0.048, None,  False),
	('delta_abs',   'm3'): ( 0.056, None,  False),
	('delta_abs',   'm4'): ( 0.543, None,  False),
	('delta_abs',   'm5'): ( 0.476, None,  False),
	('delta_rel',   'm1'): (-0.720, 0.008, True),
	('delta_rel',   'm2'): (-0.343, None,  False),
	('delta_rel',   'm3'): ( 0.135, None,  False),
	('delta_rel',   'm4'): ( 0.437, None,  False),
	('delta_rel',   'm5'): ( 0.597, 0.040, True),
}
# pylint: enable=bad-whitespace

R_TOLERANCE = 0.03


def cells() -> list:
	return [(dataset, model) for dataset in DATASETS for model in MODELS]


def target_series() -> dict:
	"""Per-target values over the twelve cells, in `cells()` order."""
	series = {target: [] for target in TARGETS}
	for cell in cells():
		clean, adversarial, delta_rel = ACCURACY[cell]
		series['clean'].append(clean)
		series['adversarial'].append(adversarial)
		series['delta_abs'].append(clean - adversarial)
		series['delta_rel'].append(delta_rel)
	return series


def measurement_series() -> dict:
	return {name: [METRICS[cell][i] for cell in cells()] for i, name in enumerate(MEASUREMENTS)}


@dataclass(frozen=True)
class FixtureComparison:
	computed: CorrelationResult
	published_r: float
	published_p: Optional[float]
	published_significant: bool

	@property
	def r_error(self) -> float:
		return abs(self.computed.r - self.published_r)

	@property
	def matches(self) -> bool:
		return self.r_error <= R_TOLERANCE and self.computed.significant == self.published_significant


def paper_table_check() -> list:
	"""Recomputes every published correlation from the published per-cell numbers."""
	targets = target_series()
	measurements = measurement_series()
	out = []
	for target in TARGETS:
		for measurement in MEASUREMENTS:
			r, p, significant = CORRELATIONS[(target, measurement)]
			computed = pearson(measurements[measurement], targets[target], measurement, target)
			out.append(FixtureComparison(computed, r, p, significant))
	return out
