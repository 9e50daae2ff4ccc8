# -*- coding: utf-8 -*-
"""Metrics common stuff: exceptions and the signal containers.
"""
from dataclasses import dataclass

import numpy as np

# Names of the measured signals: input, causal, confounder.
SIGNAL_NAMES = ('X', 'C', 'S')


class MetricsError(Exception):
	"""Base class for all measurement errors."""
	pass


class IobError(MetricsError):
	pass


@dataclass(frozen=True)
class SignalBatch:
	"""N samples of one named signal; the leading axis indexes samples."""
	name: str
	samples: np.ndarray

	def __post_init__(self):
		if self.name not in SIGNAL_NAMES:
			raise MetricsError(f'unknown signal {self.name!r}, expected one of {SIGNAL_NAMES}')
		samples = np.asarray(self.samples, dtype=np.float64)
		if samples.ndim == 1:
			samples = samples[:, None]
		if samples.shape[0] < 2:
			raise MetricsError(f'signal {self.name} needs at least 2 samples, got {samples.shape[0]}')
		object.__setattr__(self, 'samples', samples)

	@classmethod
	def from_samples(cls, name: str, samples: list) -> 'SignalBatch':
		"""Stacks per-sample arrays, rejecting mismatched shapes."""
		shapes = {np.shape(sample) for sample in samples}
		if len(shapes) > 1:
			raise MetricsError(f'signal {name}: samples have mismatched shapes {sorted(shapes)}')
		return cls(name, np.stack([np.asarray(s, dtype=np.float64) for s in samples]))

	@property
	def n(self) -> int:
		return self.samples.shape[0]

	def flat(self) -> np.ndarray:
		return self.samples.reshape(self.n, -1)

	def take(self, indices: np.ndarray) -> 'SignalBatch':
		return SignalBatch(self.name, self.samples[indices])


def paired_n(u: SignalBatch, v: SignalBatch) -> int:
	if u.n != v.n:
		raise MetricsError(f'paired signals differ in size: {u.name}={u.n}, {v.name}={v.n}')
	return u.n
