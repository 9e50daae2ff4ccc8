# -*- coding: utf-8 -*-
"""Distance covariance and distance correlation.

Distances are Euclidean on flattened samples. Centered matrices follow
A_ij = a_ij - mean_i. - mean_.j + mean_.. and dCov is the square root of
the mean of A * B (a V-statistic, no bias correction).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from app.modules.metrics.common import MetricsError, SignalBatch, paired_n

# Centering tolerance on row/column means.
CENTER_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DistanceMatrix:
	values: np.ndarray
	centered: bool = False

	@property
	def n(self) -> int:
		return self.values.shape[0]


def pairwise_distances(batch: SignalBatch) -> DistanceMatrix:
	"""Euclidean distances between all sample pairs; symmetric, zero diagonal."""
	values = squareform(pdist(batch.flat(), metric='euclidean'))
	return DistanceMatrix(values, centered=False)


def double_center(matrix: DistanceMatrix) -> DistanceMatrix:
	values = matrix.values
	row_means = values.mean(axis=1, keepdims=True)
	col_means = values.mean(axis=0, keepdims=True)
	centered = values - row_means - col_means + values.mean()
	return DistanceMatrix(centered, centered=True)


def distance_covariance(a: DistanceMatrix, b: DistanceMatrix) -> float:
	"""sqrt(max(0, mean(A * B))) for two double-centered matrices."""
	if not (a.centered and b.centered):
		raise MetricsError('distance_covariance expects double-centered matrices')
	if a.values.shape != b.values.shape:
		raise MetricsError(f'distance matrices differ in size: {a.n} and {b.n}')
	# Centering can leave the mean slightly negative (about -1e-15).
	return float(np.sqrt(max(0.0, float(np.mean(a.values * b.values)))))


def subsample_indices(n: int, max_samples: Optional[int], rng: Optional[np.random.Generator]) -> np.ndarray:
	"""Seeded uniform subsample (sorted, so paired order is kept)."""
	if max_samples is None or n <= max_samples:
		return np.arange(n)
	if rng is None:
		raise MetricsError('subsampling needs a random generator')
	return np.sort(rng.choice(n, size=max_samples, replace=False))


def distance_correlation(
	u: SignalBatch,
	v: SignalBatch,
	max_samples: Optional[int] = None,
	rng: Optional[np.random.Generator] = None
) -> float:
	"""dCov(U, V) / sqrt(dCov(U, U) * dCov(V, V)), in [0, 1].

	A constant batch has zero distance variance; the result is then 0.
	"""
	n = paired_n(u, v)
	if n < 2:
		raise MetricsError(f'distance correlation needs at least 2 samples, got {n}')
	indices = subsample_indices(n, max_samples, rng)
	if indices.size != n:
		u, v = u.take(indices), v.take(indices)

	a = double_center(pairwise_distances(u))
	b = double_center(pairwise_distances(v))
	dcov_uv = distance_covariance(a, b)
	denominator = np.sqrt(distance_covariance(a, a) * distance_covariance(b, b))
	if denominator == 0.0:
		return 0.0
	return float(min(1.0, dcov_uv / denominator))
