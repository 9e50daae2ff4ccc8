# -*- coding: utf-8 -*-
from types import SimpleNamespace

import numpy as np
import pytest

from app.modules.metrics import (
	IobConfig,
	IobError,
	MeasureConfig,
	MeasurementRecord,
	MetricsError,
	SignalBatch,
	boi,
	distance_correlation,
	distance_covariance,
	double_center,
	iob,
	measure_all,
	pairwise_distances,
	separation,
	train_iob_decoders,
)
from app.modules.metrics.distance import DistanceMatrix

# Small decoders that still separate informative from uninformative signals.
FAST_IOB = IobConfig(max_epochs=80, patience=15, hidden=64, learning_rate=1e-2, seed=3)


def _naive_dcov(u: np.ndarray, v: np.ndarray) -> float:
	n = u.shape[0]
	a = np.array([[np.linalg.norm(u[i] - u[j]) for j in range(n)] for i in range(n)])
	b = np.array([[np.linalg.norm(v[i] - v[j]) for j in range(n)] for i in range(n)])
	total = 0.0
	for i in range(n):
		for j in range(n):
			big_a = a[i, j] - a[i, :].mean() - a[:, j].mean() + a.mean()
			big_b = b[i, j] - b[i, :].mean() - b[:, j].mean() + b.mean()
			total += big_a * big_b
	return float(np.sqrt(max(0.0, total / (n * n))))


def _dcov(u: np.ndarray, v: np.ndarray) -> float:
	a = double_center(pairwise_distances(SignalBatch('X', u)))
	b = double_center(pairwise_distances(SignalBatch('C', v)))
	return distance_covariance(a, b)


def _two_blob_images(n: int, rng: np.random.Generator) -> np.ndarray:
	rows, cols = np.mgrid[0:8, 0:8]
	images = np.zeros((n, 8, 8))
	for i in range(n):
		for _ in range(2):
			r, c = rng.uniform(0, 7, size=2)
			images[i] += np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / 2.0)
	return np.clip(images, 0.0, 1.0).reshape(n, 64)


def test_pairwise_distances_examples():
	np.testing.assert_array_equal(pairwise_distances(SignalBatch('X', np.array([0.0, 3.0]))).values, [[0, 3], [3, 0]])
	same = pairwise_distances(SignalBatch('X', np.ones((4, 3)))).values
	np.testing.assert_array_equal(same, np.zeros((4, 4)))
	triangle = pairwise_distances(SignalBatch('X', np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 4.0]]))).values
	assert sorted([triangle[0, 1], triangle[0, 2], triangle[1, 2]]) == [3.0, 4.0, 5.0]
	np.testing.assert_array_equal(triangle, triangle.T)


def test_double_center_examples():
	centered = double_center(DistanceMatrix(np.array([[0.0, 3.0], [3.0, 0.0]]))).values
	np.testing.assert_allclose(centered, [[-1.5, 1.5], [1.5, -1.5]])
	np.testing.assert_allclose(double_center(DistanceMatrix(np.full((3, 3), 2.0))).values, np.zeros((3, 3)))
	rng = np.random.default_rng(0)
	assert abs(double_center(DistanceMatrix(rng.random((6, 6)))).values.mean()) < 1e-12


def test_double_center_is_idempotent():
	rng = np.random.default_rng(4)
	for n in (2, 7, 60):
		once = double_center(pairwise_distances(SignalBatch('X', rng.standard_normal((n, 5)))))
		twice = double_center(once)
		np.testing.assert_allclose(twice.values, once.values, rtol=0, atol=1e-12)
		np.testing.assert_allclose(once.values.mean(axis=0), 0.0, atol=1e-9)
		np.testing.assert_allclose(once.values.mean(axis=1), 0.0, atol=1e-9)


def test_distance_correlation_is_symmetric():
	rng = np.random.default_rng(5)
	for _ in range(20):
		u = rng.standard_normal((40, 3))
		v = np.tanh(u[:, :2]) + rng.standard_normal((40, 2))
		assert distance_correlation(SignalBatch('C', u), SignalBatch('S', v)) == distance_correlation(
			SignalBatch('S', v), SignalBatch('C', u)
		)


def test_distance_covariance_examples():
	samples = np.array([0.0, 3.0])
	assert _dcov(samples, samples) == pytest.approx(1.5)
	a = double_center(pairwise_distances(SignalBatch('X', samples)))
	zeros = DistanceMatrix(np.zeros((2, 2)), centered=True)
	assert distance_covariance(a, zeros) == 0.0
	with pytest.raises(MetricsError):
		distance_covariance(DistanceMatrix(np.zeros((2, 2))), zeros)


@pytest.mark.parametrize('n', range(2, 11))
def test_distance_covariance_matches_naive_formula(n):
	rng = np.random.default_rng(n)
	for _ in range(100):
		u = rng.standard_normal((n, int(rng.integers(1, 4))))
		v = rng.standard_normal((n, int(rng.integers(1, 4))))
		assert abs(_dcov(u, v) - _naive_dcov(u, v)) <= 1e-10


def test_distance_correlation_invariances():
	rng = np.random.default_rng(1)
	u = rng.standard_normal((50, 3))
	v = u ** 2 + 0.3 * rng.standard_normal((50, 3))
	base = distance_correlation(SignalBatch('X', u), SignalBatch('C', v))
	assert distance_correlation(SignalBatch('X', u), SignalBatch('C', u)) == pytest.approx(1.0, abs=1e-12)

	rotation, _ = np.linalg.qr(rng.standard_normal((3, 3)))
	variants = [2.5 * u + 7.0, u @ rotation, -u]
	for transformed in variants:
		assert distance_correlation(SignalBatch('X', transformed), SignalBatch('C', v)) == pytest.approx(base, abs=1e-9)
		assert distance_correlation(
			SignalBatch('X', transformed), SignalBatch('C', u)
		) == pytest.approx(1.0, abs=1e-9)


def test_distance_correlation_of_independent_signals_is_small():
	def mean_dc(n):
		values = []
		for seed in range(3):
			rng = np.random.default_rng(seed)
			values.append(distance_correlation(
				SignalBatch('C', rng.standard_normal((n, 16))), SignalBatch('S', rng.standard_normal((n, 16)))
			))
		return float(np.mean(values))

	large = mean_dc(1000)
	assert large < 0.2
	assert mean_dc(100) > large


def test_distance_correlation_edge_cases():
	rng = np.random.default_rng(2)
	constant = SignalBatch('C', np.ones((10, 2)))
	assert distance_correlation(constant, SignalBatch('S', rng.random((10, 2)))) == 0.0
	with pytest.raises(MetricsError):
		distance_correlation(SignalBatch('C', rng.random((10, 2))), SignalBatch('S', rng.random((9, 2))))
	with pytest.raises(MetricsError):
		distance_correlation(SignalBatch('C', rng.random((10, 2))), SignalBatch('S', rng.random((10, 2))), max_samples=5)
	value = distance_correlation(
		SignalBatch('C', rng.random((10, 2))), SignalBatch('S', rng.random((10, 2))),
		max_samples=5, rng=np.random.default_rng(0)
	)
	assert 0.0 <= value <= 1.0


def test_signal_batch_validation():
	with pytest.raises(MetricsError):
		SignalBatch('Y', np.zeros((3, 2)))
	with pytest.raises(MetricsError):
		SignalBatch('X', np.zeros((1, 2)))
	with pytest.raises(MetricsError):
		SignalBatch.from_samples('X', [np.zeros(2), np.zeros(3)])
	assert SignalBatch.from_samples('X', [np.zeros((2, 2))] * 3).flat().shape == (3, 4)


def test_iob_of_identity_signal_exceeds_two():
	rng = np.random.default_rng(0)
	train, test = _two_blob_images(500, rng), _two_blob_images(200, rng)
	pair = train_iob_decoders(SignalBatch('X', train), SignalBatch('C', train), FAST_IOB)
	assert pair.log_z.best_val_mse < pair.log_ones.best_val_mse
	assert iob(SignalBatch('X', test), SignalBatch('C', test), pair) > 2.0


def test_iob_of_constant_signal_is_about_one():
	rng = np.random.default_rng(1)
	train, test = _two_blob_images(500, rng), _two_blob_images(200, rng)
	constant = np.full((500, 4), 0.5)
	pair = train_iob_decoders(SignalBatch('X', train), SignalBatch('S', constant), FAST_IOB)
	assert pair.log_z.best_val_mse == pytest.approx(pair.log_ones.best_val_mse, rel=0.05)
	value = iob(SignalBatch('X', test), SignalBatch('S', np.full((200, 4), 0.5)), pair)
	assert 0.85 <= value <= 1.15


def test_iob_decoders_are_deterministic():
	rng = np.random.default_rng(2)
	x = _two_blob_images(60, rng)
	config = IobConfig(max_epochs=5, patience=5, hidden=16, seed=11)
	first = train_iob_decoders(SignalBatch('X', x), SignalBatch('C', x[:, :8]), config)
	second = train_iob_decoders(SignalBatch('X', x), SignalBatch('C', x[:, :8]), config)
	assert first.log_z == second.log_z
	assert first.log_ones == second.log_ones
	assert not set(first.train_indices) & set(first.val_indices)

	parallel = train_iob_decoders(
		SignalBatch('X', x), SignalBatch('C', x[:, :8]), IobConfig(max_epochs=5, patience=5, hidden=16, seed=11, parallel=True)
	)
	assert parallel.log_z == first.log_z


def test_iob_errors():
	with pytest.raises(IobError):
		train_iob_decoders(SignalBatch('X', np.zeros((5, 2))), SignalBatch('C', np.zeros((5, 2))), FAST_IOB)
	assert boi(4.0) == 0.25
	assert 1.0 - boi(1.0) == 0.0
	with pytest.raises(IobError):
		boi(0.0)


class SplitTaps:
	"""x holds c in channel 0 and s in channel 1."""

	def __init__(self, same: bool = False):
		self.same = same

	def taps(self, x, y):
		c = x[:, 0]
		return SimpleNamespace(x=x, c=c, s=c if self.same else x[:, 1])


def _split_data(n: int, seed: int = 0):
	rng = np.random.default_rng(seed)
	return SimpleNamespace(images=rng.standard_normal((n, 2, 8)), labels=np.zeros(n, dtype=int))


def test_separation_examples():
	data = _split_data(1000)
	assert separation(SplitTaps(same=True), data) == pytest.approx(0.0, abs=1e-12)
	assert separation(SplitTaps(), data) > 0.8


def test_measure_all_record():
	train, test = _split_data(200, 1), _split_data(100, 2)
	config = MeasureConfig(max_samples=80, iob_train_samples=100, batch_size=32, iob=IobConfig(max_epochs=3, hidden=8))
	record = measure_all(SplitTaps(), train, test, config, 'toy', 'split')
	assert (record.model, record.dataset, record.n) == ('toy', 'split', 80)
	assert all(0.0 <= value <= 1.0 for value in record.values())
	assert record.to_row()[:3] == ['toy', 'split', '80']
	assert measure_all(SplitTaps(), train, test, config, 'toy', 'split') == record


def test_measurement_record_clamps():
	record = MeasurementRecord('m', 'd', 10, m1=-0.1, m2=0.5, m3=1.2, m4=-3.0, m5=0.9)
	assert record.values() == (0.0, 0.5, 1.0, 0.0, 0.9)
	assert record.to_dict()['m3'] == 1.0
