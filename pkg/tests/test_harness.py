# -*- coding: utf-8 -*-
import json
import os
import struct

import numpy as np
import pytest

from app.modules.attacks import SUITE
from app.modules.harness import (
	DatasetEntry,
	DatasetSpec,
	ExperimentConfig,
	HarnessError,
	IdxFormatError,
	RobustnessRecord,
	StatisticsError,
	SyntheticFactors,
	TrainingBudget,
	correlate_records,
	evaluate_robustness,
	generate_synthetic,
	load_dataset,
	load_mnist_idx,
	paper_table_check,
	pearson,
	run_experiment,
	split_train_val,
	stage_int,
	stage_rng,
	train_model,
	write_idx,
	write_mnist_idx,
)
from app.modules.harness.datasets import IMAGE_MAGIC, LABEL_MAGIC, parse_idx
from app.modules.harness.fixtures import R_TOLERANCE
from app.modules.harness.reports import (
	CORRELATIONS_CSV,
	EXPERIMENT_JSON,
	MEASUREMENTS_CSV,
	ROBUSTNESS_CSV,
	TRACKING_CSV,
	emit_reports,
	read_measurements,
	read_robustness,
	robustness_table,
	write_csv,
)
from app.modules.harness.statistics import format_p, t_test_p
from app.modules.metrics import IobConfig, MeasureConfig, MeasurementRecord, SignalBatch, distance_correlation
from app.modules.modelzoo import VARIANTS, ZooConfig, build_model

SMALL = DatasetSpec(name='small', image_size=12, num_classes=3, train_size=60, test_size=20)
TINY_ZOO = ZooConfig(latent_dim=4, hidden=8, adversarial_training=False)
# Large enough for every variant to fit the three shapes.
LEARNABLE = DatasetSpec(name='learnable', image_size=12, num_classes=3, train_size=600, test_size=100)
LEARNABLE_ZOO = ZooConfig(latent_dim=8, hidden=32, adversarial_training=False)


@pytest.fixture(scope='module')
def small_splits():
	return load_dataset(SMALL)


@pytest.fixture(scope='module')
def learnable_splits():
	return load_dataset(LEARNABLE)


def test_stage_streams_are_independent():
	assert stage_int(0, 'init', 'ortho-proj') == stage_int(0, 'init', 'ortho-proj')
	assert stage_int(0, 'init', 'ortho-proj') != stage_int(0, 'init', 'vae-split')
	assert stage_int(0, 'init', 'ortho-proj') != stage_int(1, 'init', 'ortho-proj')
	np.testing.assert_array_equal(stage_rng(3, 'a').random(4), stage_rng(3, 'a').random(4))


# IDX


def test_idx_round_trip_is_bitwise(tmp_path):
	data = generate_synthetic(SMALL)
	images, labels = str(tmp_path / 'images'), str(tmp_path / 'labels')
	write_mnist_idx(data, images, labels)
	loaded = load_mnist_idx(images, labels, 'small', 3)
	np.testing.assert_array_equal(loaded.images, data.images)
	np.testing.assert_array_equal(loaded.labels, data.labels)
	assert loaded.images.dtype == np.float64


def test_idx_header_layout(tmp_path):
	path = str(tmp_path / 'labels')
	write_idx(path, np.array([1, 2, 3]))
	with open(path, 'rb') as file:
		raw = file.read()
	assert raw[:4] == struct.pack('>I', LABEL_MAGIC)
	assert raw[4:8] == struct.pack('>I', 3)
	assert parse_idx(raw, LABEL_MAGIC).tolist() == [1, 2, 3]


def test_idx_errors(tmp_path):
	raw = struct.pack('>I', IMAGE_MAGIC) + struct.pack('>3I', 2, 2, 2) + bytes(8)
	assert parse_idx(raw, IMAGE_MAGIC).shape == (2, 2, 2)
	with pytest.raises(IdxFormatError, match='bad magic'):
		parse_idx(raw, LABEL_MAGIC)
	with pytest.raises(IdxFormatError, match='truncated'):
		parse_idx(raw[:-1], IMAGE_MAGIC)
	with pytest.raises(IdxFormatError, match='truncated'):
		parse_idx(raw[:6], IMAGE_MAGIC)
	with pytest.raises(IdxFormatError):
		parse_idx(raw[:2], IMAGE_MAGIC)

	images, labels = str(tmp_path / 'images'), str(tmp_path / 'labels')
	write_idx(images, np.zeros((5, 4, 4)))
	write_idx(labels, np.zeros(4))
	with pytest.raises(IdxFormatError, match='5 images'):
		load_mnist_idx(images, labels)


# Synthetic data


def test_synthetic_is_seeded():
	first, second = generate_synthetic(SMALL), generate_synthetic(SMALL)
	assert first.images.tobytes() == second.images.tobytes()
	np.testing.assert_array_equal(first.labels, second.labels)
	assert generate_synthetic(SMALL, split='test').images.shape == (20, 1, 12, 12)
	other = generate_synthetic(DatasetSpec(name='small', image_size=12, num_classes=3, train_size=60, seed=1))
	assert first.images.tobytes() != other.images.tobytes()


def test_synthetic_background_follows_the_label_when_fully_correlated():
	spec = DatasetSpec(image_size=16, num_classes=10, train_size=300)
	factors = SyntheticFactors(rho=1.0, noise=0.0)
	data = generate_synthetic(spec, factors)
	np.testing.assert_array_equal(data.factors['level'], data.labels)
	expected = np.rint(factors.levels(10)[data.labels] * 255.0) / 255.0
	np.testing.assert_array_equal(data.images[:, 0, 0, 0], expected)


def test_synthetic_background_is_independent_when_uncorrelated():
	data = generate_synthetic(DatasetSpec(train_size=10000), SyntheticFactors(rho=0.0))
	assert abs(pearson(data.factors['level'], data.labels).r) < 0.05

	first = slice(0, 1000)
	background = SignalBatch('S', data.factors['background'][first, None])
	one_hot = SignalBatch('C', np.eye(data.num_classes)[data.labels[first]])
	assert distance_correlation(background, one_hot) < 0.2

	# The same factor is a function of the label when fully correlated.
	tied = generate_synthetic(DatasetSpec(train_size=1000), SyntheticFactors(rho=1.0))
	assert distance_correlation(
		SignalBatch('S', tied.factors['background'][:, None]), SignalBatch('C', np.eye(tied.num_classes)[tied.labels])
	) > 0.5


def test_synthetic_errors():
	with pytest.raises(HarnessError):
		generate_synthetic(DatasetSpec(num_classes=11))
	with pytest.raises(HarnessError):
		generate_synthetic(DatasetSpec(image_size=8))
	with pytest.raises(HarnessError):
		DatasetSpec(source='imagenet')


def test_split_train_val(small_splits):
	assert len(small_splits.train) == 48
	assert len(small_splits.val) == 12
	assert len(small_splits.test) == 20
	assert small_splits.name == 'small'
	train, val = split_train_val(generate_synthetic(SMALL), seed=0)
	np.testing.assert_array_equal(train.images, small_splits.train.images)
	np.testing.assert_array_equal(val.labels, small_splits.val.labels)


# Statistics


def test_pearson_p_value_oracles():
	assert t_test_p(-0.820, 12) == pytest.approx(0.0011, abs=0.0002)
	assert t_test_p(0.741, 12) == pytest.approx(0.0058, abs=0.0005)


def test_pearson_examples():
	result = pearson([1, 2, 3, 4], [2, 4, 6, 8], 'a', 'b')
	assert result.r == pytest.approx(1.0)
	assert 0.0 < result.p <= 1e-300
	assert result.significant
	assert pearson([1, 2, 3, 4], [8, 6, 4, 2]).r == pytest.approx(-1.0)

	rng = np.random.default_rng(0)
	xs, ys = rng.standard_normal(30), rng.standard_normal(30)
	base = pearson(xs, ys)
	assert pearson(3.0 * xs + 1.0, ys).r == pytest.approx(base.r, abs=1e-12)
	assert pearson(-2.0 * xs, ys).r == pytest.approx(-base.r, abs=1e-12)
	assert 0.0 < base.p <= 1.0


def test_pearson_errors():
	with pytest.raises(StatisticsError):
		pearson([1, 2], [1, 2])
	with pytest.raises(StatisticsError):
		pearson([1, 2, 3], [1, 2])
	with pytest.raises(StatisticsError, match='zero variance'):
		pearson([1, 1, 1], [1, 2, 3])


def test_format_p():
	assert format_p(0.0058) == '.0058'
	assert format_p(0.00001) == '<.0001'
	assert format_p(1.0) == '1.0000'


def test_published_correlations_are_reproduced():
	comparisons = paper_table_check()
	assert len(comparisons) == 20
	assert all(item.matches for item in comparisons)
	by_key = {(item.computed.target, item.computed.measurement): item.computed for item in comparisons}
	assert by_key[('delta_abs', 'm1')].r == pytest.approx(-0.820, abs=R_TOLERANCE)
	assert by_key[('delta_rel', 'm1')].r == pytest.approx(-0.720, abs=R_TOLERANCE)
	assert by_key[('clean', 'm2')].r == pytest.approx(0.741, abs=R_TOLERANCE)
	assert by_key[('delta_rel', 'm5')].r == pytest.approx(0.597, abs=R_TOLERANCE)
	assert all(result.n == 12 for result in by_key.values())


# Robustness


def test_robustness_record_deltas():
	record = RobustnessRecord('CausalAdv', 'MNIST', 0.993, {'pgd20_l2': 0.974})
	assert record.mean_adversarial == pytest.approx(0.974)
	assert record.delta_abs == pytest.approx(0.019)
	assert round(record.delta_rel * 100, 1) == 1.9
	assert RobustnessRecord('m', 'd', 0.0, {'a': 0.0}).delta_rel == 0.0
	with pytest.raises(HarnessError):
		RobustnessRecord('m', 'd', 1.2, {})
	rows = RobustnessRecord('m', 'd', 0.5, {'a': 0.25, 'b': 0.75}).to_rows()
	assert [row[3] for row in rows] == ['a', 'b']
	assert rows[0][5:] == ['0.500000', '0.000000', '0.000000']


def test_evaluate_robustness(small_splits):
	result = train_model('attn-complement', small_splits.train, small_splits.val, TrainingBudget(epochs=1), 0, TINY_ZOO)
	attacks = (SUITE['fgsm_linf'], SUITE['pgd20_linf'])
	record = evaluate_robustness(result.model, small_splits.test, attacks, seed=1, model_id='attn-complement')
	assert list(record.attack_accuracy) == ['fgsm_linf', 'pgd20_linf']
	assert all(0.0 <= value <= 1.0 for value in record.attack_accuracy.values())
	again = evaluate_robustness(result.model, small_splits.test, attacks, seed=1, workers=2, model_id='attn-complement')
	assert again == record
	with pytest.raises(HarnessError):
		evaluate_robustness(result.model, small_splits.test, ())


# Training


def test_training_is_seeded(small_splits):
	budget = TrainingBudget(epochs=2, batch_size=16)
	first = train_model('attn-complement', small_splits.train, small_splits.val, budget, 3, TINY_ZOO)
	second = train_model('attn-complement', small_splits.train, small_splits.val, budget, 3, TINY_ZOO)
	assert first.log == second.log
	assert len(first.log) == 2
	assert first.best_epoch in (1, 2)
	for name, value in first.model.state_dict().items():
		np.testing.assert_array_equal(second.model.state_dict()[name], value)


def test_ortho_proj_stays_orthogonal_while_training(small_splits):
	residuals = []
	train_model(
		'ortho-proj', small_splits.train, small_splits.val, TrainingBudget(epochs=5, batch_size=16), 2, TINY_ZOO,
		on_step=lambda epoch, model: residuals.append(model.orthogonality_residual())
	)
	# 48 training samples in batches of 16.
	assert len(residuals) == 15
	assert max(residuals) <= 1e-9


@pytest.mark.slow
@pytest.mark.parametrize('variant', sorted(VARIANTS))
def test_every_variant_learns_the_synthetic_task(variant, learnable_splits):
	budget = TrainingBudget(epochs=15, batch_size=32, learning_rate=5e-3)
	result = train_model(variant, learnable_splits.train, learnable_splits.val, budget, 0, LEARNABLE_ZOO)
	assert max(record.val_accuracy for record in result.log) >= 0.9


@pytest.mark.slow
def test_vae_split_elbo_rises_early(learnable_splits):
	train = learnable_splits.train
	states = {}
	budget = TrainingBudget(epochs=5, batch_size=32, learning_rate=5e-3)
	train_model(
		'vae-split', train, learnable_splits.val, budget, 0, LEARNABLE_ZOO,
		on_step=lambda epoch, model: states.__setitem__(epoch, model.state_dict())
	)
	fresh = build_model('vae-split', train.image_shape, train.num_classes, LEARNABLE_ZOO, stage_int(0, 'init', 'vae-split'))
	elbos = [float(np.mean(fresh.elbo(train.images, train.labels)))]
	for epoch in (1, 3, 5):
		fresh.load_state_dict(states[epoch])
		elbos.append(float(np.mean(fresh.elbo(train.images, train.labels))))
	assert elbos == sorted(elbos)
	assert len(set(elbos)) == 4


def test_training_budget_errors():
	with pytest.raises(HarnessError):
		TrainingBudget(epochs=0)
	with pytest.raises(HarnessError):
		TrainingBudget(batch_size=0)


def test_training_tracks_every_epoch(small_splits):
	budget = TrainingBudget(epochs=2, batch_size=16, tracking=True, tracking_samples=8)
	result = train_model('ortho-proj', small_splits.train, small_splits.val, budget, 0, TINY_ZOO)
	rows = result.tracking_rows('ortho-proj', 'small')
	assert [row[2] for row in rows] == ['1', '2']
	assert all(0.0 <= record.m1 <= 1.0 for record in result.log)
	assert all(0.0 <= record.adversarial_accuracy <= 1.0 for record in result.log)


# Reports


def test_empty_reports_are_headers_only(tmp_path):
	out = str(tmp_path / 'out')
	files = emit_reports(out)
	assert sorted(os.path.basename(f) for f in files) == sorted(
		[MEASUREMENTS_CSV, ROBUSTNESS_CSV, CORRELATIONS_CSV, TRACKING_CSV]
	)
	with open(os.path.join(out, MEASUREMENTS_CSV), encoding='utf-8') as file:
		assert file.read() == 'model,dataset,n,m1,m2,m3,m4,m5\n'
	with open(os.path.join(out, CORRELATIONS_CSV), encoding='utf-8') as file:
		assert file.read() == 'measurement,target,n,r,p,significant\n'


def test_reports_overwrite_atomically(tmp_path):
	path = str(tmp_path / 'table.csv')
	write_csv(path, ('a', 'b'), [[1, 2], [3, 4]])
	write_csv(path, ('a', 'b'), [[5, 6]])
	with open(path, encoding='utf-8') as file:
		assert file.read() == 'a,b\n5,6\n'
	assert os.listdir(str(tmp_path)) == ['table.csv']


def test_reports_read_back(tmp_path):
	measurements = [
		MeasurementRecord('ortho-proj', 'small', 20, 0.5, 0.25, 0.125, 0.0, 1.0),
		MeasurementRecord('vae-split', 'small', 20, 0.75, 0.5, 0.25, 0.125, 0.0625),
	]
	robustness = [
		RobustnessRecord('ortho-proj', 'small', 0.5, {'a': 0.25, 'b': 0.5}),
		RobustnessRecord('vae-split', 'small', 0.75, {'a': 0.5, 'b': 0.25}),
	]
	out = str(tmp_path)
	emit_reports(out, measurements=measurements, robustness=robustness, experiment={'version': '0.1.0'})
	assert read_measurements(os.path.join(out, MEASUREMENTS_CSV)) == measurements
	assert read_robustness(os.path.join(out, ROBUSTNESS_CSV)) == robustness
	with open(os.path.join(out, EXPERIMENT_JSON), encoding='utf-8') as file:
		assert json.load(file) == {'version': '0.1.0'}
	with pytest.raises(HarnessError, match='missing columns'):
		read_robustness(os.path.join(out, MEASUREMENTS_CSV))


def test_robustness_table_stars_the_best():
	table = robustness_table([
		RobustnessRecord('ortho-proj', 'small', 0.9, {'a': 0.6}),
		RobustnessRecord('vae-split', 'small', 0.8, {'a': 0.7}),
	])
	lines = table.splitlines()
	ortho = next(line for line in lines if 'ortho-proj' in line)
	vae = next(line for line in lines if 'vae-split' in line)
	assert '90.0%*' in ortho and '60.0%' in ortho and '60.0%*' not in ortho
	assert '70.0%*' in vae and '12.5%*' in vae


def test_correlate_records_needs_attack_results_for_robustness_targets():
	measurements = [
		MeasurementRecord('m', str(i), 10, 0.1 * i, 0.2, 0.05 * i, 0.3 + 0.01 * i, 0.5 - 0.02 * i) for i in range(4)
	]
	clean = [0.5, 0.6, 0.8, 0.7]
	results = correlate_records(measurements, clean)
	assert {r.target for r in results} == {'clean'}
	# m2 is constant and gets skipped.
	assert {r.measurement for r in results} == {'m1', 'm3', 'm4', 'm5'}

	robustness = [RobustnessRecord('m', str(i), c, {'a': c * c}) for i, c in enumerate(clean)]
	targets = {r.target for r in correlate_records(measurements, clean, robustness)}
	assert targets == {'clean', 'adversarial', 'delta_abs', 'delta_rel'}


# Pipeline


@pytest.mark.slow
def test_run_experiment_end_to_end(tmp_path):
	config = ExperimentConfig(
		datasets=(
			DatasetEntry(DatasetSpec(name='a', image_size=12, num_classes=3, train_size=60, test_size=20)),
			DatasetEntry(DatasetSpec(name='b', image_size=12, num_classes=3, train_size=60, test_size=20, seed=1)),
		),
		variants=('vae-split', 'attn-complement'),
		zoo=TINY_ZOO,
		budget=TrainingBudget(epochs=1, batch_size=16),
		attacks=(SUITE['fgsm_linf'],),
		measure=MeasureConfig(max_samples=20, iob_train_samples=40, iob=IobConfig(max_epochs=2, hidden=8)),
		workers=2,
		out_dir=str(tmp_path),
		save_checkpoints=True,
		version='test',
	)
	report = run_experiment(config)
	assert not report.failed
	assert [(cell.dataset, cell.variant) for cell in report.cells] == [
		('a', 'vae-split'), ('a', 'attn-complement'), ('b', 'vae-split'), ('b', 'attn-complement'),
	]
	assert len(report.measurements) == len(report.robustness) == 4
	assert {r.target for r in report.correlations} <= {'clean', 'adversarial', 'delta_abs', 'delta_rel'}
	assert os.path.exists(os.path.join(str(tmp_path), 'checkpoints', 'vae-split-a.cdnb'))
	with open(os.path.join(str(tmp_path), EXPERIMENT_JSON), encoding='utf-8') as file:
		record = json.load(file)
	assert record['version'] == 'test'
	assert len(record['cells']) == 4
	assert len(read_measurements(os.path.join(str(tmp_path), MEASUREMENTS_CSV))) == 4
