# -*- coding: utf-8 -*-
import json
import os

import pytest

from app.base_command import normalize_argv
from app.modules.harness.datasets import MNIST_FILES
from app.modules.harness.reports import read_measurements, read_robustness
from manage import dispatch

TINY_DATA = ['--image_size=12', '--num_classes=3', '--train_size=60', '--test_size=20']


def test_normalize_argv():
	assert normalize_argv(['--out', 'x', '--tracking', '--seed=1']) == ['--out=x', '--tracking', '--seed=1']


def test_usage(capsys):
	assert dispatch([]) == 2
	assert 'usage: manage.py' in capsys.readouterr().err
	assert dispatch(['train-all']) == 2
	assert 'unknown command: train-all' in capsys.readouterr().err


def test_help_exits_cleanly():
	with pytest.raises(SystemExit) as e:
		dispatch(['train', '--help'])
	assert e.value.code == 0


@pytest.mark.parametrize('argv', [
	['paper-check', '--bogus=1'],
	['train', '--model=ortho-proj', '--epochs=many', '--out=x'],
	['train', '--model=resnet', '--out=x'],
	['train', '--out=x'],
	['gen-data'],
	['measure', '--out=x'],
	['attack', '--checkpoint=m.cdnb', '--attack=deepfool'],
	['correlate', '--robustness=r.csv'],
	['run'],
	['paper-check', 'extra'],
])
def test_usage_errors(argv, capsys):
	assert dispatch(argv) == 2
	assert 'error:' in capsys.readouterr().err


def test_paper_check(capsys):
	assert dispatch(['paper-check']) == 0
	assert '20/20 correlations' in capsys.readouterr().out


def test_run_with_missing_config(tmp_path, capsys):
	path = str(tmp_path / 'missing.toml')
	assert dispatch(['run', f'--config={path}']) == 1
	assert path in capsys.readouterr().err


def test_run_with_invalid_config(tmp_path):
	path = tmp_path / 'bad.toml'
	path.write_text('[models]\nvariants = ["resnet"]\n', encoding='utf-8')
	assert dispatch(['run', f'--config={path}']) == 2


def test_missing_dataset_directory(tmp_path, capsys):
	missing = str(tmp_path / 'nowhere')
	assert dispatch(['train', '--model=ortho-proj', f'--dataset={missing}', f'--out={tmp_path}']) == 1
	assert 'dataset directory not found' in capsys.readouterr().err


def test_corrupt_dataset(tmp_path):
	for images_file, labels_file in MNIST_FILES.values():
		(tmp_path / images_file).write_bytes(b'\x00\x00\x00\x00garbage')
		(tmp_path / labels_file).write_bytes(b'\x00\x00\x00\x00garbage')
	assert dispatch(['train', '--model=ortho-proj', f'--dataset={tmp_path}', f'--out={tmp_path / "out"}']) == 1


def test_missing_checkpoint(tmp_path, capsys):
	argv = ['measure', f'--checkpoint={tmp_path / "none.cdnb"}', f'--out={tmp_path}'] + TINY_DATA
	assert dispatch(argv) == 1
	assert 'error:' in capsys.readouterr().err


@pytest.mark.slow
def test_pipeline(tmp_path, capsys):
	data, out = str(tmp_path / 'data'), str(tmp_path / 'out')
	assert dispatch(['gen-data', '--name=tiny', f'--out={data}', '--seed=3'] + TINY_DATA) == 0
	with open(os.path.join(data, 'dataset.json'), encoding='utf-8') as file:
		described = json.load(file)
	assert described['name'] == 'tiny'
	assert described['counts'] == {'train': 60, 'test': 20}

	common = [f'--dataset={data}', f'--out={out}', '--seed=3']
	assert dispatch(['train', '--model=attn-complement', '--epochs=1', '--batch_size=16'] + common) == 0
	checkpoint = os.path.join(out, 'attn-complement-tiny.cdnb')
	assert os.path.exists(checkpoint)
	assert os.path.exists(os.path.join(out, 'attn-complement-tiny.json'))

	assert dispatch([
		'measure', f'--checkpoint={checkpoint}', '--max_samples=20', '--iob_train_samples=40',
		'--iob_max_epochs=2', '--iob_patience=2',
	] + common) == 0
	measurements = read_measurements(os.path.join(out, 'measurements.csv'))
	assert [(m.model, m.dataset) for m in measurements] == [('attn-complement', 'tiny')]

	assert dispatch(['attack', f'--checkpoint={checkpoint}', '--attack', 'fgsm_linf,pgd20_l2'] + common) == 0
	(record,) = read_robustness(os.path.join(out, 'robustness.csv'))
	assert set(record.attack_accuracy) == {'fgsm_linf', 'pgd20_l2'}

	# One cell is too few points for a correlation; the report is written empty.
	assert dispatch([
		'correlate', f'--measurements={out}/measurements.csv', f'--robustness={out}/robustness.csv', f'--out={out}',
	]) == 0
	with open(os.path.join(out, 'correlations.csv'), encoding='utf-8') as file:
		assert len(file.read().strip().splitlines()) == 1
	capsys.readouterr()
