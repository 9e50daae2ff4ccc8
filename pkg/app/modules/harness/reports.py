# -*- coding: utf-8 -*-
"""Report files and plain-text summary tables.

Files (all rewritten atomically: temporary file, then rename):

  measurements.csv   model, dataset, n, m1..m5
  robustness.csv     model, dataset, clean_accuracy, attack, accuracy, mean_adversarial, delta_abs, delta_rel
  correlations.csv   measurement, target, n, r, p, significant
  tracking.csv       model, dataset, epoch, m1, clean_accuracy, pgd40_accuracy
  experiment.json    everything above plus configuration, seeds and epoch logs

Summary tables mark the best entry of each column with '*'.
"""
import csv
import io
import json
import logging
import os
from typing import Iterable, Sequence

from app.base_command import WideJSONEncoder
from app.modules.harness import robustness as robustness_module
from app.modules.harness.common import HarnessError
from app.modules.harness.statistics import CorrelationResult, format_p
from app.modules.harness.training import TRACKING_HEADER
from app.modules.metrics.measure import CSV_HEADER as MEASUREMENT_HEADER, MeasurementRecord

logger = logging.getLogger(__name__)

CORRELATION_HEADER = ('measurement', 'target', 'n', 'r', 'p', 'significant')

MEASUREMENTS_CSV = 'measurements.csv'
ROBUSTNESS_CSV = 'robustness.csv'
CORRELATIONS_CSV = 'correlations.csv'
TRACKING_CSV = 'tracking.csv'
EXPERIMENT_JSON = 'experiment.json'


def write_atomic(path: str, text: str):
	tmp = f'{path}.tmp'
	with open(tmp, 'w', encoding='utf-8', newline='') as file:
		file.write(text)
	os.replace(tmp, path)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
	buffer = io.StringIO()
	writer = csv.writer(buffer, lineterminator='\n')
	writer.writerow(header)
	writer.writerows(rows)
	return buffer.getvalue()


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]):
	write_atomic(path, csv_text(header, rows))


def write_json(path: str, data):
	write_atomic(path, json.dumps(data, cls=WideJSONEncoder, indent=2, sort_keys=True) + '\n')


def emit_reports(out_dir: str, measurements=(), robustness=(), correlations=(), tracking_rows=(), experiment=None) -> list:
	"""Writes every report file into `out_dir`; returns the paths written."""
	os.makedirs(out_dir, exist_ok=True)
	files = {
		MEASUREMENTS_CSV: (MEASUREMENT_HEADER, [r.to_row() for r in measurements]),
		ROBUSTNESS_CSV: (robustness_module.CSV_HEADER, [row for r in robustness for row in r.to_rows()]),
		CORRELATIONS_CSV: (CORRELATION_HEADER, [r.to_row() for r in correlations]),
		TRACKING_CSV: (TRACKING_HEADER, list(tracking_rows)),
	}
	written = []
	for name, (header, rows) in files.items():
		path = os.path.join(out_dir, name)
		write_csv(path, header, rows)
		written.append(path)
	if experiment is not None:
		path = os.path.join(out_dir, EXPERIMENT_JSON)
		write_json(path, experiment)
		written.append(path)
	logger.info('reports written to %s', out_dir)
	return written


# Readers


def _read_rows(path: str, header: Sequence[str]) -> list:
	with open(path, newline='', encoding='utf-8') as file:
		reader = csv.DictReader(file)
		missing = set(header) - set(reader.fieldnames or ())
		if missing:
			raise HarnessError(f'{path}: missing columns {", ".join(sorted(missing))}')
		return list(reader)


def read_measurements(path: str) -> list:
	"""Parses a measurements.csv back into MeasurementRecords."""
	records = []
	for line, row in enumerate(_read_rows(path, MEASUREMENT_HEADER), start=2):
		try:
			records.append(MeasurementRecord(
				model=row['model'],
				dataset=row['dataset'],
				n=int(row['n']),
				**{name: float(row[name]) for name in ('m1', 'm2', 'm3', 'm4', 'm5')},
			))
		except ValueError as e:
			raise HarnessError(f'{path}:{line}: {e}') from e
	return records


def read_robustness(path: str) -> list:
	"""Parses a robustness.csv (one row per attack) back into one RobustnessRecord per (model, dataset)."""
	clean, attacks = {}, {}
	for line, row in enumerate(_read_rows(path, robustness_module.CSV_HEADER), start=2):
		key = (row['model'], row['dataset'])
		try:
			clean[key] = float(row['clean_accuracy'])
			attacks.setdefault(key, {})[row['attack']] = float(row['accuracy'])
		except ValueError as e:
			raise HarnessError(f'{path}:{line}: {e}') from e
	return [
		robustness_module.RobustnessRecord(*key, clean[key], attacks[key]) for key in clean
	]


# Summary tables


def render_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
	widths = [max(len(str(cell)) for cell in column) for column in zip(header, *rows)]
	lines = ['  '.join(str(cell).ljust(width) for cell, width in zip(line, widths)).rstrip() for line in (header, *rows)]
	lines.insert(1, '  '.join('-' * width for width in widths))
	return '\n'.join(lines)


def _mark_best(values: Sequence[float], best) -> list:
	target = best(values) if values else None
	return [f'{v * 100:.1f}%' + ('*' if v == target else '') for v in values]


def robustness_table(records: Sequence) -> str:
	"""Clean, mean adversarial accuracy and Δrel per model; best per dataset starred."""
	rows = []
	for dataset in dict.fromkeys(r.dataset for r in records):
		group = [r for r in records if r.dataset == dataset]
		clean = _mark_best([r.clean_accuracy for r in group], max)
		adversarial = _mark_best([r.mean_adversarial for r in group], max)
		delta_rel = _mark_best([r.delta_rel for r in group], min)
		for i, r in enumerate(group):
			rows.append([dataset, r.model, clean[i], adversarial[i], delta_rel[i]])
	return render_table(('dataset', 'model', 'clean', 'mean a_p', 'Δrel'), rows)


def measurement_table(records: Sequence) -> str:
	rows = [[r.dataset, r.model, *(f'{v:.3f}' for v in r.values())] for r in records]
	return render_table(('dataset', 'model', 'M1', 'M2', 'M3', 'M4', 'M5'), rows)


def correlation_table(results: Sequence[CorrelationResult], measurements: Sequence[str], targets: Sequence[str]) -> str:
	"""Targets as rows, measurements as columns; significant entries starred."""
	by_key = {(r.target, r.measurement): r for r in results}
	rows = []
	for target in targets:
		row = [target]
		for measurement in measurements:
			result = by_key.get((target, measurement))
			if result is None:
				row.append('-')
				continue
			p = 'p' + ('<.0001' if result.p < 1e-4 else '=' + format_p(result.p))
			row.append(f'{result.r:+.3f} {p}' + ('*' if result.significant else ''))
		rows.append(row)
	return render_table(('', *measurements), rows)
