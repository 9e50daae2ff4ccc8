# -*- coding: utf-8 -*-
"""The experiment pipeline: for every (variant, dataset) cell train, measure
M1-M5 and attack; then correlate each measurement with clean accuracy,
mean attacked accuracy, Δ_abs and Δ_rel across cells.

Cells run concurrently on a thread pool driven by asyncio. A failing cell is
logged and reported; the others complete. Outputs are assembled in a fixed
(dataset, variant) order after all cells finish, so they do not depend on
scheduling.
"""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import logging
import os
from typing import Optional, Sequence

from app.modules.harness.common import StatisticsError, stage_int
from app.modules.harness.datasets import DatasetSpec, DatasetSplits, SyntheticFactors, load_dataset
from app.modules.harness.fixtures import MEASUREMENTS
from app.modules.harness.reports import emit_reports
from app.modules.harness.robustness import RobustnessRecord, clean_accuracy, evaluate_robustness
from app.modules.harness.statistics import pearson
from app.modules.harness.training import TrainingBudget, train_model
from app.modules.metrics import MeasureConfig, MeasurementRecord, measure_all
from app.modules.modelzoo import VARIANTS, ZooConfig, save_checkpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetEntry:
	spec: DatasetSpec
	factors: SyntheticFactors = SyntheticFactors()


@dataclass(frozen=True)
class ExperimentConfig:
	datasets: tuple = (DatasetEntry(DatasetSpec()),)
	variants: tuple = tuple(VARIANTS)
	zoo: ZooConfig = ZooConfig()
	budget: TrainingBudget = TrainingBudget()
	attacks: tuple = ()
	measure: MeasureConfig = MeasureConfig()
	seed: int = 0
	workers: int = 1
	out_dir: str = 'results'
	save_checkpoints: bool = False
	version: str = ''


@dataclass
class CellOutcome:
	variant: str
	dataset: str
	clean_accuracy: Optional[float] = None
	measurement: Optional[MeasurementRecord] = None
	robustness: Optional[RobustnessRecord] = None
	best_epoch: int = 0
	epoch_log: list = field(default_factory=list)
	tracking_rows: list = field(default_factory=list)
	error: Optional[str] = None

	@property
	def ok(self) -> bool:
		return self.error is None


@dataclass
class ExperimentReport:
	cells: list
	correlations: list
	files: list = field(default_factory=list)

	@property
	def failed(self) -> list:
		return [cell for cell in self.cells if not cell.ok]

	@property
	def measurements(self) -> list:
		return [cell.measurement for cell in self.cells if cell.measurement is not None]

	@property
	def robustness(self) -> list:
		return [cell.robustness for cell in self.cells if cell.robustness is not None]


def _run_cell(config: ExperimentConfig, variant: str, splits: DatasetSplits) -> CellOutcome:
	dataset = splits.name
	outcome = CellOutcome(variant=variant, dataset=dataset)
	training = train_model(variant, splits.train, splits.val, config.budget, config.seed, config.zoo)
	model = training.model
	outcome.best_epoch = training.best_epoch
	outcome.epoch_log = training.log_dicts()
	outcome.tracking_rows = training.tracking_rows(variant, dataset)
	if config.save_checkpoints:
		checkpoints = os.path.join(config.out_dir, 'checkpoints')
		os.makedirs(checkpoints, exist_ok=True)
		save_checkpoint(model, os.path.join(checkpoints, f'{variant}-{dataset}.cdnb'))

	outcome.measurement = measure_all(model, splits.train, splits.test, config.measure, variant, dataset)
	outcome.clean_accuracy = clean_accuracy(model, splits.test)
	if config.attacks:
		outcome.robustness = evaluate_robustness(
			model, splits.test, config.attacks, seed=config.seed, model_id=variant
		)
	return outcome


def _guarded_cell(config: ExperimentConfig, variant: str, splits: DatasetSplits) -> CellOutcome:
	try:
		return _run_cell(config, variant, splits)
	except Exception as e:  # pylint: disable=broad-except
		logger.error('%s/%s failed: %s', variant, splits.name, e, exc_info=True)
		return CellOutcome(variant=variant, dataset=splits.name, error=f'{type(e).__name__}: {e}')


async def _run_cells(config: ExperimentConfig, splits: list) -> list:
	loop = asyncio.get_running_loop()
	with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
		jobs = [
			loop.run_in_executor(pool, _guarded_cell, config, variant, dataset)
			for dataset in splits for variant in config.variants
		]
		return list(await asyncio.gather(*jobs))


def correlate_records(
	measurements: Sequence[MeasurementRecord],
	clean: Sequence[float],
	robustness: Optional[Sequence[RobustnessRecord]] = None
) -> list:
	"""Pearson r of each measurement against each robustness target; inputs are aligned by position.

	Without attack results only clean accuracy is correlated.
	"""
	targets = {'clean': list(clean)}
	if robustness is not None:
		targets['adversarial'] = [record.mean_adversarial for record in robustness]
		targets['delta_abs'] = [record.delta_abs for record in robustness]
		targets['delta_rel'] = [record.delta_rel for record in robustness]
	results = []
	for target, ys in targets.items():
		for index, measurement in enumerate(MEASUREMENTS):
			xs = [record.values()[index] for record in measurements]
			try:
				results.append(pearson(xs, ys, measurement, target))
			except StatisticsError as e:
				logger.warning('correlation skipped: %s', e)
	return results


def correlate(cells: list) -> list:
	"""correlate_records over the successful cells."""
	done = [cell for cell in cells if cell.ok and cell.measurement is not None]
	robustness = None
	if done and all(cell.robustness is not None for cell in done):
		robustness = [cell.robustness for cell in done]
	return correlate_records([cell.measurement for cell in done], [cell.clean_accuracy for cell in done], robustness)


def _log_separation_order(cells: list):
	"""Logs whether ortho-proj separates C and S better than attn-complement."""
	m1 = {(cell.dataset, cell.variant): cell.measurement.m1 for cell in cells if cell.measurement is not None}
	for dataset in dict.fromkeys(cell.dataset for cell in cells):
		ortho, attn = m1.get((dataset, 'ortho-proj')), m1.get((dataset, 'attn-complement'))
		if ortho is not None and attn is not None:
			logger.info(
				'%s: M1 ortho-proj %.3f %s attn-complement %.3f', dataset, ortho, '>' if ortho > attn else '<=', attn
			)


def _cell_dict(cell: CellOutcome) -> dict:
	out = asdict(cell)
	if cell.robustness is not None:
		out['robustness'] = cell.robustness.to_dict()
	return out


def experiment_record(config: ExperimentConfig, cells: list, correlations: list) -> dict:
	return {
		'version': config.version,
		'config': asdict(config),
		'seeds': {
			'master': config.seed,
			'init': {variant: stage_int(config.seed, 'init', variant) for variant in config.variants},
		},
		'cells': [_cell_dict(cell) for cell in cells],
		'correlations': [asdict(result) for result in correlations],
	}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
	splits = [load_dataset(entry.spec, entry.factors) for entry in config.datasets]
	logger.info(
		'experiment: %d variants x %d datasets, %d attacks, %d workers',
		len(config.variants), len(splits), len(config.attacks), config.workers
	)
	cells = asyncio.run(_run_cells(config, splits))
	if any(not cell.ok for cell in cells):
		logger.warning('%d of %d cells failed', sum(not cell.ok for cell in cells), len(cells))
	_log_separation_order(cells)
	correlations = correlate(cells)
	report = ExperimentReport(cells=cells, correlations=correlations)
	report.files = emit_reports(
		config.out_dir,
		measurements=report.measurements,
		robustness=report.robustness,
		correlations=correlations,
		tracking_rows=[row for cell in cells for row in cell.tracking_rows],
		experiment=experiment_record(config, cells, correlations),
	)
	return report
