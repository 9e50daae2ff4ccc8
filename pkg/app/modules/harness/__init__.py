# -*- coding: utf-8 -*-
"""'Proxy' for the experiment harness."""

from app.modules.harness.common import (
	ConfigError,
	HarnessError,
	IdxFormatError,
	StatisticsError,
	TrainingDivergedError,
	stage_int,
	stage_rng,
	stage_seed,
)
from app.modules.harness.datasets import (
	Dataset,
	DatasetSpec,
	DatasetSplits,
	SyntheticFactors,
	generate_synthetic,
	load_dataset,
	load_mnist_idx,
	split_train_val,
	write_idx,
	write_mnist_idx,
)
from app.modules.harness.statistics import CorrelationResult, format_p, pearson
from app.modules.harness.robustness import RobustnessRecord, clean_accuracy, evaluate_robustness
from app.modules.harness.training import EpochRecord, TrainingBudget, TrainingResult, train_model
from app.modules.harness.fixtures import paper_table_check
from app.modules.harness.experiment import (
	DatasetEntry,
	ExperimentConfig,
	ExperimentReport,
	correlate_records,
	run_experiment,
)
