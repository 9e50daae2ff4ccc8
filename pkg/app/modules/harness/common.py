# -*- coding: utf-8 -*-
"""Harness common stuff: errors and stage-keyed seed streams.
"""
import zlib

import numpy as np


class HarnessError(Exception):
	"""Base class for all harness errors."""
	pass


class IdxFormatError(HarnessError):
	pass


class TrainingDivergedError(HarnessError):
	def __init__(self, epoch: int, detail: str = 'loss is not finite'):
		self.epoch = epoch
		super().__init__(f'training diverged in epoch {epoch}: {detail}')


class StatisticsError(HarnessError):
	pass


class ConfigError(HarnessError):
	pass


def stage_seed(master: int, *stage) -> np.random.SeedSequence:
	"""Seed sequence of one named stage, e.g. stage_seed(0, 'init', 'ortho-proj').

	The stream depends only on the master seed and the stage key, so adding
	or reordering stages never shifts another stage's numbers.
	"""
	key = tuple(zlib.crc32(str(part).encode('utf-8')) for part in stage)
	return np.random.SeedSequence(int(master), spawn_key=key)


def stage_rng(master: int, *stage) -> np.random.Generator:
	return np.random.default_rng(stage_seed(master, *stage))


def stage_int(master: int, *stage) -> int:
	"""A 32-bit integer seed for APIs that take plain ints."""
	return int(stage_seed(master, *stage).generate_state(1)[0])
