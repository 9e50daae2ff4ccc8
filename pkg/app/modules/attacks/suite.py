# -*- coding: utf-8 -*-
"""The evaluation attack suite and a chunked, optionally threaded runner.

Samples are split into fixed-size chunks; each chunk gets its own random
stream derived from (seed, chunk index) and its own tape, so results do not
depend on the number of workers or on completion order.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from app.modules.attacks.common import AttackConfig, AttackResult, Classifier
from app.modules.attacks.cw import cw
from app.modules.attacks.fgsm import fgsm
from app.modules.attacks.pgd import pgd

# pylint: disable=bad-whitespace
TABLE_ATTACKS = (
	AttackConfig('pgd20_l2',   'pgd',  'l2',   1.0,       steps=20, step_size=0.2,     random_init=True),
	AttackConfig('pgd40_l2',   'pgd',  'l2',   1.0,       steps=40, step_size=0.2,     random_init=True),
	AttackConfig('pgd20_linf', 'pgd',  'linf', 8 / 255,   steps=20, step_size=2 / 255, random_init=True),
	# 40-step linf uses the larger step size.
	AttackConfig('pgd40_linf', 'pgd',  'linf', 8 / 255,   steps=40, step_size=4 / 255, random_init=True),
	AttackConfig('fgsm_linf',  'fgsm', 'linf', 8 / 255),
	AttackConfig('cw20_l2',    'cw',   'l2',   1.0,       steps=20, cw_c=1.0, cw_kappa=0.0, cw_lr=0.01),
	AttackConfig('cw40_l2',    'cw',   'l2',   1.0,       steps=40, cw_c=1.0, cw_kappa=0.0, cw_lr=0.01),
)
# pylint: enable=bad-whitespace

# Adversarial-training attack of the ortho-proj and saliency-mask variants.
TRAINING_PGD = AttackConfig('pgd10_linf', 'pgd', 'linf', 8 / 255, steps=10, step_size=2 / 255, random_init=True)

# Attack used for the per-epoch robustness series in tracking mode.
TRACKING_ATTACK = 'pgd40_linf'

SUITE = {cfg.name: cfg for cfg in TABLE_ATTACKS + (TRAINING_PGD,)}

DEFAULT_CHUNK = 256


def run_attack(model: Classifier, x: np.ndarray, y: np.ndarray, cfg: AttackConfig, rng: Optional[np.random.Generator] = None) -> AttackResult:
	"""Dispatches on the attack family."""
	if cfg.family == 'fgsm':
		return fgsm(model, x, y, cfg)
	if cfg.family == 'pgd':
		return pgd(model, x, y, cfg, rng=rng)
	return cw(model, x, y, cfg)


def _merge(parts: list, x: np.ndarray) -> AttackResult:
	if not parts:
		return AttackResult(perturbed=x.copy(), success=np.zeros(0, dtype=bool), norms=np.zeros(0))
	projected = [p.projected for p in parts]
	return AttackResult(
		perturbed=np.concatenate([p.perturbed for p in parts]),
		success=np.concatenate([p.success for p in parts]),
		norms=np.concatenate([p.norms for p in parts]),
		losses=[p.losses for p in parts] if any(p.losses for p in parts) else [],
		projected=None if projected[0] is None else np.concatenate(projected),
	)


def attack_dataset(
	model: Classifier,
	x: np.ndarray,
	y: np.ndarray,
	cfg: AttackConfig,
	seed: int = 0,
	workers: int = 1,
	chunk_size: int = DEFAULT_CHUNK
) -> AttackResult:
	"""Attacks every sample; results are ordered by input index."""
	starts = range(0, x.shape[0], chunk_size)
	streams = np.random.SeedSequence(seed).spawn(len(starts))

	def job(index: int) -> AttackResult:
		start = starts[index]
		rng = np.random.default_rng(streams[index])
		return run_attack(model, x[start:start + chunk_size], y[start:start + chunk_size], cfg, rng)

	if workers > 1 and len(starts) > 1:
		with ThreadPoolExecutor(max_workers=workers) as pool:
			parts = list(pool.map(job, range(len(starts))))
	else:
		parts = [job(i) for i in range(len(starts))]
	return _merge(parts, x)
