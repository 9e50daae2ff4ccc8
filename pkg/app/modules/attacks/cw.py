# -*- coding: utf-8 -*-
"""Carlini-Wagner l2 attack, optimised with Adam in tanh space.

Minimises ||x~ - x||_2^2 + c * max(Z_y - max_{i != y} Z_i, -κ) with
x~ = (tanh(w) + 1) / 2. CW regularises rather than constrains the
perturbation, so the final δ is projected onto the configured ε-ball; the
samples where that projection was active are flagged in the result.
"""
import logging
from typing import Callable, Optional

import numpy as np

from app.modules.attacks.common import (
	AttackConfig,
	AttackError,
	AttackResult,
	Classifier,
	finish,
	per_sample_norms,
	project_to_ball,
)
from app.modules.autograd import Tensor, backward, ops
from app.modules.autograd.optim import OptimizerState, adam_step

logger = logging.getLogger(__name__)

# Keeps atanh finite for pixels at exactly 0 or 1.
_TANH_MARGIN = 1e-6


def _margin_masks(logits: np.ndarray, labels: np.ndarray) -> tuple:
	"""One-hot masks selecting Z_y and the strongest other class."""
	n, k = logits.shape
	rows = np.arange(n)
	true_mask = np.zeros((n, k))
	true_mask[rows, labels] = 1.0
	others = np.where(true_mask > 0, -np.inf, logits)
	other_mask = np.zeros((n, k))
	other_mask[rows, np.argmax(others, axis=1)] = 1.0
	return true_mask, other_mask


def cw(
	model: Classifier,
	x: np.ndarray,
	y: np.ndarray,
	cfg: AttackConfig,
	on_step: Optional[Callable[[int, np.ndarray], None]] = None
) -> AttackResult:
	if cfg.family != 'cw':
		raise AttackError(f'{cfg.name}: cw called with a {cfg.family} config')
	x = np.asarray(x, dtype=np.float64)
	y = np.asarray(y)
	if cfg.steps == 0:
		return finish(model, x, y, x.copy(), cfg.norm, projected=np.zeros(x.shape[0], dtype=bool))

	w = Tensor(np.arctanh(np.clip(2.0 * x - 1.0, -1.0 + _TANH_MARGIN, 1.0 - _TANH_MARGIN)), requires_grad=True)
	state = OptimizerState.create('adam', [w], cfg.cw_lr)
	clean = Tensor(x)
	losses = []

	for step in range(cfg.steps):
		perturbed = (ops.tanh(w) + 1.0) * 0.5
		diff = perturbed - clean
		distance = ops.sum(diff * diff)
		logits = model.logits(perturbed)
		true_mask, other_mask = _margin_masks(logits.data, y)
		margin = ops.sum(logits * Tensor(true_mask), axis=1) - ops.sum(logits * Tensor(other_mask), axis=1)
		# max(margin, -κ) == relu(margin + κ) - κ
		hinge = ops.relu(margin + cfg.cw_kappa) - cfg.cw_kappa
		loss = distance + cfg.cw_c * ops.sum(hinge)
		losses.append(loss.item())
		backward(loss, inputs=[w])
		adam_step([w], [w.grad], state)
		if on_step is not None:
			on_step(step, (np.tanh(w.data) + 1.0) * 0.5)

	raw = (np.tanh(w.data) + 1.0) * 0.5
	projected = per_sample_norms(raw - x, 'l2') > cfg.epsilon
	if projected.any():
		logger.debug('%s: %d/%d perturbations projected onto the ε-ball', cfg.name, int(projected.sum()), x.shape[0])
	delta = project_to_ball(raw - x, 'l2', cfg.epsilon)
	perturbed = np.clip(x + delta, 0.0, 1.0)
	return finish(model, x, y, perturbed, cfg.norm, losses=losses, projected=projected)
