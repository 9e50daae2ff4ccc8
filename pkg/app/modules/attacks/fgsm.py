# -*- coding: utf-8 -*-
"""Fast gradient sign method: one signed gradient step of size ε.
"""
from typing import Optional

import numpy as np

from app.modules.attacks.common import (
	AttackConfig,
	AttackError,
	AttackResult,
	Classifier,
	LossFn,
	finish,
	input_gradient,
)


def fgsm(
	model: Classifier,
	x: np.ndarray,
	y: np.ndarray,
	cfg: AttackConfig,
	loss_fn: Optional[LossFn] = None
) -> AttackResult:
	"""x~ = clip(x + ε * sign(grad_x L), 0, 1), gradient taken at the clean input."""
	if cfg.family != 'fgsm':
		raise AttackError(f'{cfg.name}: fgsm called with a {cfg.family} config')
	x = np.asarray(x, dtype=np.float64)
	grad = input_gradient(model, x, y, loss_fn)
	perturbed = np.clip(x + cfg.epsilon * np.sign(grad), 0.0, 1.0)
	return finish(model, x, y, perturbed, cfg.norm)
