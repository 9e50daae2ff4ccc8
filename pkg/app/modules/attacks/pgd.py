# -*- coding: utf-8 -*-
"""Projected gradient descent under the l2 or linf norm.

Each step moves δ by α along sign(grad) (linf) or grad / ||grad||_2 (l2,
per sample), projects δ onto the ε-ball and clips x + δ to [0, 1]. A zero
gradient gives a zero step.
"""
from typing import Callable, Optional

import numpy as np

from app.modules.attacks.common import (
	AttackConfig,
	AttackError,
	AttackResult,
	Classifier,
	LossFn,
	finish,
	input_gradient,
	per_sample_norms,
	project_to_ball,
)


def random_start(shape: tuple, norm: str, epsilon: float, rng: np.random.Generator) -> np.ndarray:
	"""Uniform draw from the ε-ball (per coordinate for linf, volume-uniform for l2)."""
	if norm == 'linf':
		return rng.uniform(-epsilon, epsilon, size=shape)
	n = shape[0]
	dims = int(np.prod(shape[1:]))
	direction = rng.standard_normal((n, dims))
	lengths = np.linalg.norm(direction, axis=1, keepdims=True)
	lengths[lengths == 0] = 1.0
	radius = epsilon * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dims)
	return (direction / lengths * radius).reshape(shape)


def step_direction(grad: np.ndarray, norm: str) -> np.ndarray:
	if norm == 'linf':
		return np.sign(grad)
	norms = per_sample_norms(grad, 'l2')
	safe = np.where(norms > 0, norms, 1.0)
	scale = np.where(norms > 0, 1.0 / safe, 0.0)
	return grad * scale.reshape((grad.shape[0],) + (1,) * (grad.ndim - 1))


def pgd(
	model: Classifier,
	x: np.ndarray,
	y: np.ndarray,
	cfg: AttackConfig,
	rng: Optional[np.random.Generator] = None,
	loss_fn: Optional[LossFn] = None,
	on_step: Optional[Callable[[int, np.ndarray], None]] = None
) -> AttackResult:
	if cfg.family != 'pgd':
		raise AttackError(f'{cfg.name}: pgd called with a {cfg.family} config')
	x = np.asarray(x, dtype=np.float64)
	if cfg.random_init:
		if rng is None:
			raise AttackError(f'{cfg.name}: random initialisation needs a generator')
		delta = random_start(x.shape, cfg.norm, cfg.epsilon, rng)
		perturbed = np.clip(x + delta, 0.0, 1.0)
		delta = perturbed - x
	else:
		delta = np.zeros_like(x)
		perturbed = x.copy()

	for step in range(cfg.steps):
		grad = input_gradient(model, perturbed, y, loss_fn)
		delta = project_to_ball(delta + cfg.step_size * step_direction(grad, cfg.norm), cfg.norm, cfg.epsilon)
		perturbed = np.clip(x + delta, 0.0, 1.0)
		delta = perturbed - x
		if on_step is not None:
			on_step(step, perturbed)

	return finish(model, x, y, perturbed, cfg.norm)
