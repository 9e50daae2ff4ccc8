# -*- coding: utf-8 -*-
"""Attacks common stuff: configuration, results, the ε-ball projection.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from app.modules.autograd import Tensor, backward, no_grad, ops

FAMILIES = ('fgsm', 'pgd', 'cw')
NORMS = ('l2', 'linf')


class AttackError(Exception):
	"""Base class for all attack errors."""
	pass


class Classifier(Protocol):
	"""Anything differentiable from inputs to class scores."""

	def logits(self, x: Tensor) -> Tensor:
		...


# loss_fn(logits, labels) -> scalar tensor to be maximised.
LossFn = Callable[[Tensor, np.ndarray], Tensor]


def cross_entropy_sum(logits: Tensor, labels: np.ndarray) -> Tensor:
	"""Summed so every sample's gradient is independent of batch size."""
	return ops.softmax_cross_entropy(logits, labels, reduction='sum')


@dataclass(frozen=True)
class AttackConfig:
	"""One attack row. `epsilon` is in pixel units for linf, absolute for l2."""
	name: str
	family: str
	norm: str
	epsilon: float
	steps: int = 1
	step_size: float = 0.0
	random_init: bool = False
	cw_c: float = 1.0
	cw_kappa: float = 0.0
	cw_lr: float = 0.01

	def __post_init__(self):
		if self.family not in FAMILIES:
			raise AttackError(f'{self.name}: unknown attack family {self.family!r}')
		if self.norm not in NORMS:
			raise AttackError(f'{self.name}: unknown norm {self.norm!r}')
		if self.epsilon < 0:
			raise AttackError(f'{self.name}: epsilon must be non-negative, got {self.epsilon}')
		if self.family == 'pgd' and self.steps < 1:
			raise AttackError(f'{self.name}: pgd needs at least one step')
		if self.family == 'cw' and (self.steps < 0 or self.norm != 'l2'):
			raise AttackError(f'{self.name}: cw needs steps >= 0 and the l2 norm')
		if self.family == 'fgsm' and self.norm != 'linf':
			raise AttackError(f'{self.name}: fgsm is defined for the linf norm only')


@dataclass
class AttackResult:
	perturbed: np.ndarray
	success: np.ndarray
	norms: np.ndarray
	# Per-iteration objective (CW only).
	losses: list = field(default_factory=list)
	# Samples whose final perturbation had to be projected onto the ε-ball (CW only).
	projected: Optional[np.ndarray] = None


def per_sample_norms(delta: np.ndarray, norm: str) -> np.ndarray:
	flat = delta.reshape(delta.shape[0], -1)
	if norm == 'linf':
		return np.abs(flat).max(axis=1) if flat.shape[1] else np.zeros(flat.shape[0])
	return np.sqrt(np.sum(flat * flat, axis=1))


def _broadcast_per_sample(values: np.ndarray, like: np.ndarray) -> np.ndarray:
	return values.reshape((like.shape[0],) + (1,) * (like.ndim - 1))


def project_to_ball(delta: np.ndarray, norm: str, epsilon: float) -> np.ndarray:
	"""Per-sample projection onto {||d||_p <= epsilon}; leading axis indexes samples.

	linf clamps elementwise; l2 rescales by epsilon / ||d|| only when outside.
	"""
	if norm == 'linf':
		return np.clip(delta, -epsilon, epsilon)
	if norm != 'l2':
		raise AttackError(f'unknown norm {norm!r}')
	norms = per_sample_norms(delta, 'l2')
	scale = np.ones_like(norms)
	outside = norms > epsilon
	scale[outside] = epsilon / norms[outside]
	return delta * _broadcast_per_sample(scale, delta)


def input_gradient(model: Classifier, x: np.ndarray, y: np.ndarray, loss_fn: Optional[LossFn] = None) -> np.ndarray:
	"""d loss / d x with a single backward pass; parameter grads are untouched."""
	loss_fn = cross_entropy_sum if loss_fn is None else loss_fn
	x_t = Tensor(x, requires_grad=True)
	loss = loss_fn(model.logits(x_t), y)
	return backward(loss, inputs=[x_t])[x_t]


def predict(model: Classifier, x: np.ndarray) -> np.ndarray:
	with no_grad():
		return np.argmax(model.logits(Tensor(x)).data, axis=1)


def finish(model: Classifier, x: np.ndarray, y: np.ndarray, perturbed: np.ndarray, norm: str, **extra) -> AttackResult:
	return AttackResult(
		perturbed=perturbed,
		success=predict(model, perturbed) != np.asarray(y),
		norms=per_sample_norms(perturbed - x, norm),
		**extra
	)
