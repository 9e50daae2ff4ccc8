# -*- coding: utf-8 -*-
"""SGD (with momentum) and Adam, updating parameter tensors in place.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.modules.autograd.common import AutogradError, ShapeError
from app.modules.autograd.tensor import Tensor

# Adam defaults; only the learning rate is ever configured by callers.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class OptimizerState:
	kind: str
	learning_rate: float
	momentum: float = 0.0
	beta1: float = ADAM_BETA1
	beta2: float = ADAM_BETA2
	epsilon: float = ADAM_EPSILON
	step: int = 0
	# Moment buffers, one list entry per parameter, in parameter order.
	buffers: dict[str, list] = field(default_factory=dict)

	@classmethod
	def create(cls, kind: str, params: Sequence[Tensor], learning_rate: float, **kwargs) -> 'OptimizerState':
		if kind not in ('sgd', 'adam'):
			raise AutogradError(f'unknown optimizer kind {kind!r}')
		if learning_rate <= 0:
			raise AutogradError(f'learning rate must be positive, got {learning_rate}')
		state = cls(kind=kind, learning_rate=learning_rate, **kwargs)
		names = ('velocity',) if kind == 'sgd' else ('m', 'v')
		for name in names:
			state.buffers[name] = [np.zeros(p.shape) for p in params]
		return state


def _gradients(params: Sequence[Tensor], grads: Optional[Sequence]) -> list:
	if grads is None:
		grads = [p.grad for p in params]
	if len(grads) != len(params):
		raise AutogradError(f'{len(params)} parameters but {len(grads)} gradients')
	result = []
	for param, grad in zip(params, grads):
		grad = np.zeros(param.shape) if grad is None else np.asarray(grad, dtype=np.float64)
		if grad.shape != param.shape:
			raise ShapeError('optimizer', param.shape, grad.shape)
		result.append(grad)
	return result


def sgd_step(params: Sequence[Tensor], grads: Optional[Sequence], state: OptimizerState) -> Sequence[Tensor]:
	"""p <- p - lr * (g + momentum * velocity); velocity <- momentum * velocity + g.

	`grads` defaults to each parameter's `.grad` (None counts as zero).
	"""
	if state.kind != 'sgd':
		raise AutogradError(f'sgd_step called with a {state.kind} state')
	grads = _gradients(params, grads)
	velocities = state.buffers['velocity']
	for i, (param, grad) in enumerate(zip(params, grads)):
		update = grad + state.momentum * velocities[i]
		velocities[i] = state.momentum * velocities[i] + grad
		param.data -= state.learning_rate * update
	state.step += 1
	return params


def adam_step(params: Sequence[Tensor], grads: Optional[Sequence], state: OptimizerState) -> Sequence[Tensor]:
	"""Bias-corrected Adam update."""
	if state.kind != 'adam':
		raise AutogradError(f'adam_step called with a {state.kind} state')
	grads = _gradients(params, grads)
	state.step += 1
	correction1 = 1.0 - state.beta1 ** state.step
	correction2 = 1.0 - state.beta2 ** state.step
	first, second = state.buffers['m'], state.buffers['v']
	for i, (param, grad) in enumerate(zip(params, grads)):
		first[i] = state.beta1 * first[i] + (1.0 - state.beta1) * grad
		second[i] = state.beta2 * second[i] + (1.0 - state.beta2) * grad * grad
		m_hat = first[i] / correction1
		v_hat = second[i] / correction2
		param.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
	return params


def step(params: Sequence[Tensor], state: OptimizerState, grads: Optional[Sequence] = None) -> Sequence[Tensor]:
	"""Dispatches on `state.kind`."""
	if state.kind == 'sgd':
		return sgd_step(params, grads, state)
	return adam_step(params, grads, state)
