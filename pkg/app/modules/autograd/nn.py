# -*- coding: utf-8 -*-
"""Layers assembled from the primitive set.

Parameters are registered explicitly, so `named_parameters()` has a stable
order (registration order, children after own parameters). Checkpoints and
optimizer buffers rely on that order.
"""
from typing import Iterator, Optional

import numpy as np

from app.modules.autograd import ops
from app.modules.autograd.common import AutogradError, ShapeError
from app.modules.autograd.tensor import Tensor


class Module:
	"""Container of named parameters, buffers and child modules."""

	def __init__(self):
		self._params: dict[str, Tensor] = {}
		self._buffers: dict[str, Tensor] = {}
		self._children: dict[str, 'Module'] = {}

	def add_parameter(self, name: str, value: np.ndarray) -> Tensor:
		tensor = Tensor(value, requires_grad=True, name=name)
		self._params[name] = tensor
		return tensor

	def add_buffer(self, name: str, value: np.ndarray) -> Tensor:
		"""Non-trainable state that still belongs in checkpoints."""
		tensor = Tensor(value, name=name)
		self._buffers[name] = tensor
		return tensor

	def add_module(self, name: str, module: 'Module') -> 'Module':
		self._children[name] = module
		return module

	def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Tensor]]:
		for name, tensor in self._params.items():
			yield prefix + name, tensor
		for child_name, child in self._children.items():
			yield from child.named_parameters(f'{prefix}{child_name}.')

	def named_buffers(self, prefix: str = '') -> Iterator[tuple[str, Tensor]]:
		for name, tensor in self._buffers.items():
			yield prefix + name, tensor
		for child_name, child in self._children.items():
			yield from child.named_buffers(f'{prefix}{child_name}.')

	def parameters(self) -> list[Tensor]:
		return [tensor for _, tensor in self.named_parameters()]

	def zero_grad(self):
		for tensor in self.parameters():
			tensor.grad = None

	def state_dict(self) -> dict[str, np.ndarray]:
		state = {name: t.data.copy() for name, t in self.named_parameters()}
		state.update({name: t.data.copy() for name, t in self.named_buffers()})
		return state

	def load_state_dict(self, state: dict[str, np.ndarray]):
		"""Copies arrays into existing tensors. Buffers may change shape."""
		params = dict(self.named_parameters())
		buffers = dict(self.named_buffers())
		expected = set(params) | set(buffers)
		if set(state) != expected:
			missing = sorted(expected - set(state))
			unexpected = sorted(set(state) - expected)
			raise AutogradError(f'state mismatch: missing {missing}, unexpected {unexpected}')
		for name, tensor in params.items():
			value = np.asarray(state[name], dtype=np.float64)
			if value.shape != tensor.shape:
				raise ShapeError(f'load_state_dict[{name}]', tensor.shape, value.shape)
			tensor.data = value.copy()
		for name, tensor in buffers.items():
			tensor.data = np.asarray(state[name], dtype=np.float64).copy()


class Linear(Module):
	"""y = x W + b, with the bias broadcast through a ones-column matmul."""

	def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
		super().__init__()
		bound = 1.0 / np.sqrt(in_features)
		self.in_features = in_features
		self.out_features = out_features
		self.weight = self.add_parameter('weight', rng.uniform(-bound, bound, (in_features, out_features)))
		self.bias = self.add_parameter('bias', np.zeros((1, out_features)))

	def __call__(self, x: Tensor) -> Tensor:
		if x.ndim != 2 or x.shape[1] != self.in_features:
			raise ShapeError('linear', x.shape, self.weight.shape)
		ones = Tensor(np.ones((x.shape[0], 1)))
		return ops.matmul(x, self.weight) + ops.matmul(ones, self.bias)


class Conv2d(Module):
	"""Bias-free stride-1 convolution with 'same' padding for odd kernels."""

	def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator):
		super().__init__()
		fan_in = in_channels * kernel_size * kernel_size
		bound = 1.0 / np.sqrt(fan_in)
		self.padding = kernel_size // 2
		self.weight = self.add_parameter(
			'weight',
			rng.uniform(-bound, bound, (out_channels, in_channels, kernel_size, kernel_size))
		)

	def __call__(self, x: Tensor) -> Tensor:
		return ops.conv2d(x, self.weight, padding=self.padding)


def _pool_matrix(height: int, width: int) -> np.ndarray:
	"""Constant (H*W, H/2*W/2) matrix averaging each 2x2 block."""
	out_h, out_w = height // 2, width // 2
	matrix = np.zeros((height * width, out_h * out_w))
	for row in range(height):
		for col in range(width):
			matrix[row * width + col, (row // 2) * out_w + col // 2] = 0.25
	return matrix


class MeanPool2d:
	"""2x2 mean pooling, stride 2, as reshape + matmul with a constant matrix."""

	def __init__(self):
		self._cache: dict[tuple, Tensor] = {}

	def __call__(self, x: Tensor) -> Tensor:
		n, c, h, w = x.shape
		if h % 2 or w % 2:
			raise ShapeError('mean_pool2d', x.shape)
		key = (h, w)
		if key not in self._cache:
			self._cache[key] = Tensor(_pool_matrix(h, w))
		flat = ops.reshape(x, (n * c, h * w))
		pooled = ops.matmul(flat, self._cache[key])
		return ops.reshape(pooled, (n, c, h // 2, w // 2))


class MLP(Module):
	"""Two fully-connected layers with a relu in between."""

	def __init__(self, in_features: int, hidden: int, out_features: int, rng: np.random.Generator):
		super().__init__()
		self.hidden = self.add_module('hidden', Linear(in_features, hidden, rng))
		self.output = self.add_module('output', Linear(hidden, out_features, rng))

	def __call__(self, x: Tensor, activation: Optional[str] = None) -> Tensor:
		out = self.output(ops.relu(self.hidden(x)))
		if activation == 'sigmoid':
			return ops.sigmoid(out)
		return out


def flatten(x: Tensor) -> Tensor:
	return ops.reshape(x, (x.shape[0], -1))
