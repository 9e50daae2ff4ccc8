# -*- coding: utf-8 -*-
"""Recorded primitives of the tensor engine.

The primitive set is fixed: add, sub, mul, matmul, conv2d, relu, sigmoid,
tanh, exp, log, mean, sum, reshape, softmax_cross_entropy and mse.
Elementwise primitives accept equal shapes or one single-element operand
(python scalars are promoted); nothing else broadcasts.
"""
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from app.modules.autograd.common import AutogradError, ShapeError
from app.modules.autograd.tensor import Tensor, record_result


Operand = Union[Tensor, float, int]


def _as_tensor(value: Operand) -> Tensor:
	if isinstance(value, Tensor):
		return value
	return Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
	"""Reduces a gradient back onto a (possibly single-element) operand."""
	if grad.shape == shape:
		return grad
	return np.full(shape, grad.sum())


def _elementwise_shape(primitive: str, a: Tensor, b: Tensor) -> tuple:
	if a.shape == b.shape:
		return a.shape
	if b.size == 1:
		return a.shape
	if a.size == 1:
		return b.shape
	raise ShapeError(primitive, a.shape, b.shape)


def _scalar_view(t: Tensor, shape: tuple) -> np.ndarray:
	return t.data if t.shape == shape else t.data.reshape(())


def add(a: Operand, b: Operand) -> Tensor:
	a, b = _as_tensor(a), _as_tensor(b)
	shape = _elementwise_shape('add', a, b)
	data = _scalar_view(a, shape) + _scalar_view(b, shape)

	def backward_fn(grad, needs):
		return (
			_unbroadcast(grad, a.shape) if needs[0] else None,
			_unbroadcast(grad, b.shape) if needs[1] else None,
		)

	return record_result('add', np.broadcast_to(data, shape).copy(), (a, b), backward_fn)


def sub(a: Operand, b: Operand) -> Tensor:
	a, b = _as_tensor(a), _as_tensor(b)
	shape = _elementwise_shape('sub', a, b)
	data = _scalar_view(a, shape) - _scalar_view(b, shape)

	def backward_fn(grad, needs):
		return (
			_unbroadcast(grad, a.shape) if needs[0] else None,
			_unbroadcast(-grad, b.shape) if needs[1] else None,
		)

	return record_result('sub', np.broadcast_to(data, shape).copy(), (a, b), backward_fn)


def mul(a: Operand, b: Operand) -> Tensor:
	a, b = _as_tensor(a), _as_tensor(b)
	shape = _elementwise_shape('mul', a, b)
	av, bv = _scalar_view(a, shape), _scalar_view(b, shape)
	data = av * bv

	def backward_fn(grad, needs):
		return (
			_unbroadcast(grad * bv, a.shape) if needs[0] else None,
			_unbroadcast(grad * av, b.shape) if needs[1] else None,
		)

	return record_result('mul', np.broadcast_to(data, shape).copy(), (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
	a, b = _as_tensor(a), _as_tensor(b)
	if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
		raise ShapeError('matmul', a.shape, b.shape)
	data = a.data @ b.data

	def backward_fn(grad, needs):
		return (
			grad @ b.data.T if needs[0] else None,
			a.data.T @ grad if needs[1] else None,
		)

	return record_result('matmul', data, (a, b), backward_fn)


def _correlate(padded: np.ndarray, kernel: np.ndarray) -> np.ndarray:
	"""Valid cross-correlation of (N, C, H, W) with (O, C, k, k), stride 1."""
	k = kernel.shape[-1]
	windows = sliding_window_view(padded, (k, k), axis=(2, 3))
	# windows: (N, C, Ho, Wo, k, k) -> out (N, Ho, Wo, O)
	out = np.tensordot(windows, kernel, axes=([1, 4, 5], [1, 2, 3]))
	return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d(x: Tensor, kernel: Tensor, padding: int = 0) -> Tensor:
	"""Stride-1 zero-padded 2-D convolution (cross-correlation), square kernels.

	x: (N, C, H, W); kernel: (O, C, k, k) -> (N, O, H + 2p - k + 1, W + 2p - k + 1).
	"""
	x, kernel = _as_tensor(x), _as_tensor(kernel)
	if (
		x.ndim != 4 or kernel.ndim != 4
		or kernel.shape[1] != x.shape[1]
		or kernel.shape[2] != kernel.shape[3]
		or padding < 0
	):
		raise ShapeError('conv2d', x.shape, kernel.shape)
	k = kernel.shape[2]
	if x.shape[2] + 2 * padding < k or x.shape[3] + 2 * padding < k:
		raise ShapeError('conv2d', x.shape, kernel.shape)

	pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
	padded = np.pad(x.data, pad)
	data = _correlate(padded, kernel.data)

	def backward_fn(grad, needs):
		grad_x = grad_kernel = None
		if needs[0]:
			# Full correlation of the output gradient with the flipped kernel.
			flipped = kernel.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
			full = _correlate(np.pad(grad, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1))), flipped)
			h, w = x.shape[2], x.shape[3]
			grad_x = full[:, :, padding:padding + h, padding:padding + w]
		if needs[1]:
			windows = sliding_window_view(padded, (k, k), axis=(2, 3))
			grad_kernel = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
		return grad_x, grad_kernel

	return record_result('conv2d', data, (x, kernel), backward_fn)


def relu(a: Tensor) -> Tensor:
	a = _as_tensor(a)
	mask = a.data > 0

	def backward_fn(grad, needs):
		return (grad * mask,)

	return record_result('relu', a.data * mask, (a,), backward_fn)


def sigmoid(a: Tensor) -> Tensor:
	a = _as_tensor(a)
	data = special.expit(a.data)

	def backward_fn(grad, needs):
		return (grad * data * (1.0 - data),)

	return record_result('sigmoid', data, (a,), backward_fn)


def tanh(a: Tensor) -> Tensor:
	a = _as_tensor(a)
	data = np.tanh(a.data)

	def backward_fn(grad, needs):
		return (grad * (1.0 - data * data),)

	return record_result('tanh', data, (a,), backward_fn)


def exp(a: Tensor) -> Tensor:
	a = _as_tensor(a)
	with np.errstate(over='ignore'):
		data = np.exp(a.data)

	def backward_fn(grad, needs):
		return (grad * data,)

	return record_result('exp', data, (a,), backward_fn)


def log(a: Tensor) -> Tensor:
	a = _as_tensor(a)
	with np.errstate(divide='ignore', invalid='ignore'):
		data = np.log(a.data)

	def backward_fn(grad, needs):
		return (grad / a.data,)

	return record_result('log', data, (a,), backward_fn)


def _check_axis(primitive: str, a: Tensor, axis: Optional[int]):
	if axis is not None and not -a.ndim <= axis < a.ndim:
		raise ShapeError(primitive, a.shape)


def sum(a: Tensor, axis: Optional[int] = None) -> Tensor:  # pylint: disable=redefined-builtin
	a = _as_tensor(a)
	_check_axis('sum', a, axis)
	data = np.sum(a.data, axis=axis)

	def backward_fn(grad, needs):
		if axis is None:
			return (np.full(a.shape, float(grad.reshape(()))),)
		return (np.broadcast_to(np.expand_dims(grad, axis), a.shape).copy(),)

	return record_result('sum', np.asarray(data), (a,), backward_fn)


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
	a = _as_tensor(a)
	_check_axis('mean', a, axis)
	count = a.size if axis is None else a.shape[axis]
	data = np.mean(a.data, axis=axis)

	def backward_fn(grad, needs):
		if axis is None:
			return (np.full(a.shape, float(grad.reshape(())) / count),)
		return (np.broadcast_to(np.expand_dims(grad, axis), a.shape) / count,)

	return record_result('mean', np.asarray(data), (a,), backward_fn)


def reshape(a: Tensor, shape: tuple) -> Tensor:
	a = _as_tensor(a)
	shape = tuple(int(d) for d in shape)
	if -1 in shape:
		known = int(np.prod([d for d in shape if d != -1]))
		if shape.count(-1) > 1 or known == 0 or a.size % known:
			raise ShapeError('reshape', a.shape, shape)
		shape = tuple(a.size // known if d == -1 else d for d in shape)
	if int(np.prod(shape)) != a.size:
		raise ShapeError('reshape', a.shape, shape)

	def backward_fn(grad, needs):
		return (grad.reshape(a.shape),)

	return record_result('reshape', a.data.reshape(shape), (a,), backward_fn)


def softmax_cross_entropy(
	logits: Tensor,
	labels,
	weights: Optional[np.ndarray] = None,
	reduction: str = 'mean'
) -> Tensor:
	"""Cross-entropy of softmax(logits) against integer labels.

	`reduction` is 'mean' or 'sum'. With per-sample `weights` (constants)
	the result is sum_i w_i * CE_i and `reduction` is ignored.
	"""
	logits = _as_tensor(logits)
	labels = np.asarray(labels)
	if logits.ndim != 2 or labels.shape != (logits.shape[0],):
		raise ShapeError('softmax_cross_entropy', logits.shape, labels.shape)
	if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
		raise AutogradError(
			f'softmax_cross_entropy: labels must lie in [0, {logits.shape[1]})'
		)
	labels = labels.astype(np.int64)
	n = logits.shape[0]
	if weights is not None:
		coef = np.asarray(weights, dtype=np.float64)
		if coef.shape != (n,):
			raise ShapeError('softmax_cross_entropy', logits.shape, coef.shape)
	elif reduction == 'mean':
		coef = np.full(n, 1.0 / n)
	elif reduction == 'sum':
		coef = np.ones(n)
	else:
		raise AutogradError(f'softmax_cross_entropy: unknown reduction {reduction!r}')

	log_probs = special.log_softmax(logits.data, axis=1)
	rows = np.arange(n)
	losses = -log_probs[rows, labels]
	data = np.asarray(np.dot(coef, losses))

	def backward_fn(grad, needs):
		probs = np.exp(log_probs)
		probs[rows, labels] -= 1.0
		return (probs * coef[:, None] * float(grad.reshape(())),)

	return record_result('softmax_cross_entropy', data, (logits,), backward_fn)


def mse(a: Tensor, b: Tensor) -> Tensor:
	"""Mean squared error over all elements."""
	a, b = _as_tensor(a), _as_tensor(b)
	if a.shape != b.shape:
		raise ShapeError('mse', a.shape, b.shape)
	diff = a.data - b.data
	data = np.asarray(np.mean(diff * diff))

	def backward_fn(grad, needs):
		scaled = diff * (2.0 * float(grad.reshape(())) / diff.size)
		return (
			scaled if needs[0] else None,
			-scaled if needs[1] else None,
		)

	return record_result('mse', data, (a, b), backward_fn)


PRIMITIVES = {
	'add': add,
	'sub': sub,
	'mul': mul,
	'matmul': matmul,
	'conv2d': conv2d,
	'relu': relu,
	'sigmoid': sigmoid,
	'tanh': tanh,
	'exp': exp,
	'log': log,
	'mean': mean,
	'sum': sum,
	'reshape': reshape,
	'softmax_cross_entropy': softmax_cross_entropy,
	'mse': mse,
}


def forward_op(op_kind: str, *inputs, **params) -> Tensor:
	"""Applies the named primitive; the result is recorded when needed."""
	try:
		primitive = PRIMITIVES[op_kind]
	except KeyError:
		raise AutogradError(f'unknown primitive {op_kind!r}') from None
	return primitive(*inputs, **params)
