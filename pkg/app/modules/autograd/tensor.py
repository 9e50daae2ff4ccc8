# -*- coding: utf-8 -*-
"""Dense float64 tensors and the gradient tape.

A Tensor wraps a row-major float64 numpy array. Primitives (see ops.py) record
themselves on the calling thread's active Tape whenever grad mode is on and at
least one input requires grad. backward() replays the tape in reverse and
consumes it.

Tapes are thread-local: every thread starts with its own empty tape, so
independent computations on different threads never share state.
"""
from collections.abc import Mapping
import contextlib
from dataclasses import dataclass
import threading
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from app.modules.autograd.common import AutogradError, DetachedOutputError, NonFiniteError


# backward_fn(grad_of_output, needs) -> one gradient (or None) per input.
BackwardFn = Callable[[np.ndarray, tuple], tuple]


class Tensor:
	"""n-dimensional float64 array with optional tape participation."""
	__slots__ = ('data', 'requires_grad', 'grad', 'is_leaf', 'name')

	def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
		array = np.array(data, dtype=np.float64)
		if not np.all(np.isfinite(array)):
			raise NonFiniteError('tensor')
		self.data = array
		self.requires_grad = bool(requires_grad)
		self.grad: Optional[np.ndarray] = None
		self.is_leaf = True
		self.name = name

	@classmethod
	def _wrap(cls, array: np.ndarray, requires_grad: bool) -> 'Tensor':
		"""Builds a non-leaf tensor around an already validated array (no copy)."""
		tensor = cls.__new__(cls)
		tensor.data = np.ascontiguousarray(array, dtype=np.float64)
		tensor.requires_grad = requires_grad
		tensor.grad = None
		tensor.is_leaf = False
		tensor.name = None
		return tensor

	@property
	def shape(self) -> tuple:
		return self.data.shape

	@property
	def size(self) -> int:
		return self.data.size

	@property
	def ndim(self) -> int:
		return self.data.ndim

	def numpy(self) -> np.ndarray:
		return self.data

	def item(self) -> float:
		if self.data.size != 1:
			raise AutogradError(f'item: tensor of shape {self.shape} is not a scalar')
		return float(self.data.reshape(()))

	def detach(self) -> 'Tensor':
		return Tensor(self.data)

	def zero_grad(self):
		self.grad = None

	def __repr__(self):
		flag = ', requires_grad=True' if self.requires_grad else ''
		return f'Tensor(shape={self.shape}{flag})'

	# Operators dispatch to the recorded primitives.
	def __add__(self, other):
		return _ops.add(self, other)

	def __radd__(self, other):
		return _ops.add(other, self)

	def __sub__(self, other):
		return _ops.sub(self, other)

	def __rsub__(self, other):
		return _ops.sub(other, self)

	def __mul__(self, other):
		return _ops.mul(self, other)

	def __rmul__(self, other):
		return _ops.mul(other, self)

	def __truediv__(self, other):
		if isinstance(other, Tensor):
			raise AutogradError('div: only division by a python scalar is supported')
		return _ops.mul(self, 1.0 / float(other))

	def __neg__(self):
		return _ops.mul(self, -1.0)

	def __matmul__(self, other):
		return _ops.matmul(self, other)

	def sum(self, axis: Optional[int] = None) -> 'Tensor':
		return _ops.sum(self, axis=axis)

	def mean(self, axis: Optional[int] = None) -> 'Tensor':
		return _ops.mean(self, axis=axis)

	def reshape(self, *shape) -> 'Tensor':
		if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
			shape = tuple(shape[0])
		return _ops.reshape(self, shape)

	def relu(self) -> 'Tensor':
		return _ops.relu(self)

	def sigmoid(self) -> 'Tensor':
		return _ops.sigmoid(self)

	def tanh(self) -> 'Tensor':
		return _ops.tanh(self)

	def exp(self) -> 'Tensor':
		return _ops.exp(self)

	def log(self) -> 'Tensor':
		return _ops.log(self)


@dataclass(eq=False)
class Record:
	"""One primitive application on the tape."""
	op: str
	inputs: tuple
	output: Tensor
	backward_fn: BackwardFn


class Tape:
	"""Ordered list of recorded primitives, in execution (topological) order."""

	def __init__(self):
		self.records: list[Record] = []
		self._producers: dict[int, Record] = {}
		# Instrumentation: how many times backward() ran over this tape.
		self.backward_count = 0

	def record(self, record: Record):
		self.records.append(record)
		self._producers[id(record.output)] = record

	def producer(self, tensor: Tensor) -> Optional[Record]:
		record = self._producers.get(id(tensor))
		if record is not None and record.output is tensor:
			return record
		return None

	def clear(self):
		self.records.clear()
		self._producers.clear()

	def __len__(self):
		return len(self.records)


class _LocalState(threading.local):
	def __init__(self):
		self.tape = Tape()
		self.grad_enabled = True


_STATE = _LocalState()


def active_tape() -> Tape:
	"""Tape of the calling thread."""
	return _STATE.tape


def is_grad_enabled() -> bool:
	return _STATE.grad_enabled


@contextlib.contextmanager
def tape_scope(tape: Optional[Tape] = None) -> Iterator[Tape]:
	"""Makes `tape` (a fresh one by default) active for the block."""
	tape = Tape() if tape is None else tape
	previous = _STATE.tape
	_STATE.tape = tape
	try:
		yield tape
	finally:
		_STATE.tape = previous


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
	"""Nothing is recorded inside the block; results never require grad."""
	previous = _STATE.grad_enabled
	_STATE.grad_enabled = False
	try:
		yield
	finally:
		_STATE.grad_enabled = previous


def record_result(op: str, data: np.ndarray, inputs: tuple, backward_fn: BackwardFn) -> Tensor:
	"""Wraps a primitive's forward value and records it when needed.

	Every public primitive goes through here, so a non-finite value can never
	escape into a tensor.
	"""
	if not np.all(np.isfinite(data)):
		raise NonFiniteError(op)
	requires_grad = _STATE.grad_enabled and any(t.requires_grad for t in inputs)
	output = Tensor._wrap(data, requires_grad)
	if requires_grad:
		_STATE.tape.record(Record(op, inputs, output, backward_fn))
	return output


class GradientMap(Mapping):
	"""Gradients keyed by the leaf tensors themselves."""

	def __init__(self):
		self._items: dict[int, tuple] = {}

	def _set(self, tensor: Tensor, grad: np.ndarray):
		self._items[id(tensor)] = (tensor, grad)

	def __getitem__(self, tensor: Tensor) -> np.ndarray:
		try:
			return self._items[id(tensor)][1]
		except KeyError:
			raise KeyError(f'no gradient for {tensor!r}') from None

	def __iter__(self):
		return (tensor for tensor, _ in self._items.values())

	def __len__(self):
		return len(self._items)

	def __contains__(self, tensor) -> bool:
		return id(tensor) in self._items


def _reachable_from(tape: Tape, inputs: Sequence[Tensor]) -> set:
	"""Ids of every tensor on the tape that depends on one of `inputs`."""
	reached = {id(t) for t in inputs}
	for record in tape.records:
		if any(id(t) in reached for t in record.inputs):
			reached.add(id(record.output))
	return reached


def backward(output: Tensor, inputs: Optional[Sequence[Tensor]] = None) -> GradientMap:
	"""Reverse-mode sweep from a scalar `output` over the active tape.

	Every requires_grad leaf reached gets `.grad` set to d(output)/d(leaf)
	(overwriting any previous value). With `inputs` given, propagation is
	restricted to paths starting at those tensors and only they receive
	gradients; an input that does not influence the output gets zeros.

	The tape is consumed either way.
	"""
	tape = _STATE.tape
	if output.size != 1:
		raise AutogradError(f'backward: output must have exactly one element, got shape {output.shape}')
	if not output.requires_grad:
		raise DetachedOutputError('backward: output does not require grad')
	if not output.is_leaf and tape.producer(output) is None:
		raise DetachedOutputError('backward: output is not on the active tape')

	tape.backward_count += 1
	wanted = None if inputs is None else _reachable_from(tape, inputs)

	grads: dict[int, np.ndarray] = {id(output): np.ones(output.shape)}
	leaves: dict[int, Tensor] = {}
	if output.is_leaf:
		leaves[id(output)] = output

	for record in reversed(tape.records):
		grad = grads.pop(id(record.output), None)
		if grad is None:
			continue
		needs = tuple(
			t.requires_grad and (wanted is None or id(t) in wanted)
			for t in record.inputs
		)
		if not any(needs):
			continue
		input_grads = record.backward_fn(grad, needs)
		for tensor, need, input_grad in zip(record.inputs, needs, input_grads):
			if not need or input_grad is None:
				continue
			key = id(tensor)
			grads[key] = grads[key] + input_grad if key in grads else input_grad
			if tensor.is_leaf:
				leaves[key] = tensor

	tape.clear()

	result = GradientMap()
	if inputs is not None:
		for tensor in inputs:
			grad = grads.get(id(tensor)) if id(tensor) in leaves else None
			grad = np.zeros(tensor.shape) if grad is None else grad.reshape(tensor.shape)
			tensor.grad = grad
			result._set(tensor, grad)
		return result

	for key, leaf in leaves.items():
		grad = grads[key].reshape(leaf.shape)
		leaf.grad = grad
		result._set(leaf, grad)
	return result


# Operator overloads dispatch to primitives; imported last to avoid a cycle.
from app.modules.autograd import ops as _ops  # noqa: E402
