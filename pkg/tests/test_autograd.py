# -*- coding: utf-8 -*-
import threading

import numpy as np
import pytest

from app.modules.autograd import (
	AutogradError,
	DetachedOutputError,
	NonFiniteError,
	OptimizerState,
	ShapeError,
	Tensor,
	active_tape,
	adam_step,
	backward,
	no_grad,
	ops,
	sgd_step,
	tape_scope,
)
from app.modules.autograd.nn import MLP, Conv2d, Linear, MeanPool2d, Module

STEP = 1e-6


def _away_from_zero(rng, shape):
	values = rng.standard_normal(shape)
	return np.sign(values) * (np.abs(values) + 0.1)


def _shape(rng, ndim=2, low=1, high=4):
	return tuple(int(d) for d in rng.integers(low, high + 1, size=ndim))


def _softmax_case(rng):
	n, c = _shape(rng, 2, 2, 5)
	labels = rng.integers(c, size=n)
	return (lambda logits: ops.softmax_cross_entropy(logits, labels)), [rng.standard_normal((n, c))]


def _matmul_case(rng):
	n, k, m = _shape(rng, 3)
	return ops.matmul, [rng.standard_normal((n, k)), rng.standard_normal((k, m))]


def _pair(rng, ndim=2):
	shape = _shape(rng, ndim)
	return [rng.standard_normal(shape), rng.standard_normal(shape)]


def _with_scalar(rng):
	return [rng.standard_normal(_shape(rng)), np.array(rng.standard_normal())]


# name -> rng -> (function of tensors, input arrays)
CASES = {
	'add': lambda rng: (ops.add, _pair(rng)),
	'add_scalar': lambda rng: (ops.add, _with_scalar(rng)),
	'sub': lambda rng: (ops.sub, _pair(rng)),
	'sub_scalar': lambda rng: (ops.sub, _with_scalar(rng)[::-1]),
	'mul': lambda rng: (ops.mul, _pair(rng, 3)),
	'mul_scalar': lambda rng: (ops.mul, _with_scalar(rng)),
	'matmul': _matmul_case,
	'conv2d': lambda rng: (
		lambda x, w: ops.conv2d(x, w, padding=1),
		[rng.standard_normal((2, 2, 5, 4)), rng.standard_normal((3, 2, 3, 3))],
	),
	'conv2d_valid': lambda rng: (ops.conv2d, [rng.standard_normal((1, 1, 4, 4)), rng.standard_normal((2, 1, 2, 2))]),
	'relu': lambda rng: (ops.relu, [_away_from_zero(rng, _shape(rng, 3))]),
	'sigmoid': lambda rng: (ops.sigmoid, [rng.standard_normal(_shape(rng))]),
	'tanh': lambda rng: (ops.tanh, [rng.standard_normal(_shape(rng))]),
	'exp': lambda rng: (ops.exp, [rng.standard_normal(_shape(rng))]),
	'log': lambda rng: (ops.log, [rng.uniform(0.5, 2.0, _shape(rng))]),
	'sum': lambda rng: (ops.sum, [rng.standard_normal(_shape(rng, 3))]),
	'sum_axis': lambda rng: (lambda a: ops.sum(a, axis=1), [rng.standard_normal(_shape(rng, 3))]),
	'mean': lambda rng: (ops.mean, [rng.standard_normal(_shape(rng, 3))]),
	'mean_axis': lambda rng: (lambda a: ops.mean(a, axis=0), [rng.standard_normal(_shape(rng))]),
	'reshape': lambda rng: (lambda a: ops.reshape(a, (-1,)), [rng.standard_normal(_shape(rng, 3))]),
	'softmax_cross_entropy': _softmax_case,
	'softmax_cross_entropy_weighted': lambda rng: (
		lambda logits: ops.softmax_cross_entropy(logits, np.array([0, 2, 1]), weights=np.array([0.5, 0.2, 0.3])),
		[rng.standard_normal((3, 3))],
	),
	'mse': lambda rng: (ops.mse, _pair(rng)),
}


def _weighted_sum(fn, tensors, weights):
	out = fn(*tensors)
	return ops.sum(ops.mul(out, Tensor(weights.reshape(out.shape))))


def _check_gradients(fn, arrays, rng):
	tensors = [Tensor(a, requires_grad=True) for a in arrays]
	with no_grad():
		out_shape = fn(*[Tensor(a) for a in arrays]).shape
	weights = np.asarray(rng.standard_normal(out_shape))
	with tape_scope():
		grads = backward(_weighted_sum(fn, tensors, weights))

	for index, array in enumerate(arrays):
		numeric = np.zeros(array.shape)
		for position in np.ndindex(*array.shape):
			values = []
			for sign in (1.0, -1.0):
				shifted = [a.copy() for a in arrays]
				shifted[index][position] += sign * STEP
				with no_grad():
					values.append(_weighted_sum(fn, [Tensor(a) for a in shifted], weights).item())
			numeric[position] = (values[0] - values[1]) / (2 * STEP)
		np.testing.assert_allclose(grads[tensors[index]], numeric, rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize('name', sorted(CASES))
def test_gradients_match_finite_differences(name):
	for seed in range(50):
		rng = np.random.default_rng(seed)
		fn, arrays = CASES[name](rng)
		_check_gradients(fn, arrays, rng)


def test_backward_is_linear():
	def f(x, w):
		return ops.sum(ops.tanh(ops.matmul(x, w)))

	def g(x, w):
		return ops.mean(ops.mul(ops.sigmoid(ops.matmul(x, w)), ops.exp(ops.matmul(x, w))))

	def gradients(build):
		x = Tensor(x_data, requires_grad=True)
		w = Tensor(w_data, requires_grad=True)
		with tape_scope():
			grads = backward(build(x, w))
		return grads[x], grads[w]

	for seed in range(20):
		rng = np.random.default_rng(seed)
		x_data, w_data = rng.standard_normal((4, 3)), rng.standard_normal((3, 2))
		a, b = rng.uniform(-3.0, 3.0, size=2)
		combined = gradients(lambda x, w: ops.add(ops.mul(f(x, w), float(a)), ops.mul(g(x, w), float(b))))
		for total, part_f, part_g in zip(combined, gradients(f), gradients(g)):
			np.testing.assert_allclose(total, a * part_f + b * part_g, rtol=0, atol=1e-12)


def test_repeated_runs_are_bitwise_identical():
	def run():
		rng = np.random.default_rng(11)
		model = MLP(6, 8, 3, rng)
		x = Tensor(rng.standard_normal((5, 6)), requires_grad=True)
		labels = rng.integers(3, size=5)
		with tape_scope():
			logits = model(x)
			backward(ops.softmax_cross_entropy(logits, labels))
		return [logits.numpy().tobytes(), x.grad.tobytes()] + [p.grad.tobytes() for p in model.parameters()]

	assert run() == run()


def test_forward_examples():
	assert ops.sigmoid(Tensor(0.0)).item() == 0.5
	a = Tensor([[1.0, 2.0], [3.0, 4.0]])
	np.testing.assert_array_equal(ops.matmul(a, Tensor(np.eye(2))).numpy(), a.numpy())
	out = ops.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 2, 2))))
	np.testing.assert_array_equal(out.numpy(), np.full((1, 1, 2, 2), 4.0))


def test_backward_examples():
	x = Tensor(3.0, requires_grad=True)
	with tape_scope():
		grads = backward(x * x)
	assert grads[x] == pytest.approx(6.0)

	x = Tensor(0.0, requires_grad=True)
	with tape_scope():
		backward(ops.sigmoid(x))
	assert x.grad == pytest.approx(0.25)


def test_three_layer_network_gradients():
	rng = np.random.default_rng(7)
	net = Module()
	layers = [net.add_module(f'l{i}', Linear(n_in, n_out, rng)) for i, (n_in, n_out) in enumerate([(4, 5), (5, 3), (3, 2)])]
	x = rng.standard_normal((6, 4))
	labels = rng.integers(2, size=6)

	def loss_of(batch):
		out = Tensor(batch)
		for layer in layers[:-1]:
			out = ops.tanh(layer(out))
		return ops.softmax_cross_entropy(layers[-1](out), labels)

	with tape_scope():
		backward(loss_of(x))
	for param in net.parameters():
		analytic = param.grad.copy()
		numeric = np.zeros(param.shape)
		for position in np.ndindex(*param.shape):
			original = param.data[position]
			with no_grad():
				param.data[position] = original + 1e-5
				plus = loss_of(x).item()
				param.data[position] = original - 1e-5
				minus = loss_of(x).item()
			param.data[position] = original
			numeric[position] = (plus - minus) / 2e-5
		np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)


def test_backward_consumes_tape():
	x = Tensor(np.ones(3), requires_grad=True)
	with tape_scope() as tape:
		loss = ops.sum(ops.mul(x, x))
		assert len(tape) == 2
		backward(loss)
		assert len(tape) == 0
		assert tape.backward_count == 1
		with pytest.raises(DetachedOutputError):
			backward(loss)


def test_backward_needs_scalar_and_grad():
	x = Tensor(np.ones(3), requires_grad=True)
	with tape_scope():
		with pytest.raises(AutogradError):
			backward(ops.mul(x, 2.0))
	with no_grad():
		detached = ops.sum(x)
	assert not detached.requires_grad
	with pytest.raises(DetachedOutputError):
		backward(detached)


def test_backward_restricted_to_inputs():
	w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
	x = Tensor(np.array([0.5, 0.25]), requires_grad=True)
	unused = Tensor(np.ones(2), requires_grad=True)
	with tape_scope():
		grads = backward(ops.sum(ops.mul(w, x)), inputs=[x, unused])
	np.testing.assert_array_equal(grads[x], [1.0, -2.0])
	np.testing.assert_array_equal(grads[unused], [0.0, 0.0])
	assert w.grad is None
	assert w not in grads


def test_no_grad_records_nothing():
	x = Tensor(np.ones(2), requires_grad=True)
	with tape_scope() as tape:
		with no_grad():
			y = ops.exp(x)
		assert len(tape) == 0
		assert not y.requires_grad


def test_non_finite_values_rejected():
	with pytest.raises(NonFiniteError):
		Tensor([1.0, np.nan])
	with pytest.raises(NonFiniteError):
		ops.log(Tensor([0.0]))
	with pytest.raises(NonFiniteError):
		ops.exp(Tensor([1000.0]))


def test_shape_errors():
	with pytest.raises(ShapeError):
		ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
	with pytest.raises(ShapeError):
		ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
	with pytest.raises(ShapeError):
		ops.reshape(Tensor(np.ones(6)), (4, -1))
	with pytest.raises(AutogradError):
		ops.softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])


def test_tapes_are_thread_local():
	seen = {}

	def worker():
		x = Tensor(2.0, requires_grad=True)
		seen['records'] = len(active_tape())
		grads = backward(x * x * x)
		seen['grad'] = float(grads[x])

	y = Tensor(1.0, requires_grad=True)
	with tape_scope() as tape:
		ops.mul(y, y)
		thread = threading.Thread(target=worker)
		thread.start()
		thread.join()
		assert len(tape) == 1
	assert seen == {'records': 0, 'grad': 12.0}


def test_sgd_examples():
	p = Tensor([1.0], requires_grad=True)
	state = OptimizerState.create('sgd', [p], 0.1)
	sgd_step([p], [np.array([2.0])], state)
	assert p.data[0] == pytest.approx(0.8)
	sgd_step([p], [np.array([0.0])], state)
	assert p.data[0] == pytest.approx(0.8)

	p = Tensor([0.0], requires_grad=True)
	state = OptimizerState.create('sgd', [p], 0.1, momentum=0.9)
	sgd_step([p], [np.array([1.0])], state)
	assert p.data[0] == pytest.approx(-0.1)
	sgd_step([p], [np.array([1.0])], state)
	assert p.data[0] == pytest.approx(-0.29)


def test_adam_examples():
	p = Tensor([1.0], requires_grad=True)
	state = OptimizerState.create('adam', [p], 0.01)
	adam_step([p], [np.array([5.0])], state)
	assert abs(p.data[0] - 1.0) == pytest.approx(0.01, rel=1e-6)

	p = Tensor([1.0], requires_grad=True)
	state = OptimizerState.create('adam', [p], 0.01)
	for _ in range(3):
		adam_step([p], None, state)
	assert p.data[0] == 1.0

	p = Tensor([1.0], requires_grad=True)
	state = OptimizerState.create('adam', [p], 0.05)
	values = [1.0]
	for _ in range(10):
		with tape_scope():
			backward(p * p)
		adam_step([p], None, state)
		values.append(float(p.data[0]))
	assert all(b < a for a, b in zip(values, values[1:]))
	assert values[-1] > 0


def test_optimizer_state_checks():
	p = Tensor([1.0], requires_grad=True)
	with pytest.raises(AutogradError):
		OptimizerState.create('rmsprop', [p], 0.1)
	with pytest.raises(AutogradError):
		OptimizerState.create('sgd', [p], 0.0)
	with pytest.raises(AutogradError):
		adam_step([p], None, OptimizerState.create('sgd', [p], 0.1))
	with pytest.raises(ShapeError):
		sgd_step([p], [np.ones(2)], OptimizerState.create('sgd', [p], 0.1))


def test_layers():
	rng = np.random.default_rng(0)
	linear = Linear(3, 2, rng)
	assert linear(Tensor(np.ones((4, 3)))).shape == (4, 2)
	with pytest.raises(ShapeError):
		linear(Tensor(np.ones((4, 2))))

	conv = Conv2d(1, 4, 3, rng)
	assert conv(Tensor(np.ones((2, 1, 8, 8)))).shape == (2, 4, 8, 8)

	x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
	pooled = MeanPool2d()(Tensor(x)).numpy()
	np.testing.assert_allclose(pooled[0, 0], [[2.5, 4.5], [10.5, 12.5]])

	mlp = MLP(3, 5, 2, rng)
	out = mlp(Tensor(np.zeros((1, 3))), activation='sigmoid').numpy()
	assert np.all((out > 0) & (out < 1))
	assert [name for name, _ in mlp.named_parameters()] == [
		'hidden.weight', 'hidden.bias', 'output.weight', 'output.bias'
	]


def test_state_dict_round_trip():
	rng = np.random.default_rng(1)
	source, target = MLP(3, 4, 2, rng), MLP(3, 4, 2, rng)
	target.load_state_dict(source.state_dict())
	for (_, a), (_, b) in zip(source.named_parameters(), target.named_parameters()):
		np.testing.assert_array_equal(a.data, b.data)

	state = source.state_dict()
	state.pop('output.bias')
	with pytest.raises(AutogradError):
		target.load_state_dict(state)
