# -*- coding: utf-8 -*-
"""'Proxy' for the tensor engine: tensors, tape, primitives, optimizers, layers."""

from app.modules.autograd.common import AutogradError, DetachedOutputError, NonFiniteError, ShapeError
from app.modules.autograd.tensor import (
	GradientMap,
	Tape,
	Tensor,
	active_tape,
	backward,
	is_grad_enabled,
	no_grad,
	tape_scope,
)
from app.modules.autograd import ops
from app.modules.autograd.ops import forward_op
from app.modules.autograd.optim import OptimizerState, adam_step, sgd_step
from app.modules.autograd import nn
