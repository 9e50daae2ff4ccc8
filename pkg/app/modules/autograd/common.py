# -*- coding: utf-8 -*-
"""Autograd common stuff: exceptions shared by the tensor engine.
"""


class AutogradError(Exception):
	"""Base class for all tensor engine errors."""
	pass


class ShapeError(AutogradError):
	"""Input shapes do not conform to a primitive's shape rule."""

	def __init__(self, primitive: str, *shapes: tuple):
		self.primitive = primitive
		self.shapes = shapes
		rendered = ' and '.join(str(tuple(shape)) for shape in shapes)
		super().__init__(f'{primitive}: incompatible shapes {rendered}')


class NonFiniteError(AutogradError):
	"""A primitive produced NaN or Inf from its inputs."""

	def __init__(self, primitive: str):
		self.primitive = primitive
		super().__init__(f'{primitive}: produced non-finite values')


class DetachedOutputError(AutogradError):
	"""backward() called on a tensor that is not on the active tape."""
	pass
