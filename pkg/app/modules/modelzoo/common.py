# -*- coding: utf-8 -*-
"""Model zoo common stuff: errors, configuration, taps, backbone, base model.
"""
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np

from app.modules.autograd import Tensor, no_grad, ops
from app.modules.autograd.nn import Conv2d, MeanPool2d, Module, flatten


class ModelZooError(Exception):
	"""Base class for all model zoo errors."""
	pass


class CheckpointError(ModelZooError):
	pass


@dataclass(frozen=True)
class ZooConfig:
	"""Hyperparameters of all variants; each variant reads its own fields."""
	# vae-split
	latent_dim: int = 16
	hidden: int = 128
	recon_weight: float = 12.5
	shift_fraction: float = 0.2
	ce_weight: float = 1.0
	# attn-complement
	strata: int = 4
	refresh_every: int = 5
	cluster_iterations: int = 10
	# ortho-proj
	sigma: float = 1.0
	alpha: float = 1.0
	beta: float = 0.5
	# saliency-mask
	mask_fraction: float = 0.2
	buffer_size: int = 20
	# ortho-proj and saliency-mask train on PGD10 samples as well.
	adversarial_training: bool = True

	def as_vector(self) -> dict:
		return {f.name: float(getattr(self, f.name)) for f in fields(self)}

	@classmethod
	def from_vector(cls, values: dict) -> 'ZooConfig':
		kwargs = {}
		for f in fields(cls):
			if f.name in values:
				raw = values[f.name]
				kwargs[f.name] = bool(raw) if f.type in (bool, 'bool') else (
					int(raw) if f.type in (int, 'int') else float(raw)
				)
		return cls(**kwargs)


@dataclass
class CausalTaps:
	"""Signals of one forward pass; the leading axis indexes samples."""
	x: np.ndarray
	c: np.ndarray
	s: np.ndarray
	logits: np.ndarray


class Backbone(Module):
	"""Two 3x3 conv layers (8 and 16 channels), each followed by relu and 2x2 mean-pool."""

	def __init__(self, in_channels: int, rng: np.random.Generator):
		super().__init__()
		self.conv1 = self.add_module('conv1', Conv2d(in_channels, 8, 3, rng))
		self.conv2 = self.add_module('conv2', Conv2d(8, 16, 3, rng))
		self.pool = MeanPool2d()

	@staticmethod
	def feature_shape(image_shape: tuple) -> tuple:
		_, height, width = image_shape
		if height % 4 or width % 4:
			raise ModelZooError(f'backbone needs image sides divisible by 4, got {height}x{width}')
		return 16, height // 4, width // 4

	def features(self, x: Tensor) -> Tensor:
		"""(N, C, H, W) -> (N, 16, H/4, W/4)."""
		out = self.pool(ops.relu(self.conv1(x)))
		return self.pool(ops.relu(self.conv2(out)))

	def __call__(self, x: Tensor) -> Tensor:
		return flatten(self.features(x))


def check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
	labels = np.asarray(labels)
	if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
		raise ModelZooError(f'label index out of range [0, {num_classes})')
	return labels.astype(np.int64)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
	labels = check_labels(labels, num_classes)
	out = np.zeros((labels.size, num_classes))
	out[np.arange(labels.size), labels] = 1.0
	return out


class CausalModel(Module):
	"""Base class of the four variants.

	Subclasses implement `logits`, `taps` and `training_loss`; the harness
	only talks to this interface.
	"""
	variant: ClassVar[str] = ''
	variant_id: ClassVar[int] = 0
	# Name of the published model the variant scales down.
	source_model: ClassVar[str] = ''

	def __init__(self, image_shape: tuple, num_classes: int, config: ZooConfig, seed: int):
		super().__init__()
		self.image_shape = tuple(int(d) for d in image_shape)
		self.num_classes = int(num_classes)
		self.config = config
		self.seed = int(seed)
		seed_seq = np.random.SeedSequence(self.seed)
		init_seq, tap_seq = seed_seq.spawn(2)
		self.init_rng = np.random.default_rng(init_seq)
		# Stream for stochastic taps (latent samples); advanced in call order.
		self.tap_rng = np.random.default_rng(tap_seq)

	def logits(self, x: Tensor) -> Tensor:
		raise NotImplementedError

	def taps(self, x: np.ndarray, y: np.ndarray) -> CausalTaps:
		raise NotImplementedError

	def training_loss(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, indices=None) -> Tensor:
		"""Scalar loss of one batch; `indices` locate the batch in the training split."""
		raise NotImplementedError

	def on_epoch_start(self, epoch: int, images: np.ndarray, labels: np.ndarray, rng: np.random.Generator):
		"""Hook for per-epoch state (strata refresh and the like)."""
		pass

	def after_step(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator):
		"""Hook called after each optimizer step."""
		pass

	def predict(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
		out = []
		with no_grad():
			for start in range(0, x.shape[0], batch_size):
				out.append(np.argmax(self.logits(Tensor(x[start:start + batch_size])).data, axis=1))
		return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
