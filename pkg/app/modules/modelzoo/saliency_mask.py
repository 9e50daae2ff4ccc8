# -*- coding: utf-8 -*-
"""saliency-mask: confounder samples from saliency masking, plus a replay buffer.

The most salient pixels of x (by the input gradient of the reference
model's cross-entropy) are zeroed to give the confounder sample s_x. A FIFO
buffer of such samples approximates the backdoor sum in pixel space:

  x_c = x + Σ_{s ∈ buffer} P(s) s,  P(s) = 1 / |buffer|

and the classifier sees backbone(x_c). Taps: C = backbone(x_c), S = backbone(s_x).
"""
import logging
from typing import Optional

import numpy as np

from app.modules.attacks.common import Classifier, input_gradient
from app.modules.attacks.pgd import pgd
from app.modules.attacks.suite import TRAINING_PGD
from app.modules.autograd import Tensor, no_grad, ops
from app.modules.autograd.nn import Linear
from app.modules.modelzoo.common import Backbone, CausalModel, CausalTaps, ModelZooError, ZooConfig

logger = logging.getLogger(__name__)


class ConfounderBuffer:
	"""FIFO of pixel-space confounder samples, oldest first.

	The samples live in `storage`, a module buffer tensor, so they travel
	with checkpoints.
	"""

	def __init__(self, capacity: int, sample_shape: tuple, storage: Optional[Tensor] = None):
		if capacity < 1:
			raise ModelZooError(f'buffer capacity must be positive, got {capacity}')
		self.capacity = capacity
		self.sample_shape = tuple(sample_shape)
		self.storage = Tensor(np.zeros((0,) + self.sample_shape)) if storage is None else storage

	def __len__(self) -> int:
		return self.storage.data.shape[0]

	@property
	def samples(self) -> np.ndarray:
		return self.storage.data

	def push(self, sample: np.ndarray):
		sample = np.asarray(sample, dtype=np.float64)
		if sample.shape != self.sample_shape:
			raise ModelZooError(f'buffer holds {self.sample_shape} samples, got {sample.shape}')
		merged = np.concatenate([self.storage.data, sample[None]])
		self.storage.data = merged[-self.capacity:]

	def extend(self, samples: np.ndarray):
		for sample in samples:
			self.push(sample)

	def mean(self) -> np.ndarray:
		if not len(self):
			raise ModelZooError('confounder buffer is empty')
		return self.storage.data.mean(axis=0)


def dice_mask(x: np.ndarray, y: np.ndarray, ref_model: Classifier, q: float = 0.2) -> tuple:
	"""Zeroes the top-q fraction of pixels by saliency; returns (s_x, mask).

	Saliency of a pixel is the largest |d CE / d x| over its channels. Exactly
	round(q * H * W) pixels are masked per image, ties going to the lower
	pixel index. `mask` has shape (N, H, W).
	"""
	if not 0.0 <= q <= 1.0:
		raise ModelZooError(f'mask fraction must lie in [0, 1], got {q}')
	x = np.asarray(x, dtype=np.float64)
	n, _, height, width = x.shape
	count = int(round(q * height * width))
	mask = np.zeros((n, height * width), dtype=bool)
	if count:
		saliency = np.abs(input_gradient(ref_model, x, y)).max(axis=1).reshape(n, -1)
		top = np.argsort(-saliency, axis=1, kind='stable')[:, :count]
		np.put_along_axis(mask, top, True, axis=1)
	mask = mask.reshape(n, height, width)
	return np.where(mask[:, None, :, :], 0.0, x), mask


def dice_backdoor_adjust(x: np.ndarray, buffer: ConfounderBuffer) -> np.ndarray:
	return np.asarray(x, dtype=np.float64) + buffer.mean()


class SaliencyMaskModel(CausalModel):
	variant = 'saliency-mask'
	variant_id = 4
	source_model = 'DICE'

	def __init__(self, image_shape: tuple, num_classes: int, config: ZooConfig = ZooConfig(), seed: int = 0):
		super().__init__(image_shape, num_classes, config, seed)
		rng = self.init_rng
		feature_dim = int(np.prod(Backbone.feature_shape(self.image_shape)))
		self.backbone = self.add_module('backbone', Backbone(self.image_shape[0], rng))
		self.classifier = self.add_module('classifier', Linear(feature_dim, num_classes, rng))
		storage = self.add_buffer('confounders', np.zeros((0,) + self.image_shape))
		self.buffer = ConfounderBuffer(config.buffer_size, self.image_shape, storage)

	def logits(self, x: Tensor) -> Tensor:
		adjusted = x + Tensor(np.broadcast_to(self.buffer.mean(), x.shape).copy())
		return self.classifier(self.backbone(adjusted))

	def taps(self, x: np.ndarray, y: np.ndarray) -> CausalTaps:
		# Saliency needs the tape, so masking happens outside no_grad.
		confounder_x, _ = dice_mask(x, y, self, self.config.mask_fraction)
		with no_grad():
			adjusted = Tensor(dice_backdoor_adjust(x, self.buffer))
			causal = self.backbone(adjusted)
			logits = self.classifier(causal)
			confounder = self.backbone(Tensor(confounder_x))
		return CausalTaps(x=np.asarray(x), c=causal.data, s=confounder.data, logits=logits.data)

	def _refill(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator):
		"""Pushes one freshly masked sample of the batch into the buffer."""
		pick = int(rng.integers(x.shape[0]))
		if not len(self.buffer):
			# Nothing to adjust with yet: the first reference pass sees x unchanged.
			self.buffer.push(np.zeros(self.image_shape))
			logger.debug('confounder buffer seeded with a zero sample')
		confounder_x, _ = dice_mask(x[pick:pick + 1], y[pick:pick + 1], self, self.config.mask_fraction)
		self.buffer.push(confounder_x[0])

	def training_loss(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, indices=None) -> Tensor:
		# Masking and the attack both consume the tape, so they run before the loss graph is built.
		self._refill(x, y, rng)
		x_adv = pgd(self, x, y, TRAINING_PGD, rng=rng).perturbed if self.config.adversarial_training else None
		loss = ops.softmax_cross_entropy(self.logits(Tensor(x)), y)
		if x_adv is not None:
			loss = loss + ops.softmax_cross_entropy(self.logits(Tensor(x_adv)), y)
		return loss
