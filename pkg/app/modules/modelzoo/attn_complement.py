# -*- coding: utf-8 -*-
"""attn-complement: an attention map splits backbone features in two.

  z = conv(x̂),  c = σ(z) ⊙ x̂,  s = x̂ - c

Class scores come from spatially pooled c. The training set is partitioned
into strata by clustering pooled s, and the loss averages per-stratum
cross-entropies with weights P(t) = |t| / N. The partition is refreshed every
`refresh_every` epochs.
"""
from dataclasses import dataclass
import logging
import warnings

import numpy as np
from scipy.cluster.vq import kmeans2

from app.modules.autograd import Tensor, no_grad, ops
from app.modules.autograd.nn import Conv2d, Linear
from app.modules.modelzoo.common import Backbone, CausalModel, CausalTaps, ModelZooError, ZooConfig

logger = logging.getLogger(__name__)


@dataclass
class Partition:
	assignments: np.ndarray
	weights: np.ndarray

	@property
	def strata(self) -> int:
		return self.weights.shape[0]

	def batch_weights(self, indices: np.ndarray) -> np.ndarray:
		"""Per-sample weights P(t_i) / |batch ∩ t_i|, normalised over the strata present."""
		batch_strata = self.assignments[indices]
		counts = np.bincount(batch_strata, minlength=self.strata)
		present = counts > 0
		total = self.weights[present].sum()
		if total <= 0:
			return np.full(indices.shape[0], 1.0 / indices.shape[0])
		return self.weights[batch_strata] / counts[batch_strata] / total


def caam_partition_update(s_features: np.ndarray, strata: int = 4, seed: int = 0, iterations: int = 10) -> Partition:
	"""Clusters samples into `strata` groups by their confounder features."""
	features = np.asarray(s_features, dtype=np.float64)
	n = features.shape[0]
	features = features.reshape(n, -1)
	if strata < 1:
		raise ModelZooError(f'need at least one stratum, got {strata}')
	if strata > n:
		raise ModelZooError(f'{strata} strata requested for {n} samples')

	unique, inverse = np.unique(features, axis=0, return_inverse=True)
	if unique.shape[0] <= strata:
		# Too few distinct points to seed the clustering: one stratum per distinct point.
		assignments = inverse.reshape(-1)
	else:
		with warnings.catch_warnings():
			warnings.simplefilter('ignore')
			_, assignments = kmeans2(
				features, strata, iter=iterations, minit='++', missing='warn', seed=np.random.default_rng(seed)
			)

	counts = np.bincount(assignments, minlength=strata)
	if (counts == 0).any():
		logger.info('partition: %d of %d strata empty', int((counts == 0).sum()), strata)
	return Partition(assignments=assignments.astype(np.int64), weights=counts / n)


def _spatial_mean(features: Tensor) -> Tensor:
	n, channels, height, width = features.shape
	flat = ops.reshape(features, (n * channels, height * width))
	return ops.reshape(ops.mean(flat, axis=1), (n, channels))


class AttnComplementModel(CausalModel):
	variant = 'attn-complement'
	variant_id = 2
	source_model = 'CaaM'

	def __init__(self, image_shape: tuple, num_classes: int, config: ZooConfig = ZooConfig(), seed: int = 0):
		super().__init__(image_shape, num_classes, config, seed)
		rng = self.init_rng
		channels = Backbone.feature_shape(self.image_shape)[0]
		self.backbone = self.add_module('backbone', Backbone(self.image_shape[0], rng))
		self.attention = self.add_module('attention', Conv2d(channels, channels, 3, rng))
		self.classifier = self.add_module('classifier', Linear(channels, num_classes, rng))
		self.partition = None

	def split(self, x: Tensor) -> tuple:
		"""(x̂, c, s) feature maps."""
		features = self.backbone.features(x)
		gate = ops.sigmoid(self.attention(features))
		causal = gate * features
		return features, causal, features - causal

	def logits(self, x: Tensor) -> Tensor:
		_, causal, _ = self.split(x)
		return self.classifier(_spatial_mean(causal))

	def taps(self, x: np.ndarray, y: np.ndarray) -> CausalTaps:
		with no_grad():
			_, causal, confounder = self.split(Tensor(x))
			logits = self.classifier(_spatial_mean(causal))
		return CausalTaps(x=np.asarray(x), c=causal.data, s=confounder.data, logits=logits.data)

	def pooled_confounders(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
		out = []
		with no_grad():
			for start in range(0, images.shape[0], batch_size):
				_, _, confounder = self.split(Tensor(images[start:start + batch_size]))
				out.append(_spatial_mean(confounder).data)
		return np.concatenate(out)

	def on_epoch_start(self, epoch: int, images: np.ndarray, labels: np.ndarray, rng: np.random.Generator):
		if (epoch - 1) % self.config.refresh_every:
			return
		self.partition = caam_partition_update(
			self.pooled_confounders(images),
			strata=self.config.strata,
			seed=int(rng.integers(2 ** 32)),
			iterations=self.config.cluster_iterations,
		)
		logger.debug('epoch %d: strata sizes %s', epoch, np.bincount(self.partition.assignments, minlength=self.config.strata).tolist())

	def training_loss(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, indices=None) -> Tensor:
		logits = self.logits(Tensor(x))
		if self.partition is None or indices is None:
			return ops.softmax_cross_entropy(logits, y)
		return ops.softmax_cross_entropy(logits, y, weights=self.partition.batch_weights(np.asarray(indices)))
