# -*- coding: utf-8 -*-
"""ortho-proj: causal and confounder projections of one feature vector.

  c = W_c h,  s = W_s h,  W_s = W̃_s (I - Q Qᵀ)

Q is an orthonormal basis of the row space of W_c, recomputed on every
forward pass and treated as a constant, so the rows of W_s stay orthogonal
to those of W_c whatever the optimizer does to W̃_s. Training feeds
ŝ = s + n, n ~ N(0, σ²I), to the confounder head; taps report s before noise.
"""
from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np

from app.modules.attacks.pgd import pgd
from app.modules.attacks.suite import TRAINING_PGD
from app.modules.autograd import Tensor, no_grad, ops
from app.modules.autograd.nn import Linear
from app.modules.modelzoo.common import Backbone, CausalModel, CausalTaps, ZooConfig

logger = logging.getLogger(__name__)


def row_space_basis(w_c: np.ndarray) -> np.ndarray:
	"""(d, r) orthonormal basis of the row space of a (k, d) matrix; r is its numerical rank."""
	_, singular, vt = np.linalg.svd(w_c, full_matrices=False)
	if singular.size == 0 or singular[0] == 0:
		return np.zeros((w_c.shape[1], 0))
	tol = max(w_c.shape) * np.finfo(np.float64).eps * singular[0]
	rank = int(np.sum(singular > tol))
	return vt[:rank].T


def complement_projector(w_c: np.ndarray) -> np.ndarray:
	"""I - Q Qᵀ for Q = row_space_basis(w_c)."""
	basis = row_space_basis(w_c)
	return np.eye(w_c.shape[1]) - basis @ basis.T


@dataclass
class OrthoOutputs:
	"""Head outputs of one forward pass, still on the tape."""
	causal_logits: Tensor
	confounder_logits: Tensor


def causaladv_loss(
	clean: OrthoOutputs,
	y: np.ndarray,
	adversarial: Optional[OrthoOutputs] = None,
	y_adversarial: Optional[np.ndarray] = None,
	alpha: float = 1.0,
	beta: float = 0.5
) -> Tensor:
	"""α CE(h(c), y) + β CE(g(ŝ), y), summed over the clean and adversarial batches."""
	batches = [(clean, y)]
	if adversarial is not None:
		batches.append((adversarial, y if y_adversarial is None else y_adversarial))
	total = None
	for outputs, labels in batches:
		term = (
			ops.softmax_cross_entropy(outputs.causal_logits, labels) * alpha
			+ ops.softmax_cross_entropy(outputs.confounder_logits, labels) * beta
		)
		total = term if total is None else total + term
	return total


class OrthoProjModel(CausalModel):
	variant = 'ortho-proj'
	variant_id = 3
	source_model = 'CausalAdv'

	def __init__(self, image_shape: tuple, num_classes: int, config: ZooConfig = ZooConfig(), seed: int = 0):
		super().__init__(image_shape, num_classes, config, seed)
		rng = self.init_rng
		feature_dim = int(np.prod(Backbone.feature_shape(self.image_shape)))
		k = config.latent_dim
		bound = 1.0 / np.sqrt(feature_dim)
		self.backbone = self.add_module('backbone', Backbone(self.image_shape[0], rng))
		# Stored transposed, (d, k), so projections are plain h @ W.
		self.w_c_t = self.add_parameter('w_c_t', rng.uniform(-bound, bound, (feature_dim, k)))
		self.w_s_free_t = self.add_parameter('w_s_free_t', rng.uniform(-bound, bound, (feature_dim, k)))
		self.causal_head = self.add_module('causal_head', Linear(k, num_classes, rng))
		self.confounder_head = self.add_module('confounder_head', Linear(k, num_classes, rng))
		self._rank = k

	@property
	def w_c(self) -> np.ndarray:
		return self.w_c_t.data.T

	@property
	def w_s(self) -> np.ndarray:
		return (complement_projector(self.w_c) @ self.w_s_free_t.data).T

	def orthogonality_residual(self) -> float:
		"""||W_s W_cᵀ||_F relative to ||W_s||_F ||W_c||_F."""
		w_c, w_s = self.w_c, self.w_s
		scale = np.linalg.norm(w_s) * np.linalg.norm(w_c)
		if scale == 0:
			return 0.0
		return float(np.linalg.norm(w_s @ w_c.T) / scale)

	def _projector(self) -> Tensor:
		basis = row_space_basis(self.w_c)
		rank = basis.shape[1]
		if rank != self._rank:
			logger.warning('W_c has rank %d of %d; projecting out %d directions', rank, self.w_c.shape[0], rank)
			self._rank = rank
		return Tensor(np.eye(basis.shape[0]) - basis @ basis.T)

	def project(self, x: Tensor) -> tuple:
		"""(h, c, s) with s taken before noise."""
		h = self.backbone(x)
		causal = ops.matmul(h, self.w_c_t)
		confounder = ops.matmul(ops.matmul(h, self._projector()), self.w_s_free_t)
		return h, causal, confounder

	def outputs(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> OrthoOutputs:
		_, causal, confounder = self.project(x)
		sigma = self.config.sigma
		if rng is not None and sigma > 0:
			confounder = confounder + Tensor(sigma * rng.standard_normal(confounder.shape))
		return OrthoOutputs(self.causal_head(causal), self.confounder_head(confounder))

	def logits(self, x: Tensor) -> Tensor:
		_, causal, _ = self.project(x)
		return self.causal_head(causal)

	def taps(self, x: np.ndarray, y: np.ndarray) -> CausalTaps:
		with no_grad():
			_, causal, confounder = self.project(Tensor(x))
			logits = self.causal_head(causal)
		return CausalTaps(x=np.asarray(x), c=causal.data, s=confounder.data, logits=logits.data)

	def training_loss(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, indices=None) -> Tensor:
		# The attack consumes the tape, so it runs before the loss graph is built.
		x_adv = pgd(self, x, y, TRAINING_PGD, rng=rng).perturbed if self.config.adversarial_training else None
		clean = self.outputs(Tensor(x), rng)
		adversarial = None if x_adv is None else self.outputs(Tensor(x_adv), rng)
		return causaladv_loss(clean, y, adversarial, y, alpha=self.config.alpha, beta=self.config.beta)
