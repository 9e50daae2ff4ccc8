# -*- coding: utf-8 -*-
"""vae-split: a class-conditional VAE used as a generative classifier.

The encoder models q(S | X, Y, M) as a diagonal Gaussian; the decoder
reconstructs X from a label branch h_y and the latent s. Class scores are
per-class ELBOs. Clean samples use m = 0, horizontally shifted copies m = 1.

Taps: S is one reparameterized encoder sample, C is the label branch h_y
before it is merged with s.
"""
import numpy as np

from app.modules.autograd import Tensor, no_grad, ops
from app.modules.autograd.nn import Linear
from app.modules.modelzoo.common import Backbone, CausalModel, CausalTaps, ZooConfig, one_hot


def horizontal_shift(images: np.ndarray, fraction: float = 0.2) -> np.ndarray:
	"""Moves every image right by round(fraction * width) pixels, zero filled."""
	width = images.shape[-1]
	shift = int(round(fraction * width))
	out = np.zeros_like(images)
	if shift <= 0:
		return images.copy()
	if shift < width:
		out[..., shift:] = images[..., :width - shift]
	return out


def gaussian_kl(mu: Tensor, logvar: Tensor) -> Tensor:
	"""KL(N(mu, exp(logvar)) || N(0, I)) per sample, shape (N,)."""
	terms = ops.exp(logvar) + mu * mu - 1.0 - logvar
	return ops.sum(terms, axis=1) * 0.5


class VaeSplitModel(CausalModel):
	variant = 'vae-split'
	variant_id = 1
	source_model = 'CAMA'

	# logvar is squashed into [-LOGVAR_BOUND, LOGVAR_BOUND]
	LOGVAR_BOUND = 6.0

	def __init__(self, image_shape: tuple, num_classes: int, config: ZooConfig = ZooConfig(), seed: int = 0):
		super().__init__(image_shape, num_classes, config, seed)
		rng = self.init_rng
		channels, height, width = self.image_shape
		self.pixels = channels * height * width
		hidden, latent = config.hidden, config.latent_dim
		feature_dim = int(np.prod(Backbone.feature_shape(self.image_shape)))

		self.backbone = self.add_module('backbone', Backbone(channels, rng))
		self.enc_x = self.add_module('enc_x', Linear(feature_dim, hidden, rng))
		self.enc_y = self.add_module('enc_y', Linear(num_classes, hidden, rng))
		self.enc_m = self.add_module('enc_m', Linear(1, hidden, rng))
		self.enc_mu = self.add_module('enc_mu', Linear(hidden, latent, rng))
		self.enc_logvar = self.add_module('enc_logvar', Linear(hidden, latent, rng))

		self.dec_label = self.add_module('dec_label', Linear(num_classes, latent, rng))
		# Merge of [h_y, s, m] written as a sum of per-branch projections.
		self.dec_merge_y = self.add_module('dec_merge_y', Linear(latent, hidden, rng))
		self.dec_merge_s = self.add_module('dec_merge_s', Linear(latent, hidden, rng))
		self.dec_merge_m = self.add_module('dec_merge_m', Linear(1, hidden, rng))
		self.dec_out = self.add_module('dec_out', Linear(hidden, self.pixels, rng))

	def _x_features(self, x: Tensor) -> Tensor:
		return self.enc_x(self.backbone(x))

	def encode(self, x_features: Tensor, y_onehot: np.ndarray, m: np.ndarray) -> tuple:
		hidden = ops.relu(x_features + self.enc_y(Tensor(y_onehot)) + self.enc_m(Tensor(m)))
		mu = self.enc_mu(hidden)
		logvar = ops.tanh(self.enc_logvar(hidden)) * self.LOGVAR_BOUND
		return mu, logvar

	def label_state(self, y_onehot: np.ndarray) -> Tensor:
		"""h_y, the label branch of the decoder."""
		return ops.relu(self.dec_label(Tensor(y_onehot)))

	def decode(self, h_y: Tensor, s: Tensor, m: np.ndarray) -> Tensor:
		merged = ops.relu(self.dec_merge_y(h_y) + self.dec_merge_s(s) + self.dec_merge_m(Tensor(m)))
		return ops.sigmoid(self.dec_out(merged))

	def elbo_terms(self, x: Tensor, y_onehot: np.ndarray, m: np.ndarray, eps=None, x_features=None) -> dict:
		"""ELBO = recon - KL per sample. With `eps` None the posterior mean is decoded."""
		x_features = self._x_features(x) if x_features is None else x_features
		mu, logvar = self.encode(x_features, y_onehot, m)
		s = mu if eps is None else mu + ops.exp(logvar * 0.5) * Tensor(eps)
		h_y = self.label_state(y_onehot)
		reconstruction = self.decode(h_y, s, m)
		diff = reconstruction - ops.reshape(x, (x.shape[0], -1))
		recon = ops.sum(diff * diff, axis=1) * (-self.config.recon_weight)
		kl = gaussian_kl(mu, logvar)
		return {'elbo': recon - kl, 'recon': recon, 'kl': kl, 'h_y': h_y, 's': s}

	def logits(self, x: Tensor) -> Tensor:
		n = x.shape[0]
		x_features = self._x_features(x)
		m = np.zeros((n, 1))
		out = None
		for k in range(self.num_classes):
			y_onehot = np.zeros((n, self.num_classes))
			y_onehot[:, k] = 1.0
			elbo = self.elbo_terms(x, y_onehot, m, x_features=x_features)['elbo']
			column = np.zeros((1, self.num_classes))
			column[0, k] = 1.0
			term = ops.matmul(ops.reshape(elbo, (n, 1)), Tensor(column))
			out = term if out is None else out + term
		return out

	def elbo(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
		"""Per-sample ELBO at the posterior mean, clean (m = 0) inputs."""
		with no_grad():
			terms = self.elbo_terms(Tensor(x), one_hot(y, self.num_classes), np.zeros((x.shape[0], 1)))
		return terms['elbo'].data

	def training_loss(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, indices=None) -> Tensor:
		n = x.shape[0]
		y_onehot = one_hot(y, self.num_classes)
		latent = self.config.latent_dim
		clean = self.elbo_terms(Tensor(x), y_onehot, np.zeros((n, 1)), eps=rng.standard_normal((n, latent)))
		shifted = horizontal_shift(x, self.config.shift_fraction)
		manipulated = self.elbo_terms(
			Tensor(shifted), y_onehot, np.ones((n, 1)), eps=rng.standard_normal((n, latent))
		)
		# Per-pixel scale keeps the ELBO and the cross-entropy comparable.
		loss = (ops.mean(clean['elbo']) + ops.mean(manipulated['elbo'])) * (-1.0 / self.pixels)
		if self.config.ce_weight > 0:
			loss = loss + ops.softmax_cross_entropy(self.logits(Tensor(x)), y) * self.config.ce_weight
		return loss

	def taps(self, x: np.ndarray, y: np.ndarray) -> CausalTaps:
		y_onehot = one_hot(y, self.num_classes)
		n = x.shape[0]
		with no_grad():
			x_t = Tensor(x)
			mu, logvar = self.encode(self._x_features(x_t), y_onehot, np.zeros((n, 1)))
			eps = self.tap_rng.standard_normal(mu.shape)
			s = mu.data + np.exp(0.5 * logvar.data) * eps
			h_y = self.label_state(y_onehot).data
			logits = self.logits(x_t).data
		return CausalTaps(x=np.asarray(x), c=h_y, s=s, logits=logits)
