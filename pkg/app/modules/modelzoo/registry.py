# -*- coding: utf-8 -*-
"""Variant registry: names, checkpoint ids and constructors.
"""
from typing import Type

from app.modules.modelzoo.attn_complement import AttnComplementModel
from app.modules.modelzoo.common import CausalModel, ModelZooError, ZooConfig
from app.modules.modelzoo.ortho_proj import OrthoProjModel
from app.modules.modelzoo.saliency_mask import SaliencyMaskModel
from app.modules.modelzoo.vae_split import VaeSplitModel

VARIANTS: dict[str, Type[CausalModel]] = {
	cls.variant: cls for cls in (VaeSplitModel, AttnComplementModel, OrthoProjModel, SaliencyMaskModel)
}

VARIANT_IDS: dict[int, Type[CausalModel]] = {cls.variant_id: cls for cls in VARIANTS.values()}


def variant_class(name: str) -> Type[CausalModel]:
	try:
		return VARIANTS[name]
	except KeyError:
		raise ModelZooError(f'unknown model variant {name!r}; known: {", ".join(VARIANTS)}') from None


def build_model(
	variant: str,
	image_shape: tuple,
	num_classes: int,
	config: ZooConfig = ZooConfig(),
	seed: int = 0
) -> CausalModel:
	return variant_class(variant)(image_shape, num_classes, config, seed)
