# -*- coding: utf-8 -*-
"""'Proxy' for the model zoo: the four variants, their registry and checkpoints."""

from app.modules.modelzoo.common import (
	Backbone,
	CausalModel,
	CausalTaps,
	CheckpointError,
	ModelZooError,
	ZooConfig,
)
from app.modules.modelzoo.attn_complement import AttnComplementModel, Partition, caam_partition_update
from app.modules.modelzoo.ortho_proj import OrthoOutputs, OrthoProjModel, causaladv_loss, row_space_basis
from app.modules.modelzoo.saliency_mask import (
	ConfounderBuffer,
	SaliencyMaskModel,
	dice_backdoor_adjust,
	dice_mask,
)
from app.modules.modelzoo.vae_split import VaeSplitModel, gaussian_kl, horizontal_shift
from app.modules.modelzoo.registry import VARIANTS, build_model, variant_class
from app.modules.modelzoo.checkpoint import load_checkpoint, restore_model, save_checkpoint
