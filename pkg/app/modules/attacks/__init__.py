# -*- coding: utf-8 -*-
"""'Proxy' for the white-box attacks."""

from app.modules.attacks.common import (
	AttackConfig,
	AttackError,
	AttackResult,
	per_sample_norms,
	project_to_ball,
)
from app.modules.attacks.cw import cw
from app.modules.attacks.fgsm import fgsm
from app.modules.attacks.pgd import pgd
from app.modules.attacks.suite import SUITE, TABLE_ATTACKS, TRAINING_PGD, attack_dataset, run_attack
