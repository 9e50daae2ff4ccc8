# -*- coding: utf-8 -*-
"""'Proxy' for all commands."""

from .gen_data import GenDataCommand
from .train import TrainCommand
from .measure import MeasureCommand
from .attack import AttackCommand
from .correlate import CorrelateCommand
from .run import RunCommand
from .paper_check import PaperCheckCommand
