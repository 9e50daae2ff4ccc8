# -*- coding: utf-8 -*-
"""'Externally' adjustable config vars.
"""
from os import environ

# Default level for tornado's --logging flag.
LOG_LEVEL = environ.get('CDNB_LOG_LEVEL', 'info')

# Thread pool size for experiment cells.
WORKERS = int(environ.get('CDNB_WORKERS', '1'))

# Master seed when no --seed is given.
SEED = int(environ.get('CDNB_SEED', '0'))

# Where reports go when neither --out nor the config file says otherwise.
RESULTS_DIR = environ.get('CDNB_RESULTS_DIR', 'results')

# Test samples used for the distance correlations.
MAX_DC_SAMPLES = int(environ.get('CDNB_MAX_DC_SAMPLES', '2000'))
