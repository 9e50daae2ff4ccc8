# -*- coding: utf-8 -*-
"""'Proxy' for the measurement stack: distance correlation, IoB, M1-M5."""

from app.modules.metrics.common import IobError, MetricsError, SignalBatch
from app.modules.metrics.distance import (
	DistanceMatrix,
	distance_correlation,
	distance_covariance,
	double_center,
	pairwise_distances,
)
from app.modules.metrics.iob import IobConfig, IobDecoderPair, boi, iob, train_iob_decoders
from app.modules.metrics.measure import MeasureConfig, MeasurementRecord, measure_all, separation
