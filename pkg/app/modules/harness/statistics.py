# -*- coding: utf-8 -*-
"""Pearson correlation with a two-sided Student-t p-value.

  t = r * sqrt((n - 2) / (1 - r²)),  p = 2 * P(T_{n-2} > |t|)
"""
from dataclasses import dataclass

import numpy as np
from scipy import stats

from app.modules.harness.common import StatisticsError

SIGNIFICANCE = 0.05

# p is reported inside (0, 1]; a perfect correlation gets the smallest positive float.
_P_FLOOR = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class CorrelationResult:
	measurement: str
	target: str
	n: int
	r: float
	p: float

	@property
	def significant(self) -> bool:
		return self.p <= SIGNIFICANCE

	def to_row(self) -> list:
		return [self.measurement, self.target, str(self.n), f'{self.r:.6f}', f'{self.p:.6g}', str(int(self.significant))]


def format_p(p: float) -> str:
	"""Four decimals, leading zero dropped, '<.0001' below that."""
	if p < 1e-4:
		return '<.0001'
	return f'{p:.4f}'.lstrip('0')


def t_test_p(r: float, n: int) -> float:
	df = n - 2
	denominator = 1.0 - r * r
	if denominator <= 0:
		return _P_FLOOR
	t_value = abs(r) * np.sqrt(df / denominator)
	return float(min(1.0, max(_P_FLOOR, 2.0 * stats.t.sf(t_value, df))))


def pearson(xs, ys, measurement: str = 'x', target: str = 'y') -> CorrelationResult:
	xs = np.asarray(xs, dtype=np.float64).reshape(-1)
	ys = np.asarray(ys, dtype=np.float64).reshape(-1)
	if xs.shape != ys.shape:
		raise StatisticsError(f'{measurement} vs {target}: {xs.size} and {ys.size} values')
	n = xs.size
	if n < 3:
		raise StatisticsError(f'{measurement} vs {target}: need at least 3 points, got {n}')
	dx = xs - xs.mean()
	dy = ys - ys.mean()
	sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
	if np.ptp(xs) == 0 or np.ptp(ys) == 0:
		zero = measurement if np.ptp(xs) == 0 else target
		raise StatisticsError(f'{measurement} vs {target}: {zero} has zero variance')
	r = float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))
	return CorrelationResult(measurement=measurement, target=target, n=n, r=r, p=t_test_p(r, n))
