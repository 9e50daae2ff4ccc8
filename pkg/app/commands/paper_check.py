# -*- coding: utf-8 -*-
"""Module with the command that recomputes the published correlation grid
from the published per-model accuracies and measurements.
"""
from app.base_command import EXIT_FAILURE, EXIT_OK, BaseCommand
from app.modules.harness import paper_table_check
from app.modules.harness.fixtures import MEASUREMENT_LABELS, R_TOLERANCE, TARGET_LABELS
from app.modules.harness.reports import correlation_table, render_table
from app.modules.harness.statistics import format_p


class PaperCheckCommand(BaseCommand):
	name = 'paper-check'
	description = 'recompute the published measurement/robustness correlations; exit 1 on any mismatch'

	def run(self, args: dict) -> int:
		comparisons = paper_table_check()
		rows = []
		for item in comparisons:
			computed = item.computed
			rows.append([
				TARGET_LABELS[computed.target],
				MEASUREMENT_LABELS[computed.measurement],
				f'{computed.r:+.3f}',
				f'{item.published_r:+.3f}',
				format_p(computed.p),
				'-' if item.published_p is None else format_p(item.published_p),
				'ok' if item.matches else 'MISMATCH',
			])
		self.write(render_table(('target', 'measurement', 'r', 'published r', 'p', 'published p', ''), rows))
		self.write('')
		results = [item.computed for item in comparisons]
		self.write(correlation_table(
			results,
			list(dict.fromkeys(r.measurement for r in results)),
			list(dict.fromkeys(r.target for r in results)),
		))

		mismatches = sum(not item.matches for item in comparisons)
		self.write('')
		self.write(f'{len(comparisons) - mismatches}/{len(comparisons)} correlations within r ± {R_TOLERANCE} '
				   'with matching significance')
		return EXIT_FAILURE if mismatches else EXIT_OK
