#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Main module of the program, executable.

	./manage.py <command> [--flag=value ...]
	./manage.py <command> --help
"""
import logging
import sys

from app import commands
from app.base_command import EXIT_FAILURE, EXIT_USAGE, ApplicationError

logger = logging.getLogger(__name__)

# pylint: disable=bad-whitespace
command_classes = [
	('gen-data',            commands.GenDataCommand),
	('train',               commands.TrainCommand),
	('measure',             commands.MeasureCommand),
	('attack',              commands.AttackCommand),
	('correlate',           commands.CorrelateCommand),
	('run',                 commands.RunCommand),
	('paper-check',         commands.PaperCheckCommand),
]
# pylint: enable=bad-whitespace


def usage() -> str:
	lines = ['usage: manage.py <command> [--flag=value ...]', '', 'commands:']
	lines += [f'  {name:<12} {command.description}' for name, command in command_classes]
	lines += ['', 'manage.py <command> --help lists the flags of a command.']
	return '\n'.join(lines)


def dispatch(argv: list) -> int:
	"""Runs one command; returns its exit code."""
	table = dict(command_classes)
	if not argv or argv[0] not in table:
		if argv:
			sys.stderr.write(f'unknown command: {argv[0]}\n\n')
		sys.stderr.write(usage() + '\n')
		return EXIT_USAGE

	try:
		return table[argv[0]]()(argv[1:])
	except ApplicationError as e:
		sys.stderr.write(f'error: {e.message}\n')
		return e.exit_code
	except Exception as e:  # pylint: disable=broad-except
		logger.error('%s failed', argv[0], exc_info=True)
		sys.stderr.write(f'error: {type(e).__name__}: {e}\n')
		return EXIT_FAILURE


if __name__ == "__main__":
	sys.exit(dispatch(sys.argv[1:]))
