# -*- coding: utf-8 -*-
"""Common module for all commands in app.commands, providing a BaseCommand class
that all commands should inherit from as well as ApplicationError class.
"""
from contextlib import suppress
import dataclasses
import datetime
from decimal import Decimal
import enum
import json
import sys

import numpy as np
import tornado.options
from tornado.log import define_logging_options, enable_pretty_logging
import voluptuous as vlps

from app.environs import env


__all__ = ('ApplicationError', 'BaseCommand', 'UsageError', 'WideJSONEncoder')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


class ApplicationError(Exception):
	"""Any error that should end the command with a given exit code and a message on stderr."""

	def __init__(self, exit_code: int, message: str):
		self.exit_code = exit_code
		self.message = message
		super().__init__(message)


class UsageError(ApplicationError):
	def __init__(self, message: str):
		super().__init__(EXIT_USAGE, message)


class WideJSONEncoder(json.JSONEncoder):
	"""Custom json encoder: allows to handle:
	 - dataclasses
	 - date/datetime
	 - enums
	 - Decimal
	 - numpy scalars and arrays
	"""
	def default(self, obj):
		if dataclasses.is_dataclass(obj):
			# If somehow `obj` is not an instance, but dataclass itself,
			# asdict(obj) will raise TypeError
			with suppress(TypeError):
				return dataclasses.asdict(obj)

		if isinstance(obj, np.ndarray):
			return obj.tolist()
		if isinstance(obj, np.generic):
			return obj.item()

		if isinstance(obj, (
			datetime.date,
			enum.Enum,
			Decimal
		)):
			return str(obj)

		return super().default(obj)


def normalize_argv(argv: list) -> list:
	"""Joins `--flag value` pairs into the `--flag=value` form tornado expects."""
	out = []
	i = 0
	while i < len(argv):
		arg = argv[i]
		if arg.startswith('--') and '=' not in arg and i + 1 < len(argv) and not argv[i + 1].startswith('--'):
			out.append(f'{arg}={argv[i + 1]}')
			i += 2
			continue
		out.append(arg)
		i += 1
	return out


class BaseCommand:
	"""Base class for all commands.

	Inherit from this, define flags in `define_options` and a voluptuous
	`schema` for them, and implement `run`.
	"""
	name = ''
	description = ''
	schema = vlps.Schema({}, extra=vlps.ALLOW_EXTRA)

	def __init__(self):
		self.options = tornado.options.OptionParser()
		define_logging_options(self.options)
		self.options.logging = env.LOG_LEVEL
		self.options.define('seed', default=env.SEED, type=int, help='master seed of every stochastic stage')
		self.define_options(self.options)

	def define_options(self, options: tornado.options.OptionParser):
		pass

	def parse(self, argv: list) -> dict:
		"""Parses long flags; anything unknown is a usage error."""
		try:
			rest = self.options.parse_command_line([self.name] + normalize_argv(argv), final=False)
		except (tornado.options.Error, ValueError) as e:
			raise UsageError(f'{self.name}: {e}') from e
		if rest:
			raise UsageError(f'{self.name}: unexpected arguments {" ".join(rest)}')
		enable_pretty_logging(options=self.options)
		return dict(self.options.as_dict())

	def validate(self, schema: vlps.Schema, data: dict, custom_message: str = None):
		"""Validates `data` according to Voluptuous `schema`.

		`schema` may contain transform instructions, so the returned object
		may be different from the original `data`. Validation errors become
		usage errors with the validator message or `custom_message`.
		"""
		try:
			return schema(data)
		except vlps.Error as e:
			message = str(e) if custom_message is None else custom_message
			raise UsageError(f'{self.name}: {message}') from e

	def run(self, args: dict) -> int:
		raise NotImplementedError

	def write(self, text: str):
		"""stdout is reserved for human-readable summaries."""
		sys.stdout.write(text.rstrip('\n') + '\n')

	def __call__(self, argv: list) -> int:
		args = self.validate(self.schema, self.parse(argv))
		return self.run(args)
