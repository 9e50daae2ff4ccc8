# -*- coding: utf-8 -*-
"""Binary model checkpoints.

Layout, all integers little-endian:

  header   b'CDNB' | version u16 | variant id u8
  record   name length u16 | name (utf-8) | rank u8 | dims u32 * rank | float64 data

Records run to the end of the file. Besides the parameters and buffers of
the model, records named `meta.*` carry what is needed to rebuild it:
image shape, class count, init seed and every ZooConfig field.
"""
import logging
import os
import struct

import numpy as np
import voluptuous as vlps

from app.modules.autograd import AutogradError
from app.modules.modelzoo.common import CausalModel, CheckpointError, ZooConfig
from app.modules.modelzoo.registry import VARIANT_IDS

logger = logging.getLogger(__name__)

MAGIC = b'CDNB'
VERSION = 1

_HEADER = struct.Struct('<4sHB')
_NAME_LENGTH = struct.Struct('<H')
_RANK = struct.Struct('<B')

_META = 'meta.'
_CONFIG = 'meta.config.'

HEADER_SCHEMA = vlps.Schema({
	vlps.Required('magic'): vlps.All(MAGIC, msg=f'bad magic, expected {MAGIC!r}'),
	vlps.Required('version'): vlps.All(VERSION, msg=f'unsupported version, expected {VERSION}'),
	vlps.Required('variant_id'): vlps.In(VARIANT_IDS, msg='unknown variant id'),
})


def _encode_record(name: str, value: np.ndarray) -> bytes:
	value = np.ascontiguousarray(value, dtype='<f8')
	encoded = name.encode('utf-8')
	return b''.join((
		_NAME_LENGTH.pack(len(encoded)),
		encoded,
		_RANK.pack(value.ndim),
		struct.pack(f'<{value.ndim}I', *value.shape),
		value.tobytes(),
	))


def encode_checkpoint(model: CausalModel) -> bytes:
	records = {
		_META + 'image_shape': np.asarray(model.image_shape, dtype=np.float64),
		_META + 'num_classes': np.asarray(float(model.num_classes)),
		_META + 'seed': np.asarray(float(model.seed)),
	}
	records.update({_CONFIG + k: np.asarray(v) for k, v in model.config.as_vector().items()})
	records.update(model.state_dict())
	chunks = [_HEADER.pack(MAGIC, VERSION, model.variant_id)]
	chunks.extend(_encode_record(name, value) for name, value in records.items())
	return b''.join(chunks)


class _Reader:
	"""Cursor over a byte string; every read checks the remaining length."""

	def __init__(self, data: bytes):
		self.data = data
		self.offset = 0

	def at_end(self) -> bool:
		return self.offset >= len(self.data)

	def take(self, size: int, what: str) -> bytes:
		if self.offset + size > len(self.data):
			raise CheckpointError(f'truncated checkpoint: {what} needs {size} bytes at offset {self.offset}')
		chunk = self.data[self.offset:self.offset + size]
		self.offset += size
		return chunk

	def unpack(self, fmt: struct.Struct, what: str) -> tuple:
		return fmt.unpack(self.take(fmt.size, what))


def decode_checkpoint(data: bytes) -> tuple:
	"""Returns (variant id, {name: array}) after validating the header."""
	reader = _Reader(data)
	magic, version, variant_id = reader.unpack(_HEADER, 'header')
	try:
		HEADER_SCHEMA({'magic': magic, 'version': version, 'variant_id': variant_id})
	except vlps.Invalid as e:
		raise CheckpointError(f'{e} (magic {magic!r}, version {version}, variant {variant_id})') from e

	records = {}
	while not reader.at_end():
		(length,) = reader.unpack(_NAME_LENGTH, 'name length')
		name = reader.take(length, 'name').decode('utf-8')
		(rank,) = reader.unpack(_RANK, f'rank of {name}')
		dims = struct.unpack(f'<{rank}I', reader.take(4 * rank, f'dims of {name}'))
		count = int(np.prod(dims)) if rank else 1
		raw = reader.take(8 * count, f'data of {name}')
		records[name] = np.frombuffer(raw, dtype='<f8').reshape(dims).astype(np.float64)
	return variant_id, records


def save_checkpoint(model: CausalModel, path: str):
	"""Writes atomically: a temporary file next to `path`, then a rename."""
	tmp = f'{path}.tmp'
	with open(tmp, 'wb') as file:
		file.write(encode_checkpoint(model))
	os.replace(tmp, path)
	logger.debug('checkpoint of %s written to %s', model.variant, path)


def restore_model(data: bytes) -> CausalModel:
	variant_id, records = decode_checkpoint(data)
	try:
		image_shape = tuple(int(d) for d in records.pop(_META + 'image_shape'))
		num_classes = int(records.pop(_META + 'num_classes'))
		seed = int(records.pop(_META + 'seed'))
	except KeyError as e:
		raise CheckpointError(f'checkpoint lacks record {e}') from None
	config_values = {
		name[len(_CONFIG):]: float(records.pop(name)) for name in list(records) if name.startswith(_CONFIG)
	}
	model = VARIANT_IDS[variant_id](image_shape, num_classes, ZooConfig.from_vector(config_values), seed)
	try:
		model.load_state_dict(records)
	except AutogradError as e:
		raise CheckpointError(f'checkpoint does not fit {model.variant}: {e}') from e
	return model


def load_checkpoint(path: str) -> CausalModel:
	with open(path, 'rb') as file:
		return restore_model(file.read())
