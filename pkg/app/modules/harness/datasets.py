# -*- coding: utf-8 -*-
"""Datasets: MNIST IDX files and a synthetic shapes-on-background generator.

IDX layout (big-endian): two zero bytes, a type byte (0x08 = unsigned byte),
a rank byte, one u32 per dimension, then the raw values. Images use magic
0x00000803 (N, rows, cols), labels 0x00000801 (N,).

Synthetic images are 16x16: the class picks one of ten 5x5 glyphs placed at a
jittered position (the causal factor) and the background is filled at one of
C intensity levels (the confounder). With probability ρ the level index
equals the label, otherwise it is drawn uniformly. Pixels are quantised to
k/255 so the images survive an IDX round trip bit for bit.
"""
from dataclasses import dataclass, field
import logging
import os
import struct
from typing import Optional

import numpy as np

from app.modules.harness.common import HarnessError, IdxFormatError, stage_rng

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
_UBYTE = 0x08

MNIST_FILES = {
	'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
	'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
}

SOURCES = ('synthetic', 'mnist_idx')

# pylint: disable=bad-whitespace
_GLYPHS = (
	('.###.', '#...#', '#...#', '#...#', '.###.'),
	('..#..', '.##..', '..#..', '..#..', '.###.'),
	('####.', '....#', '.###.', '#....', '#####'),
	('####.', '....#', '.###.', '....#', '####.'),
	('#..#.', '#..#.', '#####', '...#.', '...#.'),
	('#####', '#....', '####.', '....#', '####.'),
	('.###.', '#....', '####.', '#...#', '.###.'),
	('#####', '....#', '...#.', '..#..', '..#..'),
	('.###.', '#...#', '.###.', '#...#', '.###.'),
	('.###.', '#...#', '.####', '....#', '.###.'),
)
# pylint: enable=bad-whitespace
GLYPHS = np.array([[[c == '#' for c in row] for row in glyph] for glyph in _GLYPHS], dtype=np.float64)


@dataclass
class Dataset:
	"""Images (N, C, H, W) in [0, 1] with integer labels."""
	name: str
	images: np.ndarray
	labels: np.ndarray
	num_classes: int
	# Ground-truth generating factors per sample (synthetic data only).
	factors: dict = field(default_factory=dict)

	def __post_init__(self):
		if self.images.shape[0] != self.labels.shape[0]:
			raise HarnessError(
				f'{self.name}: {self.images.shape[0]} images but {self.labels.shape[0]} labels'
			)

	def __len__(self) -> int:
		return int(self.labels.shape[0])

	@property
	def image_shape(self) -> tuple:
		return tuple(self.images.shape[1:])

	def subset(self, indices: np.ndarray, name: Optional[str] = None) -> 'Dataset':
		return Dataset(
			name=self.name if name is None else name,
			images=self.images[indices],
			labels=self.labels[indices],
			num_classes=self.num_classes,
			factors={k: v[indices] for k, v in self.factors.items()},
		)


@dataclass
class DatasetSplits:
	train: Dataset
	val: Dataset
	test: Dataset

	@property
	def name(self) -> str:
		return self.test.name


@dataclass(frozen=True)
class DatasetSpec:
	"""`train_size` counts the original training split, before the 4:1 train/val cut."""
	source: str = 'synthetic'
	name: str = 'synthetic'
	image_size: int = 16
	num_classes: int = 10
	train_size: int = 4000
	test_size: int = 1000
	seed: int = 0
	# Directory holding the four MNIST IDX files.
	path: str = ''

	def __post_init__(self):
		if self.source not in SOURCES:
			raise HarnessError(f'unknown dataset source {self.source!r}')


@dataclass(frozen=True)
class SyntheticFactors:
	rho: float = 0.9
	max_background: float = 0.4
	noise: float = 0.05
	jitter: int = 2

	def levels(self, num_classes: int) -> np.ndarray:
		return np.linspace(0.0, self.max_background, num_classes)


# IDX


def _pack_idx(array: np.ndarray) -> bytes:
	array = np.ascontiguousarray(array, dtype=np.uint8)
	header = struct.pack('>BBBB', 0, 0, _UBYTE, array.ndim)
	return header + struct.pack(f'>{array.ndim}I', *array.shape) + array.tobytes()


def write_idx(path: str, array: np.ndarray):
	tmp = f'{path}.tmp'
	with open(tmp, 'wb') as file:
		file.write(_pack_idx(array))
	os.replace(tmp, path)


def parse_idx(data: bytes, expected_magic: int, source: str = '<bytes>') -> np.ndarray:
	"""Decodes one IDX blob; rejects a wrong magic or a short payload."""
	if len(data) < 4:
		raise IdxFormatError(f'{source}: truncated at byte offset {len(data)}, header needs 4 bytes')
	(magic,) = struct.unpack('>I', data[:4])
	if magic != expected_magic:
		raise IdxFormatError(f'{source}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}')
	rank = magic & 0xFF
	dims_end = 4 + 4 * rank
	if len(data) < dims_end:
		raise IdxFormatError(f'{source}: truncated at byte offset {len(data)}, dimensions need {dims_end} bytes')
	dims = struct.unpack(f'>{rank}I', data[4:dims_end])
	expected_end = dims_end + int(np.prod(dims))
	if len(data) < expected_end:
		raise IdxFormatError(f'{source}: truncated at byte offset {len(data)}, payload needs {expected_end} bytes')
	if len(data) > expected_end:
		logger.warning('%s: %d trailing bytes ignored', source, len(data) - expected_end)
	return np.frombuffer(data, dtype=np.uint8, count=expected_end - dims_end, offset=dims_end).reshape(dims)


def read_idx(path: str, expected_magic: int) -> np.ndarray:
	with open(path, 'rb') as file:
		return parse_idx(file.read(), expected_magic, path)


def load_mnist_idx(images_path: str, labels_path: str, name: str = 'mnist', num_classes: int = 10) -> Dataset:
	images = read_idx(images_path, IMAGE_MAGIC)
	labels = read_idx(labels_path, LABEL_MAGIC)
	if images.shape[0] != labels.shape[0]:
		raise IdxFormatError(
			f'{images_path} holds {images.shape[0]} images but {labels_path} holds {labels.shape[0]} labels'
		)
	return Dataset(
		name=name,
		images=images[:, None, :, :].astype(np.float64) / 255.0,
		labels=labels.astype(np.int64),
		num_classes=num_classes,
	)


def write_mnist_idx(dataset: Dataset, images_path: str, labels_path: str):
	"""Inverse of load_mnist_idx for single-channel images quantised to k/255."""
	if dataset.images.shape[1] != 1:
		raise HarnessError(f'IDX images are single-channel, got {dataset.images.shape[1]} channels')
	write_idx(images_path, np.rint(dataset.images[:, 0] * 255.0))
	write_idx(labels_path, dataset.labels)


# Synthetic


def generate_synthetic(
	spec: DatasetSpec,
	factors: SyntheticFactors = SyntheticFactors(),
	split: str = 'train'
) -> Dataset:
	"""`spec.train_size` or `spec.test_size` samples, seeded by (spec.seed, split)."""
	if spec.num_classes > len(GLYPHS):
		raise HarnessError(f'synthetic data has {len(GLYPHS)} glyphs, {spec.num_classes} classes requested')
	size = spec.image_size
	glyph_size = GLYPHS.shape[1]
	if size < glyph_size + 2 * factors.jitter:
		raise HarnessError(f'image size {size} cannot hold a jittered {glyph_size}x{glyph_size} glyph')
	count = spec.train_size if split == 'train' else spec.test_size
	rng = stage_rng(spec.seed, 'synthetic', split)

	labels = rng.integers(spec.num_classes, size=count)
	correlated = rng.random(count) < factors.rho
	level_index = np.where(correlated, labels, rng.integers(spec.num_classes, size=count))
	background = factors.levels(spec.num_classes)[level_index]
	centre = (size - glyph_size) // 2
	offsets = centre + rng.integers(-factors.jitter, factors.jitter + 1, size=(count, 2))

	images = np.repeat(background[:, None, None], size, axis=1).repeat(size, axis=2)
	for i in range(count):
		row, col = offsets[i]
		patch = images[i, row:row + glyph_size, col:col + glyph_size]
		np.copyto(patch, 1.0, where=GLYPHS[labels[i]] > 0)
	images = np.clip(images + factors.noise * rng.standard_normal(images.shape), 0.0, 1.0)
	images = np.rint(images * 255.0) / 255.0

	return Dataset(
		name=spec.name,
		images=images[:, None, :, :],
		labels=labels.astype(np.int64),
		num_classes=spec.num_classes,
		factors={'shape': labels.copy(), 'level': level_index, 'background': background, 'offset': offsets},
	)


def split_train_val(dataset: Dataset, seed: int = 0, ratio: int = 4) -> tuple:
	"""Random (train, val) cut with |train| : |val| = ratio : 1."""
	n = len(dataset)
	if n < ratio + 1:
		raise HarnessError(f'{dataset.name}: {n} samples cannot be split {ratio}:1')
	order = stage_rng(seed, 'split', dataset.name).permutation(n)
	val_size = n // (ratio + 1)
	return dataset.subset(np.sort(order[val_size:])), dataset.subset(np.sort(order[:val_size]))


def _mnist_split(spec: DatasetSpec, split: str, size: int) -> Dataset:
	images_file, labels_file = MNIST_FILES[split]
	full = load_mnist_idx(
		os.path.join(spec.path, images_file), os.path.join(spec.path, labels_file), spec.name, spec.num_classes
	)
	if size and size < len(full):
		pick = stage_rng(spec.seed, 'subsample', split).choice(len(full), size=size, replace=False)
		full = full.subset(np.sort(pick))
	return full


def load_dataset(spec: DatasetSpec, factors: SyntheticFactors = SyntheticFactors()) -> DatasetSplits:
	if spec.source == 'synthetic':
		full_train = generate_synthetic(spec, factors, 'train')
		test = generate_synthetic(spec, factors, 'test')
	else:
		full_train = _mnist_split(spec, 'train', spec.train_size)
		test = _mnist_split(spec, 'test', spec.test_size)
		if full_train.image_shape[1] % 4:
			raise HarnessError(f'{spec.name}: image side {full_train.image_shape[1]} is not a multiple of 4')
	train, val = split_train_val(full_train, spec.seed)
	logger.info('%s: %d train, %d val, %d test samples of shape %s', spec.name, len(train), len(val), len(test), train.image_shape)
	return DatasetSplits(train=train, val=val, test=test)
