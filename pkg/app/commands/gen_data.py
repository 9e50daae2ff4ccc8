# -*- coding: utf-8 -*-
"""Module with the command that writes a synthetic dataset as MNIST-style IDX files.
"""
import dataclasses
import os

import tornado.options

from app.base_command import EXIT_OK, BaseCommand
from app.commands.common import DATASET_JSON, dataset_entry, define_dataset_options, define_out_option, failures
from app.modules.harness import generate_synthetic, write_mnist_idx
from app.modules.harness.datasets import MNIST_FILES
from app.modules.harness.reports import write_json
from app.validation.commands import GEN_DATA_SCHEMA


class GenDataCommand(BaseCommand):
	name = 'gen-data'
	description = 'write the synthetic shapes-on-background dataset as IDX files plus dataset.json'
	schema = GEN_DATA_SCHEMA

	def define_options(self, options: tornado.options.OptionParser):
		define_dataset_options(options)
		define_out_option(options, default='')

	def run(self, args: dict) -> int:
		args['dataset'] = 'synthetic'
		out = args['out']
		with failures():
			spec, factors = dataset_entry(args)
			os.makedirs(out, exist_ok=True)
			counts = {}
			for split, (images_file, labels_file) in MNIST_FILES.items():
				data = generate_synthetic(spec, factors, split)
				write_mnist_idx(data, os.path.join(out, images_file), os.path.join(out, labels_file))
				counts[split] = len(data)
			write_json(os.path.join(out, DATASET_JSON), {
				'name': spec.name,
				'num_classes': spec.num_classes,
				'image_size': spec.image_size,
				'seed': spec.seed,
				'counts': counts,
				'factors': dataclasses.asdict(factors),
			})
		self.write(f'{spec.name}: {counts["train"]} train and {counts["test"]} test images in {out}')
		return EXIT_OK
