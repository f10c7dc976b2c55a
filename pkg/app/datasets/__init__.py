from .shapes import NUM_SHAPES, SHAPE_NAMES, draw_mask
from .generator import (
    DEFAULT_DOMAINS, EVAL, SOURCE_DOMAIN, TARGET_DOMAIN, TRAIN, UNKNOWN_LABEL,
    Dataset, Sample, generate, render_sample,
)
from .splits import Benchmark, make_benchmark, make_split, split_spec
from .storage import decode_benchmark, encode_benchmark, load_dataset, save_dataset

__all__ = [
    "NUM_SHAPES", "SHAPE_NAMES", "draw_mask",
    "DEFAULT_DOMAINS", "EVAL", "SOURCE_DOMAIN", "TARGET_DOMAIN", "TRAIN", "UNKNOWN_LABEL",
    "Dataset", "Sample", "generate", "render_sample",
    "Benchmark", "make_benchmark", "make_split", "split_spec",
    "decode_benchmark", "encode_benchmark", "load_dataset", "save_dataset",
]
