"""Document image binarization toolkit."""

from .image_model import (
    BinaryImage,
    GrayImage,
    Histogram,
    RgbImage,
    histogram,
    load,
    read_netpbm,
    save,
    write_netpbm,
)
from .pipeline import PipelineConfig, parse_config, run_batch, run_pipeline
from .threshold_global import apply_global, otsu_binarize, otsu_threshold
from .threshold_local import LocalParams, apply_local, build_integral, default_params

__version__ = "0.1.0"

__all__ = [
    "BinaryImage", "GrayImage", "Histogram", "RgbImage", "histogram",
    "load", "save", "read_netpbm", "write_netpbm", "PipelineConfig", "parse_config",
    "run_batch", "run_pipeline", "apply_global", "otsu_binarize", "otsu_threshold",
    "LocalParams", "apply_local", "build_integral", "default_params",
]
