from .atomic import atomic_write_bytes, atomic_write_text
from .envi import (HyperCube, LabelMap, load_cube, load_labels, parse_header, read_header,
                   reindex_labels, save_cube, save_labels)
from .features import STAGES, FeatureMatrix, load_features, save_features
from .samples import SampleSet, load_samples, samples_from_rasters, save_samples
from .synthetic import SceneSpec, Shape, Transform, generate_synthetic, rotate_patch, shape_patch

__all__ = [
    "HyperCube", "LabelMap", "SampleSet", "FeatureMatrix", "STAGES",
    "load_cube", "save_cube", "load_labels", "save_labels", "reindex_labels",
    "parse_header", "read_header", "load_samples", "save_samples", "samples_from_rasters",
    "load_features", "save_features", "atomic_write_bytes", "atomic_write_text",
    "SceneSpec", "Shape", "Transform", "generate_synthetic", "rotate_patch", "shape_patch",
]
