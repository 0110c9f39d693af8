"""Embedding exporter producing SPCE files for the detection pipeline."""

from .backbone import FixtureBackbone, load_backbone
from .errors import ConfigError, DataError, ExportError
from .export import ExportResult, export_embeddings, read_manifest
from .identity import content_id
# the module is spectra_export.preprocess; alias the pipeline function so the
# package attribute does not shadow the submodule
from .preprocess import decode_image, normalize, resize_to_canonical
from .preprocess import preprocess as preprocess_image
from .spce import read as read_spce
from .spce import write as write_spce

__all__ = [
    "FixtureBackbone",
    "load_backbone",
    "ConfigError",
    "DataError",
    "ExportError",
    "ExportResult",
    "export_embeddings",
    "read_manifest",
    "content_id",
    "decode_image",
    "normalize",
    "preprocess_image",
    "resize_to_canonical",
    "read_spce",
    "write_spce",
]

__version__ = "0.1.0"
