"""Thin adapter from raw mask-network logits to scoring-ready files."""

from .errors import ExportError, NonFiniteLogits, ShapeMismatch, UnknownClassList
from .export import activate_outputs, export_image, export_road_region, road_region
from .mkio_write import write_bundle, write_graymap

__version__ = "0.1.0"
