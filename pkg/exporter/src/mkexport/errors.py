"""Exporter error classes."""


class ExportError(Exception):
    """Base class for exporter errors."""


class ShapeMismatch(ExportError):
    """Mask and class logits disagree in rank or query count."""


class NonFiniteLogits(ExportError):
    """Model outputs contain NaN or infinity."""


class UnknownClassList(ExportError):
    """The road-class list is empty or contains invalid class ids."""
