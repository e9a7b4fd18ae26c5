"""Exception classes shared across the package."""


class MaskomalyError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(MaskomalyError):
    """Paired inputs disagree in query count or spatial shape."""


class RangeViolation(MaskomalyError):
    """A value lies outside its required range (typically [0, 1])."""


class RowSumViolation(MaskomalyError):
    """A class-probability row does not sum to 1 within tolerance."""


class InvalidToggles(MaskomalyError):
    """Both the accept and the reject stage were disabled."""


class InconsistentQueryCount(MaskomalyError):
    """Bundles in one collection do not share the same query count."""


class InvalidBins(MaskomalyError):
    """Histogram bin edges are not strictly increasing within [0, 1]."""


class NoPositives(MaskomalyError):
    """Average precision is undefined without a single positive label."""


class DegenerateLabels(MaskomalyError):
    """Ranking metrics need at least one positive and one negative."""


class GridMismatch(MaskomalyError):
    """Threshold statistics built on different bin grids cannot merge."""


class BadMagic(MaskomalyError):
    """A bundle file does not start with the expected magic bytes."""


class TruncatedPayload(MaskomalyError):
    """A bundle file payload does not match the size its header promises."""


class MalformedHeader(MaskomalyError):
    """A file header is syntactically invalid or unsupported."""


class LabelViolation(MaskomalyError):
    """A label map contains a value outside {0, 1, 255}."""


class InfeasibleSpec(MaskomalyError):
    """A synthetic-scene spec cannot be realized (e.g. zero-area shapes)."""
