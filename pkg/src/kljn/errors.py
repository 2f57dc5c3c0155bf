"""Exception hierarchy for the kljn package."""


class KLJNError(Exception):
    """Base class for all package errors."""


class InvalidInput(KLJNError, ValueError):
    """A parameter violates its domain (negative resistance, bad bandwidth, ...)."""


class UnphysicalQuad(KLJNError):
    """The generator-voltage system has no physical solution for this resistor set."""


class InfeasibleMatch(KLJNError):
    """An impedance-matching design would need a non-positive fourth resistor."""


class DegenerateCable(KLJNError):
    """A crossover frequency was required but the cable C or L is zero."""


class BandwidthExceedsNyquist(KLJNError, ValueError):
    pass


class GridTooCoarse(KLJNError, ValueError):
    """Sample rate is below 20x the fastest frequency in play."""


class SegmentTooLong(KLJNError, ValueError):
    pass


class NoUsablePoints(KLJNError):
    """Every evaluation frequency had a measured PSD at or above S(0)."""


class IndistinguishableHypotheses(KLJNError):
    """HL and LH predictions coincide on every measured channel; no verdict possible."""


class AmbiguousLevels(KLJNError):
    """Noise levels are too close to separate at the configured bit-period length."""
