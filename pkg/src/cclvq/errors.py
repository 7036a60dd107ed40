"""Exception types shared across the package.

Every error raised on bad input derives from :class:`ValidationError`, so
callers (and the CLI exit-code mapping) can branch on a single type.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DimensionMismatchError(ValidationError):
    """Operands carry incompatible vector dimensions."""


class TieError(ValidationError):
    """A sample is equidistant from two codebook points.

    The distortion gradient is undefined at such configurations (the no-tie
    hypothesis fails empirically), so gradient routines refuse to proceed.
    """

    def __init__(self, sample_index: int, first: int, second: int, gap: float):
        self.sample_index = sample_index
        self.first = first
        self.second = second
        self.gap = gap
        super().__init__(
            f"no-tie hypothesis violated: sample {sample_index} is equidistant "
            f"from codebook points {first} and {second} "
            f"(squared-distance gap {gap:.3e} <= 1e-12); "
            "gradient of the distortion is undefined here"
        )


class VerificationError(Exception):
    """An oracle check failed; carries the serialized failing instance."""

    def __init__(self, message: str, instance: dict | None = None):
        self.instance = instance or {}
        super().__init__(message)
