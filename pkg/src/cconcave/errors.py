"""Exception types shared across the package."""


class CConcaveError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(CConcaveError, ValueError):
    pass


class CutLocusError(CConcaveError, ValueError):
    """A point pair reaches the cut locus, so log/distance gradients are undefined."""


class DegenerateError(CConcaveError, ValueError):
    """Quantity undefined at coincident points (e.g. the gradient of r at its center)."""


class InvalidRadius(CConcaveError, ValueError):
    pass


class InvalidRamp(CConcaveError, ValueError):
    pass


class ConstructionFailed(CConcaveError, RuntimeError):
    pass


class MixTooLarge(CConcaveError, RuntimeError):
    pass


class VerificationFailed(CConcaveError, AssertionError):
    pass


class SizeMismatch(CConcaveError, ValueError):
    pass


class SizeLimit(CConcaveError, ValueError):
    pass


class ConfigError(CConcaveError, ValueError):
    pass
