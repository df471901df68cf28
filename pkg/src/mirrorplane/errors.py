"""Exception types raised across the package.

Every error derives from :class:`MirrorPlaneError` so callers (the CLI in
particular) can catch one type and report ``exc.code``.
"""


class MirrorPlaneError(Exception):
    """Base class; ``code`` is the stable name used in JSON error records."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(MirrorPlaneError, ValueError):
    pass


# geometry
class NonPositiveDepth(InputError):
    pass


class OutOfBounds(InputError):
    pass


class RayParallel(MirrorPlaneError):
    pass


class BehindCamera(MirrorPlaneError):
    pass


class ZeroNormal(InputError):
    pass


class NonUnitInput(InputError):
    pass


# imaging
class BadFormat(InputError):
    pass


class EmptyMask(InputError):
    pass


class DimensionMismatch(InputError):
    pass


# plane fitting
class TooFewPoints(MirrorPlaneError):
    pass


class Degenerate(MirrorPlaneError):
    pass


class NoConsensus(MirrorPlaneError):
    pass


class NoBorderPoints(MirrorPlaneError):
    pass


class TooFewNormals(InputError):
    pass


class EmptyCluster(MirrorPlaneError):
    pass


class BadAnchorId(InputError):
    pass


class ZeroSum(MirrorPlaneError):
    pass


# metrics
class EmptyValidSet(MirrorPlaneError):
    pass


class EmptyRegion(MirrorPlaneError):
    pass


class AllZeroPred(MirrorPlaneError):
    pass


class NoGroundTruth(MirrorPlaneError):
    pass


# synth
class CameraOutsideRoom(InputError):
    pass
