"""Exception and warning types raised by agmonlab."""


class AgmonLabError(Exception):
    """Base class for all agmonlab errors."""


class NoCausticFound(AgmonLabError):
    """V - E has no sign change (or touching zero) on the domain."""


class MonotonicityFailed(AgmonLabError):
    """The normal derivative of V changes sign inside the requested collar."""

    def __init__(self, r0, detail=""):
        self.r0 = r0
        msg = f"monotonicity fails on the collar of half-width r0={r0:g}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CollarOverlap(AgmonLabError):
    """Collars around distinct caustic components would overlap."""


class DegenerateSpeedRegion(AgmonLabError):
    """Part of the forbidden region cannot be reached from the caustic seeds."""


class ResolutionError(AgmonLabError):
    """Grid spacing too coarse for the semiclassical parameter."""


class ConvergenceError(AgmonLabError):
    """Inverse iteration failed to reach the residual target."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(f"{message}; trace={self.trace}")


class PoleSingularity(AgmonLabError):
    """The radial variable s(r) blows up away from the poles."""


class TurningPointInSegment(AgmonLabError):
    """A WKB phase integral was requested across a turning point."""


class RangeError(AgmonLabError):
    """Argument outside the validated window of a special-function routine."""


class EmptyAnnulus(AgmonLabError):
    """The requested annulus contains no grid nodes."""


class EpsilonTooLarge(AgmonLabError):
    """Carleman weight parameter violates 10*eps < r0."""


class NotAdmissible(AgmonLabError):
    """A level curve fails one of the admissibility clauses."""

    def __init__(self, clause, detail=""):
        self.clause = clause
        super().__init__(f"clause ({clause}) violated: {detail}")


class CurveOutsideDomain(AgmonLabError):
    """A curve leaves the grid on which the eigenfunction is sampled."""


class ConfigError(AgmonLabError):
    """Malformed or inconsistent experiment configuration."""


class UnderflowFloor(UserWarning):
    """An eigenfunction sample fell to the floating-point floor; node dropped."""
