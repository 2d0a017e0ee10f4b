"""Exception types raised across the package."""
from __future__ import annotations


class DualBilliardsError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class NonPeriodic(DualBilliardsError):
    """Profile fails the closure condition."""

    code = "NonPeriodic"


class NonPositiveSupport(DualBilliardsError):
    """Origin is not strictly inside the curve."""

    code = "NonPositiveSupport"


class InvalidProfile(DualBilliardsError):
    """Malformed or negative radius-of-curvature profile."""

    code = "InvalidProfile"


class DomainGap(DualBilliardsError):
    """Angle gap outside the open interval (0, pi)."""

    code = "DomainGap"


class NonSmoothPoint(DualBilliardsError):
    """Second derivatives requested at a jump of rho."""

    code = "NonSmoothPoint"


class OnCurve(DualBilliardsError):
    """Point lies on (or inside) the curve."""

    code = "OnCurve"


class NoBracket(DualBilliardsError):
    """Root bracketing failed."""

    code = "NoBracket"


class Overflow(DualBilliardsError):
    """Coordinate beyond representable range."""

    code = "Overflow"


class NotAllowable(DualBilliardsError):
    """Configuration gaps leave the allowable strip."""

    code = "NotAllowable"


class NoConvergence(DualBilliardsError):
    """Iterative solver did not converge."""

    code = "NoConvergence"


class NotSandwiched(DualBilliardsError):
    """Lower configuration exceeds the upper one."""

    code = "NotSandwiched"


class NotSubsolution(DualBilliardsError):
    """Configuration is not a subsolution."""

    code = "NotSubsolution"


class NotSupersolution(DualBilliardsError):
    """Configuration is not a supersolution."""

    code = "NotSupersolution"


class NoCrossing(DualBilliardsError):
    """Candidate circle never meets the image fiber."""

    code = "NoCrossing"


class SandwichFailed(DualBilliardsError):
    """Sub/supersolution construction failed."""

    code = "SandwichFailed"


class InvalidParams(DualBilliardsError):
    """Parameters violate their constraints."""

    code = "InvalidParams"


class NoCollision(DualBilliardsError):
    """No wall collision within half a period."""

    code = "NoCollision"


class AreaTooLarge(DualBilliardsError):
    """Requested cap area is at least half the enclosed area."""

    code = "AreaTooLarge"


class Tangential(DualBilliardsError):
    """Billiard shot is tangent to the table."""

    code = "Tangential"


class CausticNotVisible(DualBilliardsError):
    """Point does not see the caustic from outside."""

    code = "CausticNotVisible"


class ParallelRay(DualBilliardsError):
    """Ray is parallel to the bounce line."""

    code = "ParallelRay"
