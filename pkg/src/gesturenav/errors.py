"""Exception hierarchy shared across the simulator."""


class GestureNavError(Exception):
    """Base class for all simulator errors."""


# -- camera / geometry -------------------------------------------------------

class BehindCamera(GestureNavError):
    """Point has non-positive depth along the optical axis."""


class OutOfImage(GestureNavError):
    """Pixel coordinates fall outside the image bounds."""


class VerticalRay(GestureNavError):
    """Ray has no usable horizontal component on the map plane."""


# -- perception --------------------------------------------------------------

class NotVisible(GestureNavError):
    """Instructor outside the camera frustum or occluded by the map."""


class FootNotVisible(GestureNavError):
    """Foot-floor contact point is not in the image; depth undefined."""


class DegenerateHorizon(GestureNavError):
    """Bounding-box bottom too close to the principal row for depth."""


class FootAboveHorizon(GestureNavError):
    """Bounding-box bottom above the principal row; not a standing person."""


class DegenerateSkeleton(GestureNavError):
    """Non-metric skeleton has no usable pelvis depth for scale recovery."""


class NoPointingArm(GestureNavError):
    """Neither arm passes the pointing elevation gate."""


class DegenerateFusion(GestureNavError):
    """Weighted direction sum has vanishing norm."""


# -- grounding ---------------------------------------------------------------

class EmptyPhrase(GestureNavError):
    """No tokens survive phrase normalization."""


class NoCandidates(GestureNavError):
    """Disambiguation called with no proposals."""


# -- navigation --------------------------------------------------------------

class GoalOccupied(GestureNavError):
    """Requested goal cell is occupied after inflation."""


class NoPath(GestureNavError):
    """Start and goal lie in disconnected free components."""


class OriginOutsideGrid(GestureNavError):
    """Raycast origin lies outside the grid."""


class Stuck(GestureNavError):
    """Path follower made no progress for the stall window."""


class NoFreePoseOnRay(GestureNavError):
    """No free cell along the pointing ray within the probe range."""


# -- service / harness -------------------------------------------------------

class ParseError(GestureNavError):
    """Scenario or trace file could not be parsed."""


class ValidationError(GestureNavError):
    """Scenario parsed but violates its schema; carries all violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownInstructor(GestureNavError):
    """Instructor id not present in the world."""


class TargetOutsideGrid(GestureNavError):
    """Gesture target lies outside the map."""


class DegenerateGesture(GestureNavError):
    """Gesture target coincides with the instructor."""
