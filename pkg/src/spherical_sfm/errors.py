"""Exception types raised by the library."""


class SphericalSfmError(Exception):
    """Base class for all library errors."""


class DegenerateMotion(SphericalSfmError):
    """Relative translation is numerically zero; epipolar geometry undefined."""


class InsufficientCorrespondences(SphericalSfmError):
    """Fewer correspondences than the operation requires."""


class RankDeficient(SphericalSfmError):
    """Epipolar system rank below 3 (duplicated or degenerate points)."""


class EliminationFailed(SphericalSfmError):
    """Gauss-Jordan pivot below tolerance; constraint system not reducible."""


class NoValidHypothesis(SphericalSfmError):
    """RANSAC could not produce a single valid model hypothesis."""


class DisconnectedGraph(SphericalSfmError):
    """Rotation graph does not connect all cameras."""


class GenerationFailed(SphericalSfmError):
    """Synthetic problem generation exceeded its rejection budget."""


class ParseError(SphericalSfmError):
    """Input file could not be parsed."""


class CalibrationMismatch(SphericalSfmError):
    """Track observations are inconsistent with the supplied intrinsics."""


class NonConvergenceWarning(UserWarning):
    """Iterative refinement hit its iteration cap before reaching tolerance."""
