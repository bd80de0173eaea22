"""Exception types shared across the toolkit."""


class RgbdPoseError(Exception):
    """Base class for all toolkit errors."""


# --- rigid alignment ---

class InsufficientCorrespondences(RgbdPoseError):
    """Fewer than the minimal number of point pairs required for a fit."""


class DegenerateConfiguration(RgbdPoseError):
    """Source points are (near-)collinear; the rotation is unobservable."""


class NoConsensus(RgbdPoseError):
    """Robust estimation found no hypothesis with enough inliers."""


class EmptyCloud(RgbdPoseError):
    """Operation requires a non-empty point cloud."""


class NonUnitQuaternion(RgbdPoseError):
    """Quaternion norm deviates from 1 beyond tolerance."""


class InvalidK(RgbdPoseError, ValueError):
    """Requested sample count is out of range."""


class InvalidStartIndex(RgbdPoseError, ValueError):
    """Seed index for greedy sampling is out of range."""


# --- metrics ---

class EmptyModel(RgbdPoseError):
    """Object model has no vertices."""


class InvalidThreshold(RgbdPoseError, ValueError):
    """Threshold or step for curve integration is not positive."""


class InvalidDiameter(RgbdPoseError, ValueError):
    """Object diameter must be positive."""


# --- camera geometry / features ---

class BehindCamera(RgbdPoseError):
    """Point has non-positive depth and cannot be projected."""


class InvalidN(RgbdPoseError, ValueError):
    """Requested point-sample count is out of range."""


class TooFewPoints(RgbdPoseError):
    """Cloud is too small for the requested neighborhood size."""


class EmptyMask(RgbdPoseError):
    """Patch mask selects no valid pixels."""


# --- attention / matching ---

class ShapeMismatch(RgbdPoseError, ValueError):
    """Token matrices have incompatible shapes."""


class DimensionMismatch(RgbdPoseError, ValueError):
    """Descriptor dimensions disagree."""


class NonFiniteScores(RgbdPoseError):
    """Score matrix contains NaN or infinite entries."""


class IndexOutOfRange(RgbdPoseError, ValueError):
    """Ground-truth pair index exceeds the assignment matrix bounds."""


class ZeroProbabilityWarning(UserWarning):
    """An assignment probability hit the clamp floor during loss evaluation."""


# --- synthetic data ---

class InvalidParams(RgbdPoseError, ValueError):
    """Procedural mesh parameters are out of range."""


class InvalidRange(RgbdPoseError, ValueError):
    """Deformation scale range is empty or non-positive."""


class InvalidBarycentric(RgbdPoseError, ValueError):
    """Barycentric coordinates are negative or do not sum to one."""


# --- pipeline ---

class PoseEstimationFailed(RgbdPoseError):
    """Every support view failed to produce a usable pose candidate."""


class EmptyQuery(RgbdPoseError):
    """Query patch mask selects no pixels."""


class NotEnoughFrames(RgbdPoseError):
    """Dataset holds fewer labeled frames than requested support views."""


class DatasetFormatError(RgbdPoseError):
    """Dataset directory is missing files or is internally inconsistent."""


class TooFewFrames(RgbdPoseError):
    """Video registration needs at least two frames."""


class RegistrationDiverged(RgbdPoseError):
    """Adjacent-frame registration residual exceeded the divergence gate."""
