"""Rigid-body math: quaternions, poses, least-squares and robust alignment.

Conventions used throughout the package:
  - quaternions are scalar-first (w, x, y, z), Hamilton product;
  - a Pose maps object-frame points to camera-frame points, x_cam = R x + t;
  - compose(A, B) applies B first, then A;
  - all lengths are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateConfiguration,
    EmptyCloud,
    InsufficientCorrespondences,
    InvalidK,
    InvalidStartIndex,
    NoConsensus,
    NonUnitQuaternion,
)

_COLLINEAR_SV_RATIO = 1e-9


@dataclass(frozen=True)
class Quaternion:
    """Rotation quaternion, scalar-first (w, x, y, z)."""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, values) -> "Quaternion":
        w, x, y, z = np.asarray(values, dtype=float).reshape(4)
        return cls(float(w), float(x), float(y), float(z))

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Quaternion":
        """Uniform random rotation (normalized 4D Gaussian)."""
        v = rng.normal(size=4)
        return cls.from_array(v / np.linalg.norm(v))

    @classmethod
    def from_matrix(cls, matrix) -> "Quaternion":
        """Quaternion for a rotation matrix (Shepperd's branch method)."""
        m = np.asarray(matrix, dtype=float).reshape(3, 3)
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2.0
            q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
                 (m[1, 0] - m[0, 1]) / s)
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s,
                 (m[0, 2] + m[2, 0]) / s)
        elif m[1, 1] > m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s,
                 (m[1, 2] + m[2, 1]) / s)
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                 (m[1, 2] + m[2, 1]) / s, 0.25 * s)
        return cls(*q).normalized()

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "Quaternion":
        a = self.as_array()
        n = np.linalg.norm(a)
        if n == 0.0:
            raise NonUnitQuaternion("cannot normalize a zero quaternion")
        return Quaternion.from_array(a / n)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.normalized().as_array()
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])


@dataclass(frozen=True)
class Pose:
    """Rigid transform: x_out = rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self.compose(other)).apply(x) == self.apply(other.apply(x))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def invert(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def rotation_quaternion(self) -> Quaternion:
        return Quaternion.from_matrix(self.rotation)

    def to_json_dict(self) -> dict:
        return {
            "rotation": [float(v) for v in self.rotation.reshape(9)],
            "translation": [float(v) for v in self.translation],
            "units": "m",
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Pose":
        return cls(np.asarray(data["rotation"], dtype=float).reshape(3, 3),
                   np.asarray(data["translation"], dtype=float))


@dataclass(frozen=True)
class PointCloud:
    """3D points in meters with optional per-point RGB colors in [0, 1]."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.colors is not None:
            cols = np.asarray(self.colors, dtype=float).reshape(-1, 3)
            if len(cols) != len(pts):
                raise ValueError("colors and points have different lengths")
            object.__setattr__(self, "colors", cols)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched (source, target) 3D point pairs feeding rigid alignment."""

    source: np.ndarray
    target: np.ndarray
    confidence: Optional[np.ndarray] = None

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float).reshape(-1, 3)
        dst = np.asarray(self.target, dtype=float).reshape(-1, 3)
        if len(src) != len(dst):
            raise ValueError("source and target lists have different lengths")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", dst)
        if self.confidence is not None:
            conf = np.asarray(self.confidence, dtype=float).reshape(-1)
            if len(conf) != len(src):
                raise ValueError("confidence length mismatch")
            object.__setattr__(self, "confidence", conf)

    def __len__(self) -> int:
        return len(self.source)


@dataclass(frozen=True)
class AlignmentResult:
    """Robust alignment output: pose, per-pair inlier mask, mean squared inlier distance."""

    pose: Pose
    inlier_mask: np.ndarray
    residual: float


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 512
    inlier_threshold: float = 0.01
    min_inliers: Optional[int] = None  # None -> max(10, 10% of pairs)
    seed: int = 0


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    convergence_eps: float = 1e-6  # change in mean squared residual, m^2
    max_corr_dist: float = 0.1


def _fit_rigid(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form least-squares rotation and translation mapping src onto dst.

    Centroid subtraction, cross-covariance SVD, determinant sign correction.
    No degeneracy check; callers that need one do it themselves.
    """
    src_c = src.mean(axis=0)
    dst_c = dst.mean(axis=0)
    h = (src - src_c).T @ (dst - dst_c)
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    if d == 0.0:
        d = 1.0
    r = v @ np.diag([1.0, 1.0, d]) @ u.T
    t = dst_c - r @ src_c
    return r, t


def umeyama_align(corr: CorrespondenceSet) -> Pose:
    """Least-squares rigid transform mapping source points onto target points.

    Minimizes the summed squared distances between targets and transformed
    sources in closed form. Scale is fixed at 1 (metric inputs). The returned
    rotation is proper (det +1) even for reflection-prone configurations.
    """
    if len(corr) < 3:
        raise InsufficientCorrespondences(f"need >= 3 pairs, got {len(corr)}")
    src = corr.source
    centered = src - src.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0.0 or sv[1] < _COLLINEAR_SV_RATIO * sv[0]:
        raise DegenerateConfiguration("source points are collinear")
    r, t = _fit_rigid(src, corr.target)
    return Pose(r, t)


def ransac_align(corr: CorrespondenceSet, params: RansacParams = RansacParams()) -> AlignmentResult:
    """RANSAC rigid alignment: minimal 3-point fits, inlier counting, final refit.

    Deterministic for a fixed seed regardless of evaluation order: each
    iteration draws from its own RNG stream derived from (seed, iteration).
    Inliers are pairs whose Euclidean residual is below the threshold.
    """
    n = len(corr)
    if n < 3:
        raise InsufficientCorrespondences(f"need >= 3 pairs, got {n}")
    if params.seed < 0:
        raise ValueError("seed must be non-negative")
    min_inliers = params.min_inliers
    if min_inliers is None:
        min_inliers = max(10, math.ceil(0.1 * n))
    min_inliers = max(min_inliers, 3)

    src = corr.source
    dst = corr.target
    samples = np.empty((params.iterations, 3), dtype=int)
    for it in range(params.iterations):
        rng = np.random.default_rng([params.seed, it])
        idx = rng.integers(0, n, size=3)
        while idx[0] == idx[1] or idx[0] == idx[2] or idx[1] == idx[2]:
            idx = rng.integers(0, n, size=3)
        samples[it] = idx

    # batched minimal fits (same closed form as _fit_rigid, all at once)
    src3 = src[samples]
    dst3 = dst[samples]
    src_c = src3.mean(axis=1, keepdims=True)
    dst_c = dst3.mean(axis=1, keepdims=True)
    h = (src3 - src_c).transpose(0, 2, 1) @ (dst3 - dst_c)
    u, _, vt = np.linalg.svd(h)
    v = vt.transpose(0, 2, 1)
    ut = u.transpose(0, 2, 1)
    sign = np.where(np.linalg.det(v @ ut) < 0, -1.0, 1.0)
    v_signed = v.copy()
    v_signed[:, :, 2] *= sign[:, None]
    rotations = v_signed @ ut
    translations = dst_c[:, 0, :] - np.einsum("iab,ib->ia", rotations, src_c[:, 0, :])

    # count inliers in hypothesis chunks to bound peak memory on large inputs;
    # strict > keeps the lowest winning iteration, chunked or not
    threshold_sq = params.inlier_threshold ** 2
    chunk = max(1, int(4e6 // max(n, 1)))
    best_count = -1
    best_mask = None
    for lo in range(0, params.iterations, chunk):
        rot_chunk = rotations[lo:lo + chunk]
        moved = np.einsum("iab,nb->ina", rot_chunk, src)
        moved += translations[lo:lo + chunk, None, :]
        sq_dist = ((moved - dst[None, :, :]) ** 2).sum(axis=2)
        counts = (sq_dist < threshold_sq).sum(axis=1)
        local_best = int(np.argmax(counts))
        if int(counts[local_best]) > best_count:
            best_count = int(counts[local_best])
            best_mask = sq_dist[local_best] < threshold_sq

    if best_count < min_inliers:
        raise NoConsensus(f"best consensus {best_count} < min_inliers {min_inliers}")

    r, t = _fit_rigid(src[best_mask], dst[best_mask])
    dist = np.linalg.norm(dst - (src @ r.T + t), axis=1)
    final_mask = dist < params.inlier_threshold
    if final_mask.any():
        residual = float(np.mean(dist[final_mask] ** 2))
    else:
        final_mask = best_mask
        residual = float(np.mean(dist[best_mask] ** 2))
    return AlignmentResult(Pose(r, t), final_mask, residual)


def nearest_neighbor_residual(src: PointCloud, dst: PointCloud, pose: Pose,
                              max_corr_dist: float = np.inf) -> float:
    """Mean squared gated nearest-neighbor distance of pose-transformed src into dst."""
    if len(src) == 0 or len(dst) == 0:
        raise EmptyCloud("both clouds must be non-empty")
    tree = cKDTree(dst.points)
    dist, _ = tree.query(pose.apply(src.points), distance_upper_bound=max_corr_dist)
    ok = np.isfinite(dist)
    if not ok.any():
        return float("inf")
    return float(np.mean(dist[ok] ** 2))


def icp_refine(src: PointCloud, dst: PointCloud, init: Pose,
               params: IcpParams = IcpParams()) -> Pose:
    """Point-to-point ICP starting from init.

    Alternates gated nearest-neighbor correspondence with closed-form refits
    until the mean squared residual change drops below convergence_eps. The
    returned pose never has a larger residual than init under the same gated
    nearest-neighbor definition.
    """
    if len(src) == 0 or len(dst) == 0:
        raise EmptyCloud("both clouds must be non-empty")
    tree = cKDTree(dst.points)

    def correspond(pose: Pose):
        dist, j = tree.query(pose.apply(src.points),
                             distance_upper_bound=params.max_corr_dist)
        ok = np.isfinite(dist)
        res = float(np.mean(dist[ok] ** 2)) if ok.any() else float("inf")
        return dist, j, ok, res

    pose = init
    _, j, ok, res = correspond(init)
    best_pose, best_res = init, res
    prev = res
    for _ in range(params.max_iterations):
        if ok.sum() < 3:
            break
        r, t = _fit_rigid(src.points[ok], dst.points[j[ok]])
        pose = Pose(r, t)
        _, j, ok, res = correspond(pose)
        if res < best_res:
            best_pose, best_res = pose, res
        if abs(prev - res) < params.convergence_eps:
            break
        prev = res
    return best_pose


def quat_distance(q1: Quaternion, q2: Quaternion) -> float:
    """min(||q1 - q2||, ||q1 + q2||) for unit quaternions; 0 for identical rotations."""
    a = q1.as_array()
    b = q2.as_array()
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise NonUnitQuaternion(f"norm {np.linalg.norm(v):.9f} deviates from 1")
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def farthest_rotation_sample(rotations: Sequence[Quaternion], k: int,
                             start_index: int = 0) -> list[int]:
    """Greedy max-min selection of k rotations under quaternion distance.

    The first pick is start_index; each next pick maximizes the minimum
    distance to everything already selected. Ties go to the lowest index.
    """
    n = len(rotations)
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} outside [1, {n}]")
    if not 0 <= start_index < n:
        raise InvalidStartIndex(f"start_index={start_index} outside [0, {n})")
    qs = np.stack([q.as_array() for q in rotations])
    norms = np.linalg.norm(qs, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise NonUnitQuaternion("all rotations must be unit quaternions")

    def dists_to(i: int) -> np.ndarray:
        return np.minimum(np.linalg.norm(qs - qs[i], axis=1),
                          np.linalg.norm(qs + qs[i], axis=1))

    selected = [start_index]
    min_d = dists_to(start_index)
    min_d[start_index] = -np.inf
    for _ in range(k - 1):
        nxt = int(np.argmax(min_d))
        selected.append(nxt)
        min_d = np.minimum(min_d, dists_to(nxt))
        min_d[nxt] = -np.inf
    return selected


def chain_poses(relative: Sequence[Pose], anchor: Pose) -> list[Pose]:
    """Accumulate relative poses into absolute ones, starting from anchor.

    relative[i] maps frame i+1 into frame i; output[0] is the anchor and
    output has one more element than the input.
    """
    out = [anchor]
    for rel in relative:
        out.append(out[-1].compose(rel))
    return out


def transform_points(cloud: PointCloud, pose: Pose) -> PointCloud:
    """Apply a rigid transform to every point; colors pass through."""
    return PointCloud(pose.apply(cloud.points), cloud.colors)


def axis_angle_matrix(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix for a rotation of angle_rad about a (non-zero) axis."""
    a = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("axis must be non-zero")
    x, y, z = a / n
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


def rotation_angle_deg(rotation: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix in degrees."""
    tr = float(np.trace(np.asarray(rotation, dtype=float)))
    c = min(1.0, max(-1.0, 0.5 * (tr - 1.0)))
    return math.degrees(math.acos(c))


def rotation_is_proper(rotation: np.ndarray, tol: float = 1e-9) -> bool:
    """True when R^T R = I and det(R) = +1 within tol."""
    r = np.asarray(rotation, dtype=float)
    return (np.abs(r.T @ r - np.eye(3)).max() <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol)
