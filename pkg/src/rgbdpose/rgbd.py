"""RGBD geometry: projection, sampling, normals, and handcrafted dense features.

Image layout is (row, col) = (v, u) with pixel centers at integer coordinates.
Depth maps store camera-frame z in meters; 0 marks invalid pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy.spatial import cKDTree

from .errors import (
    BehindCamera,
    EmptyMask,
    InvalidN,
    InvalidStartIndex,
    TooFewPoints,
)
from .geom import PointCloud, Pose


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera model: focal lengths and principal point in pixels.

    Crops shift the principal point, possibly outside the crop window, so the
    in-image bound is checked only on full camera models (validate_camera),
    not on every derived value.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("principal point must be finite")

    def validate_camera(self) -> "Intrinsics":
        """Full-frame sanity check: the principal point must be in the image."""
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")
        return self

    def to_json_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Intrinsics":
        return cls(float(data["fx"]), float(data["fy"]), float(data["cx"]),
                   float(data["cy"]), int(data["width"]), int(data["height"]))

    def scaled(self, width: int, height: int) -> "Intrinsics":
        """Intrinsics after resampling the image to width x height.

        Uses the half-pixel-center convention so that pixel-center rays are
        preserved under resize.
        """
        sx = width / self.width
        sy = height / self.height
        return Intrinsics(self.fx * sx, self.fy * sy,
                          (self.cx + 0.5) * sx - 0.5,
                          (self.cy + 0.5) * sy - 0.5, width, height)

    def shifted(self, col0: int, row0: int, width: int, height: int) -> "Intrinsics":
        """Intrinsics of a crop whose top-left pixel is (row0, col0)."""
        return Intrinsics(self.fx, self.fy, self.cx - col0, self.cy - row0,
                          width, height)


@dataclass
class RgbdPatch:
    """Color + depth + validity mask + camera model, optionally with a pose label."""

    rgb: np.ndarray      # (H, W, 3) in [0, 1]
    depth: np.ndarray    # (H, W) meters, 0 = invalid
    mask: np.ndarray     # (H, W) bool
    intrinsics: Intrinsics
    pose: Optional[Pose] = None  # ground truth, object -> camera

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=float)
        self.depth = np.asarray(self.depth, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        h, w = self.depth.shape
        if self.rgb.shape != (h, w, 3) or self.mask.shape != (h, w):
            raise ValueError("rgb, depth and mask shapes disagree")
        if (w, h) != (self.intrinsics.width, self.intrinsics.height):
            raise ValueError("image size disagrees with intrinsics")
        if np.any(self.depth < 0):
            raise ValueError("depth must be non-negative")
        self.mask = self.mask & (self.depth > 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape


@dataclass(frozen=True)
class FeatureCloud:
    """Sampled 3D points with descriptors and source-pixel provenance."""

    points: np.ndarray         # (N, 3) camera frame, meters
    descriptors: np.ndarray    # (N, d)
    source_pixels: np.ndarray  # (N, 2) int (row, col)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        desc = np.asarray(self.descriptors, dtype=float)
        px = np.asarray(self.source_pixels, dtype=int).reshape(-1, 2)
        if not (len(pts) == len(desc) == len(px)):
            raise ValueError("points, descriptors and pixels have different lengths")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "descriptors", desc)
        object.__setattr__(self, "source_pixels", px)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


def backproject(patch: RgbdPatch) -> tuple[PointCloud, np.ndarray]:
    """Lift every masked pixel with valid depth into the camera frame.

    Returns the cloud (with colors) and an (N, 2) array of (row, col)
    provenance in row-major scan order. Empty output is allowed.
    """
    intr = patch.intrinsics
    rows, cols = np.nonzero(patch.mask)
    z = patch.depth[rows, cols]
    x = (cols - intr.cx) * z / intr.fx
    y = (rows - intr.cy) * z / intr.fy
    pts = np.stack([x, y, z], axis=1)
    colors = patch.rgb[rows, cols]
    return PointCloud(pts, colors), np.stack([rows, cols], axis=1)


def project(point, intrinsics: Intrinsics) -> tuple[float, float, float]:
    """Pinhole projection of a camera-frame point to (u, v, depth)."""
    x, y, z = np.asarray(point, dtype=float).reshape(3)
    if z <= 0:
        raise BehindCamera(f"z={z} is not in front of the camera")
    return (intrinsics.fx * x / z + intrinsics.cx,
            intrinsics.fy * y / z + intrinsics.cy, z)


def farthest_point_sample(cloud, n: int, start_index: int = 0) -> np.ndarray:
    """Greedy max-min Euclidean subsampling; ties go to the lowest index."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    total = len(pts)
    if not 1 <= n <= total:
        raise InvalidN(f"n={n} outside [1, {total}]")
    if not 0 <= start_index < total:
        raise InvalidStartIndex(f"start_index={start_index} outside [0, {total})")
    selected = np.empty(n, dtype=int)
    selected[0] = start_index
    min_d = np.linalg.norm(pts - pts[start_index], axis=1)
    min_d[start_index] = -np.inf
    for i in range(1, n):
        nxt = int(np.argmax(min_d))
        selected[i] = nxt
        min_d = np.minimum(min_d, np.linalg.norm(pts - pts[nxt], axis=1))
        min_d[nxt] = -np.inf
    return selected


def _pca_normals(pts: np.ndarray, k: int) -> np.ndarray:
    """Unoriented per-point PCA plane normals over k nearest neighbors."""
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k + 1)
    nbrs = pts[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def estimate_normals(cloud: PointCloud, k_neighbors: int = 16) -> np.ndarray:
    """Unit normals from k-NN plane fits, oriented toward the camera origin."""
    pts = cloud.points
    if k_neighbors < 3 or len(pts) <= k_neighbors:
        raise TooFewPoints(f"need more than {k_neighbors} points, got {len(pts)}")
    normals = _pca_normals(pts, k_neighbors)
    flip = np.einsum("ni,ni->n", normals, pts) > 0
    normals[flip] *= -1.0
    return normals


def _soft_histogram01(values: np.ndarray, valid: np.ndarray, bins: int) -> np.ndarray:
    """Row-wise soft (linearly interpolated) histograms of values in [0, 1].

    Soft binning keeps the histogram Lipschitz in its inputs, so descriptors
    stay stable under floating-point jitter of rigid transforms.
    """
    n, k = values.shape
    x = np.clip(values, 0.0, 1.0) * (bins - 1)
    lo = np.floor(x).astype(int)
    hi = np.minimum(lo + 1, bins - 1)
    w_hi = (x - lo) * valid
    w_lo = (1.0 - (x - lo)) * valid
    rows = np.repeat(np.arange(n), k)
    hist = np.zeros((n, bins))
    np.add.at(hist, (rows, lo.reshape(-1)), w_lo.reshape(-1))
    np.add.at(hist, (rows, hi.reshape(-1)), w_hi.reshape(-1))
    counts = valid.sum(axis=1, keepdims=True)
    counts[counts == 0] = 1.0
    return hist / counts


def geometry_histograms(points: np.ndarray, k_neighbors: int = 16,
                        bins: int = 8) -> np.ndarray:
    """Rotation-invariant local shape descriptor: three soft histograms per point.

    Channels: |cos| between the point normal and neighbor displacement
    directions, |cos| between neighbor normals, and neighbor distances
    normalized by the farthest neighbor. All three are invariant under a
    global rigid transform of the cloud.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    out = np.zeros((n, 3 * bins))
    k = min(k_neighbors, n - 1)
    if k < 3:
        return out
    normals = _pca_normals(pts, k)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k + 1)
    nbr = idx[:, 1:]
    disp = pts[nbr] - pts[:, None, :]
    dist = np.linalg.norm(disp, axis=2)
    valid = dist > 1e-12
    safe = np.where(valid, dist, 1.0)
    unit = disp / safe[:, :, None]
    cos_nd = np.abs(np.einsum("nkj,nj->nk", unit, normals))
    cos_nn = np.abs(np.einsum("nkj,nj->nk", normals[nbr], normals))
    max_d = dist.max(axis=1, keepdims=True)
    max_d[max_d == 0] = 1.0
    rel_d = dist / max_d
    out[:, :bins] = _soft_histogram01(cos_nd, valid, bins)
    out[:, bins:2 * bins] = _soft_histogram01(cos_nn, valid, bins)
    out[:, 2 * bins:] = _soft_histogram01(rel_d, valid, bins)
    return out


def _color_channels(patch: RgbdPatch, pixels: np.ndarray, window: int) -> np.ndarray:
    """Per-pixel color statistics: rgb, window mean rgb, luminance std and range."""
    h, w = patch.shape
    half = window // 2
    rows = pixels[:, 0]
    cols = pixels[:, 1]
    offs = np.arange(-half, half + 1)
    rr = np.clip(rows[:, None, None] + offs[None, :, None], 0, h - 1)
    cc = np.clip(cols[:, None, None] + offs[None, None, :], 0, w - 1)
    win = patch.rgb[rr, cc]                      # (N, window, window, 3)
    win = win.reshape(len(pixels), -1, 3)
    luma = win.mean(axis=2)
    center = patch.rgb[rows, cols]
    return np.concatenate([
        center,
        win.mean(axis=1),
        luma.std(axis=1, keepdims=True),
        (luma.max(axis=1) - luma.min(axis=1))[:, None],
    ], axis=1)


def resize_patch(patch: RgbdPatch, width: int, height: int) -> RgbdPatch:
    """Nearest-neighbor resize of all channels with rescaled intrinsics.

    Depth values are copied, never rescaled: depth is metric and resizing
    only changes which pixel grid samples the surface.
    """
    h, w = patch.shape
    src_r = np.clip(np.round((np.arange(height) + 0.5) * h / height - 0.5).astype(int), 0, h - 1)
    src_c = np.clip(np.round((np.arange(width) + 0.5) * w / width - 0.5).astype(int), 0, w - 1)
    rr, cc = np.meshgrid(src_r, src_c, indexing="ij")
    return RgbdPatch(patch.rgb[rr, cc], patch.depth[rr, cc], patch.mask[rr, cc],
                     patch.intrinsics.scaled(width, height), patch.pose)


def crop_patch(patch: RgbdPatch, mask: Optional[np.ndarray] = None,
               padding: int = 0) -> RgbdPatch:
    """Crop to the bounding box of mask (default: the patch's own mask).

    The crop keeps metric geometry intact by shifting the principal point.
    """
    m = patch.mask if mask is None else (np.asarray(mask, dtype=bool) & (patch.depth > 0))
    if not m.any():
        raise EmptyMask("cannot crop an empty mask")
    rows, cols = np.nonzero(m)
    h, w = patch.shape
    r0 = max(int(rows.min()) - padding, 0)
    r1 = min(int(rows.max()) + padding + 1, h)
    c0 = max(int(cols.min()) - padding, 0)
    c1 = min(int(cols.max()) + padding + 1, w)
    return RgbdPatch(patch.rgb[r0:r1, c0:c1], patch.depth[r0:r1, c0:c1],
                     m[r0:r1, c0:c1],
                     patch.intrinsics.shifted(c0, r0, c1 - c0, r1 - r0),
                     patch.pose)


def extract_toy_features(patch: RgbdPatch, n_points: int = 512, seed: int = 0, *,
                         patch_size: int = 255, color_window: int = 7,
                         k_neighbors: int = 16, bins: int = 8) -> FeatureCloud:
    """Handcrafted dense RGBD descriptors on a farthest-point-sampled cloud.

    The patch is resampled to patch_size x patch_size, back-projected, and
    subsampled to at most n_points. Each descriptor concatenates 8 color
    statistics with 3 * bins rotation-invariant shape histogram channels,
    is centered by the cloud's mean descriptor (raw channels share a large
    common component that would crowd every descriptor into a narrow cone),
    and is L2-normalized. Deterministic for a fixed (patch, seed).
    """
    if not patch.mask.any():
        raise EmptyMask("patch mask selects no pixels")
    work = patch
    if patch.shape != (patch_size, patch_size):
        work = resize_patch(patch, patch_size, patch_size)
        if not work.mask.any():
            raise EmptyMask("mask vanished under resize")
    cloud, pixels = backproject(work)
    n_sel = min(n_points, len(cloud))
    rng = np.random.default_rng(seed)
    start = int(rng.integers(len(cloud)))
    order = farthest_point_sample(cloud, n_sel, start)
    pts = cloud.points[order]
    px = pixels[order]
    color = _color_channels(work, px, color_window)
    shape = geometry_histograms(pts, k_neighbors, bins)
    desc = np.concatenate([color, shape], axis=1)
    if len(desc) > 1:
        desc = desc - desc.mean(axis=0)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return FeatureCloud(pts, desc / norms, px)


# --- image and JSON I/O (RGB 8-bit PNG, depth 16-bit millimeter PNG, mask 0/255) ---

def write_rgb_png(path, rgb: np.ndarray) -> None:
    arr = (np.clip(np.asarray(rgb, dtype=float), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(Path(path))


def read_rgb_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(Path(path)).convert("RGB"), dtype=np.uint8)
    return arr.astype(float) / 255.0


def write_depth_png(path, depth_m: np.ndarray) -> None:
    mm = np.clip(np.round(np.asarray(depth_m, dtype=float) * 1000.0), 0, 65535)
    Image.fromarray(mm.astype(np.uint16)).save(Path(path))


def read_depth_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(Path(path)), dtype=np.float64)
    return arr / 1000.0


def write_mask_png(path, mask: np.ndarray) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path))


def read_mask_png(path) -> np.ndarray:
    return np.asarray(Image.open(Path(path)), dtype=np.uint8) > 127


def write_intrinsics_json(path, intrinsics: Intrinsics) -> None:
    Path(path).write_text(json.dumps(intrinsics.to_json_dict(), indent=2))


def read_intrinsics_json(path) -> Intrinsics:
    return Intrinsics.from_json_dict(json.loads(Path(path).read_text())).validate_camera()
