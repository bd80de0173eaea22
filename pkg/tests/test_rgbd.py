import math

import numpy as np
import pytest

import oracles
from rgbdpose.errors import BehindCamera, EmptyMask, InvalidN, TooFewPoints
from rgbdpose.geom import PointCloud, Pose, Quaternion, axis_angle_matrix
from rgbdpose.rgbd import (
    FeatureCloud,
    Intrinsics,
    RgbdPatch,
    backproject,
    crop_patch,
    estimate_normals,
    extract_toy_features,
    farthest_point_sample,
    geometry_histograms,
    project,
    read_depth_png,
    read_mask_png,
    read_rgb_png,
    resize_patch,
    write_depth_png,
    write_mask_png,
    write_rgb_png,
)

INTR = Intrinsics(fx=200.0, fy=210.0, cx=31.5, cy=23.5, width=64, height=48)


def flat_patch(depth_value=2.0, intr=INTR, pose=None):
    h, w = intr.height, intr.width
    rng = np.random.default_rng(0)
    rgb = rng.uniform(0, 1, size=(h, w, 3))
    depth = np.full((h, w), depth_value)
    mask = np.ones((h, w), dtype=bool)
    return RgbdPatch(rgb, depth, mask, intr, pose)


# --- intrinsics / patch ---

def test_intrinsics_validation():
    with pytest.raises(ValueError):
        Intrinsics(0.0, 1.0, 1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        Intrinsics(10.0, 10.0, 9.0, 1.0, 4, 4).validate_camera()
    # crops may shift the principal point outside the window
    Intrinsics(10.0, 10.0, 9.0, 1.0, 4, 4)


def test_read_intrinsics_validates_camera(tmp_path):
    import json
    bad = {"fx": 10.0, "fy": 10.0, "cx": 99.0, "cy": 1.0, "width": 4, "height": 4}
    (tmp_path / "intr.json").write_text(json.dumps(bad))
    from rgbdpose.rgbd import read_intrinsics_json
    with pytest.raises(ValueError):
        read_intrinsics_json(tmp_path / "intr.json")


def test_patch_mask_restricted_to_valid_depth():
    depth = np.zeros((48, 64))
    depth[10, 20] = 1.0
    patch = RgbdPatch(np.zeros((48, 64, 3)), depth, np.ones((48, 64), bool), INTR)
    assert patch.mask.sum() == 1
    assert patch.mask[10, 20]


# --- backproject / project ---

def test_backproject_principal_point():
    intr = Intrinsics(100.0, 100.0, 32.0, 24.0, 64, 48)
    depth = np.zeros((48, 64))
    depth[24, 32] = 2.0  # pixel exactly at the principal point
    patch = RgbdPatch(np.zeros((48, 64, 3)), depth, np.ones((48, 64), bool), intr)
    cloud, pixels = backproject(patch)
    assert len(cloud) == 1
    assert np.allclose(cloud.points[0], [0.0, 0.0, 2.0])
    assert tuple(pixels[0]) == (24, 32)


def test_backproject_empty_on_zero_depth():
    patch = RgbdPatch(np.zeros((48, 64, 3)), np.zeros((48, 64)),
                      np.ones((48, 64), bool), INTR)
    cloud, pixels = backproject(patch)
    assert len(cloud) == 0
    assert pixels.shape == (0, 2)


def test_project_center_ray():
    u, v, z = project([0.0, 0.0, 1.0], INTR)
    assert (u, v, z) == (INTR.cx, INTR.cy, 1.0)


def test_project_behind_camera():
    with pytest.raises(BehindCamera):
        project([0.0, 0.0, 0.0], INTR)


def test_project_backproject_round_trip(rng):
    for _ in range(10):
        intr = Intrinsics(rng.uniform(50, 400), rng.uniform(50, 400),
                          rng.uniform(0, 63), rng.uniform(0, 47), 64, 48)
        n = 1000
        us = rng.uniform(0, intr.width - 1, n)
        vs = rng.uniform(0, intr.height - 1, n)
        zs = rng.uniform(0.1, 3.0, n)
        pts = np.stack([(us - intr.cx) * zs / intr.fx,
                        (vs - intr.cy) * zs / intr.fy, zs], axis=1)
        for i in range(0, n, 97):
            u2, v2, z2 = project(pts[i], intr)
            assert abs(u2 - us[i]) < 1e-9
            assert abs(v2 - vs[i]) < 1e-9
            assert abs(z2 - zs[i]) < 1e-12


def test_backproject_project_round_trip_on_patch(rng):
    patch = flat_patch(1.5)
    cloud, pixels = backproject(patch)
    idx = rng.integers(0, len(cloud), 50)
    for i in idx:
        u, v, _ = project(cloud.points[i], patch.intrinsics)
        assert abs(u - pixels[i, 1]) < 1e-9
        assert abs(v - pixels[i, 0]) < 1e-9


# --- farthest_point_sample ---

def test_fps_full_cloud(rng):
    pts = rng.normal(size=(10, 3))
    got = farthest_point_sample(pts, 10, 0)
    assert sorted(got.tolist()) == list(range(10))


def test_fps_two_points(rng):
    pts = rng.normal(size=(30, 3))
    got = farthest_point_sample(pts, 2, 0)
    assert got[0] == 0
    dists = np.linalg.norm(pts - pts[0], axis=1)
    assert got[1] == int(np.argmax(dists))


@pytest.mark.parametrize("n,k,start", [(64, 8, 0), (40, 17, 3), (16, 16, 7)])
def test_fps_matches_bruteforce(rng, n, k, start):
    pts = rng.normal(size=(n, 3))
    got = farthest_point_sample(pts, k, start).tolist()
    want = oracles.greedy_farthest(oracles.euclid_dist_matrix(pts), k, start)
    assert got == want


def test_fps_validation(rng):
    pts = rng.normal(size=(5, 3))
    with pytest.raises(InvalidN):
        farthest_point_sample(pts, 0, 0)
    with pytest.raises(InvalidN):
        farthest_point_sample(pts, 6, 0)


# --- estimate_normals ---

def test_normals_flat_plane_point_at_camera(rng):
    xs, ys = np.meshgrid(np.linspace(-0.1, 0.1, 12), np.linspace(-0.1, 0.1, 12))
    pts = np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, 1.0)], axis=1)
    normals = estimate_normals(PointCloud(pts), k_neighbors=8)
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9)
    assert np.allclose(normals, [0.0, 0.0, -1.0], atol=1e-9)


def test_normals_sphere_radial(rng):
    v = rng.normal(size=(3000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    center = np.array([0.0, 0.0, 2.0])
    pts = v * 0.1 + center
    normals = estimate_normals(PointCloud(pts), k_neighbors=12)
    radial = (pts - center) / 0.1
    cos = np.abs(np.einsum("ni,ni->n", normals, radial))
    # interior statistics: allow a few degenerate neighborhoods at the fringe
    assert np.degrees(np.arccos(np.clip(cos, -1, 1))).mean() < 5.0


def test_normals_too_few_points(rng):
    pts = rng.normal(size=(5, 3))
    with pytest.raises(TooFewPoints):
        estimate_normals(PointCloud(pts), k_neighbors=8)


# --- geometry histograms / toy features ---

def test_geometry_histograms_rigid_invariant(rng):
    pts = rng.uniform(-0.05, 0.05, size=(200, 3))
    base = geometry_histograms(pts, k_neighbors=12)
    pose = Pose(Quaternion.random(rng).as_matrix(), rng.normal(size=3))
    moved = geometry_histograms(pose.apply(pts), k_neighbors=12)
    assert np.abs(base - moved).max() < 1e-6


def test_extract_features_deterministic():
    patch = flat_patch(1.2)
    a = extract_toy_features(patch, n_points=64, seed=5, patch_size=64)
    b = extract_toy_features(patch, n_points=64, seed=5, patch_size=64)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.descriptors, b.descriptors)
    assert np.array_equal(a.source_pixels, b.source_pixels)


def test_extract_features_unit_norm_and_shape():
    patch = flat_patch(1.2)
    fc = extract_toy_features(patch, n_points=100, seed=0, patch_size=64)
    assert isinstance(fc, FeatureCloud)
    assert fc.descriptors.shape == (100, 32)
    assert np.allclose(np.linalg.norm(fc.descriptors, axis=1), 1.0, atol=1e-9)
    assert len(fc.points) == len(fc.source_pixels) == 100


def test_extract_features_empty_mask():
    patch = flat_patch(1.0)
    patch.mask[:] = False
    with pytest.raises(EmptyMask):
        extract_toy_features(patch)


def test_corresponding_descriptors_closer_than_random(rng):
    """Two renders of one textured object: matched points must look alike."""
    from rgbdpose.synth import SceneSpec, compose_scene, gen_procedural_mesh
    mesh = gen_procedural_mesh("composite", {"size": 0.12}, seed=3)
    intr = Intrinsics(220.0, 220.0, 63.5, 63.5, 128, 128)
    pose_a = Pose(np.eye(3), [0.0, 0.0, 0.5])
    pose_b = Pose(axis_angle_matrix([0.3, 1.0, 0.1], math.radians(18)),
                  [0.0, 0.0, 0.5])
    patches = []
    for pose in (pose_a, pose_b):
        patch, masks, _ = compose_scene(SceneSpec([(mesh, pose)], intr))
        patches.append(RgbdPatch(patch.rgb, patch.depth, masks[0], intr, pose))
    fa = extract_toy_features(patches[0], 256, seed=0, patch_size=128)
    fb = extract_toy_features(patches[1], 256, seed=0, patch_size=128)
    # ground-truth correspondence via object-frame proximity
    obj_a = pose_a.invert().apply(fa.points)
    obj_b = pose_b.invert().apply(fb.points)
    from scipy.spatial import cKDTree
    dist, j = cKDTree(obj_b).query(obj_a)
    close = dist < 0.004
    assert close.sum() > 30
    matched = np.linalg.norm(fa.descriptors[close] - fb.descriptors[j[close]], axis=1)
    random_pairs = np.linalg.norm(
        fa.descriptors[close] - fb.descriptors[rng.permutation(len(fb))[:close.sum()]],
        axis=1)
    assert matched.mean() < random_pairs.mean()


# --- resize / crop keep geometry consistent ---

def test_resize_stays_on_surface_within_half_pixel():
    patch = flat_patch(2.0)
    small = resize_patch(patch, 32, 24)
    cloud_small, _ = backproject(small)
    cloud_full, _ = backproject(patch)
    # depth is copied, rays move by at most half a source pixel
    assert np.allclose(cloud_small.points[:, 2], 2.0)
    from scipy.spatial import cKDTree
    d, _ = cKDTree(cloud_full.points).query(cloud_small.points)
    bound = 2.0 * 0.5 * math.hypot(1 / INTR.fx, 1 / INTR.fy)
    assert d.max() <= bound + 1e-12


def test_crop_preserves_points():
    patch = flat_patch(1.0)
    mask = np.zeros(patch.shape, dtype=bool)
    mask[10:30, 20:50] = True
    cropped = crop_patch(patch, mask, padding=2)
    cloud_crop, _ = backproject(cropped)
    full = RgbdPatch(patch.rgb, patch.depth, mask, patch.intrinsics)
    cloud_full, _ = backproject(full)
    assert np.allclose(np.sort(cloud_crop.points, axis=0),
                       np.sort(cloud_full.points, axis=0), atol=1e-12)


def test_crop_empty_mask_raises():
    patch = flat_patch(1.0)
    with pytest.raises(EmptyMask):
        crop_patch(patch, np.zeros(patch.shape, dtype=bool))


# --- PNG round trips ---

def test_rgb_png_round_trip(tmp_path, rng):
    rgb = rng.uniform(0, 1, size=(20, 30, 3))
    write_rgb_png(tmp_path / "rgb.png", rgb)
    again = read_rgb_png(tmp_path / "rgb.png")
    assert again.shape == rgb.shape
    assert np.abs(again - rgb).max() <= 0.5 / 255 + 1e-9


def test_depth_png_round_trip_millimeters(tmp_path, rng):
    depth = rng.uniform(0.1, 3.0, size=(20, 30))
    depth[0, 0] = 0.0
    write_depth_png(tmp_path / "depth.png", depth)
    again = read_depth_png(tmp_path / "depth.png")
    assert np.abs(again - depth).max() <= 0.0005 + 1e-12
    assert again[0, 0] == 0.0


def test_mask_png_round_trip(tmp_path, rng):
    mask = rng.uniform(size=(20, 30)) > 0.5
    write_mask_png(tmp_path / "mask.png", mask)
    assert np.array_equal(read_mask_png(tmp_path / "mask.png"), mask)
