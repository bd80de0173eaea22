"""End-to-end orchestration: support sets, per-view estimation with best-of-K
selection, batch evaluation with CSV reports, and video-based registration.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .attention import AttentionWeights, enhance
from .errors import (
    DatasetFormatError,
    EmptyQuery,
    InsufficientCorrespondences,
    NoConsensus,
    NotEnoughFrames,
    PoseEstimationFailed,
    RegistrationDiverged,
    TooFewFrames,
)
from .geom import (
    CorrespondenceSet,
    IcpParams,
    PointCloud,
    Pose,
    Quaternion,
    RansacParams,
    chain_poses,
    farthest_rotation_sample,
    icp_refine,
    nearest_neighbor_residual,
    ransac_align,
)
from .matching import extract_matches, save_assignment, score_matrix, sinkhorn
from .rgbd import RgbdPatch, backproject, crop_patch, extract_toy_features, farthest_point_sample
from .synth import load_scene

# A matcher consumes (support view, query) and returns correspondences from
# object-frame points to query camera-frame points.
Matcher = Callable[[RgbdPatch, RgbdPatch], CorrespondenceSet]


@dataclass
class EvalConfig:
    """All tunables of the estimation and evaluation pipeline."""

    seed: int = 0
    support_k: int = 16
    patch_size: int = 255
    n_points: int = 512
    descriptor_dim: int = 32  # 8 color channels + 24 shape histogram bins
    color_window: int = 7
    k_neighbors: int = 16
    weights_seed: int = 0
    weights_path: Optional[str] = None
    temperature: float = 0.05
    sinkhorn_iterations: int = 50
    use_dustbin: bool = True
    dustbin_score: float = 0.0
    match_threshold: float = 0.2
    ransac_iterations: int = 512
    ransac_inlier_threshold: float = 0.01
    ransac_min_inliers: Optional[int] = None
    use_icp: bool = False
    icp_max_iterations: int = 30
    icp_convergence_eps: float = 1e-6
    icp_max_corr_dist: float = 0.02
    auc_max_threshold: float = 0.1
    auc_step: float = 0.001
    recall_fraction: float = 0.1
    crop_padding: int = 6
    baseline_samples: int = 1000
    # assignment matrices are not persisted by default (size); set a directory
    # to dump them per support view as dense .npy files
    dump_assignments_dir: Optional[str] = None

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "EvalConfig":
        known = {f: data[f] for f in data if f in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**known)

    @classmethod
    def from_json_file(cls, path) -> "EvalConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def ransac_params(self) -> RansacParams:
        return RansacParams(self.ransac_iterations, self.ransac_inlier_threshold,
                            self.ransac_min_inliers, self.seed)

    def icp_params(self) -> IcpParams:
        return IcpParams(self.icp_max_iterations, self.icp_convergence_eps,
                         self.icp_max_corr_dist)

    def attention_weights(self) -> AttentionWeights:
        if self.weights_path:
            return AttentionWeights.load(self.weights_path)
        return AttentionWeights.random(self.descriptor_dim, self.weights_seed)


@dataclass
class SupportSet:
    """Labeled support views of one object plus its reference cloud.

    The object coordinate frame is the one the view poses are expressed in;
    object_cloud holds the first view's back-projected points mapped into it.
    """

    object_id: str
    views: list[RgbdPatch]
    object_cloud: PointCloud
    _features: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.views:
            raise ValueError("support set needs at least one view")
        if any(v.pose is None for v in self.views):
            raise ValueError("every support view needs a pose")

    def view_features(self, config: EvalConfig, index: int):
        key = (index, config.n_points, config.seed, config.patch_size,
               config.color_window, config.k_neighbors)
        if key not in self._features:
            self._features[key] = extract_toy_features(
                self.views[index], config.n_points, config.seed,
                patch_size=config.patch_size, color_window=config.color_window,
                k_neighbors=config.k_neighbors)
        return self._features[key]


def make_support_set(object_id: str, views: Sequence[RgbdPatch]) -> SupportSet:
    """Build a SupportSet; the first view defines the reference object cloud."""
    views = list(views)
    if not views:
        raise ValueError("need at least one view")
    if any(v.pose is None for v in views):
        raise ValueError("every support view needs a pose")
    first = views[0]
    cloud, _ = backproject(first)
    object_cloud = PointCloud(first.pose.invert().apply(cloud.points), cloud.colors)
    return SupportSet(object_id, views, object_cloud)


@dataclass(frozen=True)
class EstimateResult:
    pose: Pose
    chosen_view: int
    per_view_losses: np.ndarray  # m^2 mean inlier residual, inf for failed views
    match_counts: np.ndarray
    refined: bool


def oracle_correspondences(query: RgbdPatch, n: int = 256, seed: int = 0) -> CorrespondenceSet:
    """Exact correspondences from a pose-labeled query, bypassing matching.

    Samples query-cloud points and maps them into the object frame with the
    query's own ground-truth pose; useful as an estimation-stage ablation.
    """
    if query.pose is None:
        raise ValueError("oracle correspondences need a pose-labeled query")
    cloud, _ = backproject(query)
    if len(cloud) == 0:
        raise EmptyQuery("query has no valid masked pixels")
    rng = np.random.default_rng(seed)
    n_sel = min(n, len(cloud))
    idx = farthest_point_sample(cloud, n_sel, int(rng.integers(len(cloud))))
    q_cam = cloud.points[idx]
    p_obj = query.pose.invert().apply(q_cam)
    return CorrespondenceSet(p_obj, q_cam)


def oracle_matcher(n: int = 256, seed: int = 0) -> Matcher:
    return lambda view, query: oracle_correspondences(query, n, seed)


def estimate_pose(support: SupportSet, query: RgbdPatch,
                  config: Optional[EvalConfig] = None,
                  matcher: Optional[Matcher] = None) -> EstimateResult:
    """Best-of-K pose estimation against every support view.

    Per view: dense features, attention enhancement, scored Sinkhorn
    assignment, mutual-argmax matches, then robust alignment of object-frame
    prototype points to query points. The candidate with the smallest mean
    squared inlier residual wins; optional ICP refinement runs afterwards.
    A custom matcher replaces the feature/matching stages per view.
    """
    config = config or EvalConfig()
    if not query.mask.any():
        raise EmptyQuery("query mask selects no pixels")
    k = len(support.views)
    losses = np.full(k, np.inf)
    counts = np.zeros(k, dtype=int)
    candidates: list[Optional[Pose]] = [None] * k
    weights = None if matcher is not None else config.attention_weights()
    query_feat = None
    for vi, view in enumerate(support.views):
        if matcher is not None:
            corr = matcher(view, query)
            counts[vi] = len(corr)
        else:
            if query_feat is None:
                query_feat = extract_toy_features(
                    query, config.n_points, config.seed,
                    patch_size=config.patch_size,
                    color_window=config.color_window,
                    k_neighbors=config.k_neighbors)
            view_feat = support.view_features(config, vi)
            protos, enhanced_query = enhance(view_feat, query_feat, weights)
            scores = score_matrix(protos, enhanced_query, config.temperature)
            assignment = sinkhorn(scores, config.sinkhorn_iterations,
                                  config.use_dustbin, config.dustbin_score)
            if config.dump_assignments_dir:
                dump_dir = Path(config.dump_assignments_dir)
                dump_dir.mkdir(parents=True, exist_ok=True)
                save_assignment(dump_dir / f"view_{vi:02d}.npy", assignment)
            matches = extract_matches(assignment, config.match_threshold,
                                      has_dustbin=config.use_dustbin)
            counts[vi] = len(matches)
            if len(matches) < 3:
                continue
            p_obj = view.pose.invert().apply(view_feat.points[matches.prototype_indices])
            q_cam = query_feat.points[matches.query_indices]
            corr = CorrespondenceSet(p_obj, q_cam, matches.confidences)
        try:
            result = ransac_align(corr, config.ransac_params())
        except (NoConsensus, InsufficientCorrespondences):
            continue
        losses[vi] = result.residual
        candidates[vi] = result.pose

    if not np.isfinite(losses).any():
        raise PoseEstimationFailed("no support view produced a consensus pose")
    chosen = int(np.argmin(losses))
    pose = candidates[chosen]
    refined = False
    if config.use_icp:
        query_cloud, _ = backproject(query)
        pose = icp_refine(support.object_cloud, query_cloud, pose, config.icp_params())
        refined = True
    return EstimateResult(pose, chosen, losses, counts, refined)


# --- dataset access ---

def load_dataset_index(dataset_dir) -> dict:
    path = Path(dataset_dir) / "dataset.json"
    if not path.exists():
        raise DatasetFormatError(f"missing {path}")
    index = json.loads(path.read_text())
    for key in ("objects", "scenes", "support_scenes", "query_scenes"):
        if key not in index:
            raise DatasetFormatError(f"dataset.json missing key {key!r}")
    return index


def load_object_model(dataset_dir, object_id: str) -> metrics.ObjectModel:
    path = Path(dataset_dir) / "objects" / object_id / "model.json"
    if not path.exists():
        raise DatasetFormatError(f"missing {path}")
    return metrics.ObjectModel.from_json_dict(json.loads(path.read_text()))


def _require(path: Path) -> Path:
    if not path.exists():
        raise DatasetFormatError(f"missing {path}")
    return path


def load_frame_patch(dataset_dir, scene_id: str, object_id: str,
                     padding: int = 6, pose: Optional[Pose] = None) -> RgbdPatch:
    """Object-centric crop of one scene frame, with its pose label.

    When pose is given it overrides the stored ground truth (used for
    video-registered support sets).
    """
    scene_dir = Path(dataset_dir) / "scenes" / scene_id
    if not scene_dir.exists():
        scene_dir = Path(dataset_dir) / scene_id
    for name in ("rgb.png", "depth.png", "intrinsics.json", "meta.json"):
        _require(scene_dir / name)
    _require(scene_dir / f"mask_{object_id}.png")
    patch, masks, poses = load_scene(scene_dir)
    if object_id not in masks:
        raise DatasetFormatError(f"object {object_id!r} not labeled in {scene_dir}")
    if pose is None:
        pose = poses.get(object_id)
    cropped = crop_patch(patch, masks[object_id], padding)
    return RgbdPatch(cropped.rgb, cropped.depth, cropped.mask,
                     cropped.intrinsics, pose)


def build_support_set(dataset_dir, object_id: str, k: int,
                      padding: int = 6) -> SupportSet:
    """Farthest-rotation selection of k support frames from the support split."""
    index = load_dataset_index(dataset_dir)
    if object_id not in index["support_scenes"]:
        raise DatasetFormatError(f"object {object_id!r} not in dataset")
    pool = index["support_scenes"][object_id]
    if len(pool) < k:
        raise NotEnoughFrames(f"{len(pool)} support frames < k={k}")
    poses = []
    for scene_id in pool:
        scene_dir = Path(dataset_dir) / "scenes" / scene_id
        gt = _require(scene_dir / f"gt_{object_id}.json")
        poses.append(Pose.from_json_dict(json.loads(gt.read_text())))
    quats = [p.rotation_quaternion() for p in poses]
    picked = farthest_rotation_sample(quats, k, start_index=0)
    views = [load_frame_patch(dataset_dir, pool[i], object_id, padding) for i in picked]
    return make_support_set(object_id, views)


# --- support manifest files (written by sample-views / register) ---

def save_support_manifest(path, object_id: str, source_dir, scene_ids: Sequence[str],
                          poses: Sequence[Pose]) -> None:
    payload = {
        "object_id": object_id,
        "source_dir": str(source_dir),
        "frames": [{"scene": sid, "pose": p.to_json_dict()}
                   for sid, p in zip(scene_ids, poses)],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def load_support_set_from_manifest(path, padding: int = 6) -> SupportSet:
    payload = json.loads(Path(path).read_text())
    object_id = payload["object_id"]
    source = payload["source_dir"]
    views = []
    for frame in payload["frames"]:
        pose = Pose.from_json_dict(frame["pose"])
        views.append(load_frame_patch(source, frame["scene"], object_id,
                                      padding, pose=pose))
    return make_support_set(object_id, views)


def sample_support_views(dataset_dir, object_id: str, k: int,
                         out_path=None) -> tuple[list[str], list[Pose]]:
    """Pick k support frames by farthest rotation and optionally write a manifest."""
    index = load_dataset_index(dataset_dir)
    if object_id not in index["support_scenes"]:
        raise DatasetFormatError(f"object {object_id!r} not in dataset")
    pool = index["support_scenes"][object_id]
    if len(pool) < k:
        raise NotEnoughFrames(f"{len(pool)} support frames < k={k}")
    poses = []
    for scene_id in pool:
        gt = _require(Path(dataset_dir) / "scenes" / scene_id / f"gt_{object_id}.json")
        poses.append(Pose.from_json_dict(json.loads(gt.read_text())))
    picked = farthest_rotation_sample([p.rotation_quaternion() for p in poses],
                                      k, start_index=0)
    scene_ids = [pool[i] for i in picked]
    picked_poses = [poses[i] for i in picked]
    if out_path is not None:
        save_support_manifest(out_path, object_id, dataset_dir, scene_ids, picked_poses)
    return scene_ids, picked_poses


# --- batch evaluation ---

def random_pose_baseline_recall(model: metrics.ObjectModel, gt_poses: Sequence[Pose],
                                n_samples: int = 1000, seed: int = 0,
                                fraction: float = 0.1) -> float:
    """Recall a random-pose guesser achieves: uniform rotation, translation
    jittered around the true one by up to one diameter per axis."""
    rng = np.random.default_rng(seed)
    threshold = fraction * model.diameter
    hits = 0
    for s in range(n_samples):
        gt = gt_poses[s % len(gt_poses)]
        guess = Pose(Quaternion.random(rng).as_matrix(),
                     gt.translation + rng.uniform(-model.diameter, model.diameter, 3))
        hits += metrics.add(model, guess, gt) < threshold
    return hits / n_samples


def run_eval(dataset_dir, support_k: int = 16, config: Optional[EvalConfig] = None,
             out_dir=None, oracle_pose: bool = False,
             matcher: Optional[Matcher] = None) -> dict:
    """Evaluate every object of a dataset over its query split.

    Per object: build a support set, estimate on each query frame, score ADD
    and ADDS, aggregate threshold AUCs and diameter recall, and compute the
    random-pose baseline recall. Failed estimations count as infinite error.
    Writes per_frame.csv, summary.csv and predicted poses when out_dir is set.
    """
    config = config or EvalConfig()
    index = load_dataset_index(dataset_dir)
    per_frame_rows = []
    summary_rows = []
    per_object = {}
    for obj_idx, object_id in enumerate(sorted(index["objects"])):
        model = load_object_model(dataset_dir, object_id)
        support = build_support_set(dataset_dir, object_id, support_k,
                                    config.crop_padding)
        query_ids = sorted(index["query_scenes"][object_id])
        if not query_ids:
            raise DatasetFormatError(f"object {object_id!r} has no query frames")
        add_errors, adds_errors, gt_poses = [], [], []
        predictions = {}
        for scene_id in query_ids:
            query = load_frame_patch(dataset_dir, scene_id, object_id,
                                     config.crop_padding)
            gt = query.pose
            gt_poses.append(gt)
            if oracle_pose:
                pred = gt
            else:
                try:
                    pred = estimate_pose(support, query, config, matcher).pose
                except PoseEstimationFailed:
                    pred = None
            predictions[scene_id] = pred
            e_add = metrics.add(model, pred, gt) if pred is not None else math.inf
            e_adds = metrics.adds(model, pred, gt) if pred is not None else math.inf
            add_errors.append(e_add)
            adds_errors.append(e_adds)
            per_frame_rows.append({"object_id": object_id, "frame_id": scene_id,
                                   "metric_kind": "ADD", "error_m": repr(e_add)})
            per_frame_rows.append({"object_id": object_id, "frame_id": scene_id,
                                   "metric_kind": "ADDS", "error_m": repr(e_adds)})
        add_auc = metrics.auc(add_errors, config.auc_max_threshold, config.auc_step)
        adds_auc = metrics.auc(adds_errors, config.auc_max_threshold, config.auc_step)
        recall = metrics.add_recall_at(add_errors, model.diameter, config.recall_fraction)
        baseline = random_pose_baseline_recall(model, gt_poses,
                                               config.baseline_samples,
                                               seed=config.seed + obj_idx,
                                               fraction=config.recall_fraction)
        summary_rows.append({"object_id": object_id,
                             "adds_auc": repr(adds_auc), "add_auc": repr(add_auc),
                             "add_recall_0p1d": repr(recall),
                             "baseline_recall_0p1d": repr(baseline)})
        per_object[object_id] = {
            "add": metrics.MetricReport("ADD", np.asarray(add_errors), add_auc, recall),
            "adds": metrics.MetricReport(
                "ADDS", np.asarray(adds_errors), adds_auc,
                metrics.add_recall_at(adds_errors, model.diameter, config.recall_fraction)),
            "baseline_recall_0p1d": baseline,
            "predictions": predictions,
        }
    result = {"per_object": per_object, "summary_rows": summary_rows,
              "per_frame_rows": per_frame_rows}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_per_frame_csv(out / "per_frame.csv", per_frame_rows)
        metrics.write_summary_csv(out / "summary.csv", summary_rows)
        for object_id, data in per_object.items():
            pose_dir = out / "poses" / object_id
            pose_dir.mkdir(parents=True, exist_ok=True)
            for scene_id, pred in data["predictions"].items():
                payload = pred.to_json_dict() if pred is not None else None
                (pose_dir / f"{scene_id}.json").write_text(json.dumps(payload))
        result["per_frame_csv"] = str(out / "per_frame.csv")
        result["summary_csv"] = str(out / "summary.csv")
    return result


# --- video registration ---

@dataclass(frozen=True)
class RegistrationParams:
    k: int = 16
    icp: IcpParams = field(default_factory=lambda: IcpParams(
        max_iterations=60, convergence_eps=1e-12, max_corr_dist=0.03))
    # tightening point-to-plane polish stages after the point-to-point pass
    plane_gates: tuple[float, ...] = (0.008, 0.004, 0.002)
    plane_normal_neighbors: int = 12
    plane_point_weight: float = 0.1
    max_residual: float = 1e-4  # m^2 gate on adjacent-frame residual
    use_plane_removal: bool = False
    plane_distance: float = 0.008
    subsample: int = 30000


def remove_dominant_plane(cloud: PointCloud, distance: float = 0.008) -> PointCloud:
    """Drop points near the least-squares dominant plane of the cloud.

    Two-pass total least squares: fit on everything, refit on the points close
    to the first plane, then keep whatever is farther than the threshold.
    """
    pts = cloud.points

    def plane(points: np.ndarray):
        centroid = points.mean(axis=0)
        centered = points - centroid
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        return centroid, vt[2]

    centroid, normal = plane(pts)
    d = np.abs((pts - centroid) @ normal)
    near = d < max(distance * 3, 1e-6)
    if near.sum() >= 3:
        centroid, normal = plane(pts[near])
        d = np.abs((pts - centroid) @ normal)
    keep = d > distance
    colors = cloud.colors[keep] if cloud.colors is not None else None
    return PointCloud(pts[keep], colors)


def _object_cloud(frame: RgbdPatch, params: RegistrationParams) -> PointCloud:
    if params.use_plane_removal:
        full = RgbdPatch(frame.rgb, frame.depth, frame.depth > 0,
                         frame.intrinsics, frame.pose)
        cloud, _ = backproject(full)
        cloud = remove_dominant_plane(cloud, params.plane_distance)
    else:
        cloud, _ = backproject(frame)
    if len(cloud) > params.subsample:
        idx = farthest_point_sample(cloud, params.subsample, 0)
        colors = cloud.colors[idx] if cloud.colors is not None else None
        cloud = PointCloud(cloud.points[idx], colors)
    return cloud


def _icp_plane_refine(src: PointCloud, dst_points: np.ndarray,
                      dst_normals: np.ndarray, dst_tree, init: Pose,
                      gate: float, point_weight: float,
                      max_iterations: int = 80) -> Pose:
    """Point-to-plane polish of a converged point-to-point alignment.

    Point-to-point NN on pixel-grid depth clouds locks the sampling lattices
    onto each other, biasing small relative motions; scoring distance to the
    target's tangent planes removes that bias. Weak point-to-point rows
    (point_weight) anchor directions the visible planes leave unconstrained.
    """
    pose = init
    for _ in range(max_iterations):
        moved = pose.apply(src.points)
        dist, j = dst_tree.query(moved, distance_upper_bound=gate)
        ok = np.isfinite(dist)
        if ok.sum() < 12:
            break
        p = moved[ok]
        q = dst_points[j[ok]]
        n = dst_normals[j[ok]]
        residual = np.einsum("ij,ij->i", p - q, n)
        lhs = np.hstack([np.cross(p, n), n])
        rhs = -residual
        if point_weight > 0:
            diff = p - q
            eye = np.eye(3)
            for axis in range(3):
                rows_n = np.tile(eye[axis] * point_weight, (len(p), 1))
                lhs = np.vstack([lhs, np.hstack([np.cross(p, rows_n), rows_n])])
                rhs = np.concatenate([rhs, -point_weight * diff[:, axis]])
        x, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        w, t = x[:3], x[3:]
        angle = float(np.linalg.norm(w))
        if angle < 1e-15:
            rot = np.eye(3)
        else:
            axis = w / angle
            k = np.array([[0.0, -axis[2], axis[1]],
                          [axis[2], 0.0, -axis[0]],
                          [-axis[1], axis[0], 0.0]])
            rot = np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)
        pose = Pose(rot @ pose.rotation, rot @ pose.translation + t)
        if angle < 1e-11 and np.linalg.norm(t) < 1e-13:
            break
    return pose


def estimate_video_trajectory(frames: Sequence[RgbdPatch],
                              params: Optional[RegistrationParams] = None
                              ) -> list[Pose]:
    """Chained camera trajectory of an object video.

    Adjacent frames are registered from identity (small motion assumed) with
    point-to-point ICP followed by tightening point-to-plane polish stages;
    relative poses are chained from frame 0. Output[i] maps frame-i camera
    coordinates into frame-0 camera coordinates.
    """
    from scipy.spatial import cKDTree

    from .rgbd import _pca_normals

    params = params or RegistrationParams()
    if len(frames) < 2:
        raise TooFewFrames(f"need >= 2 frames, got {len(frames)}")
    clouds = [_object_cloud(f, params) for f in frames]
    k_norm = params.plane_normal_neighbors
    relatives = []
    prev_normals = prev_tree = None
    for i in range(1, len(frames)):
        dst = clouds[i - 1]
        if prev_tree is None:
            prev_normals = _pca_normals(dst.points, min(k_norm, len(dst) - 1))
            prev_tree = cKDTree(dst.points)
        rel = icp_refine(clouds[i], dst, Pose.identity(), params.icp)
        for gate in params.plane_gates:
            rel = _icp_plane_refine(clouds[i], dst.points, prev_normals,
                                    prev_tree, rel, gate,
                                    params.plane_point_weight)
        res = nearest_neighbor_residual(clouds[i], dst, rel,
                                        params.icp.max_corr_dist)
        if res > params.max_residual:
            raise RegistrationDiverged(
                f"frame {i}: residual {res:.3e} above {params.max_residual:.3e}")
        relatives.append(rel)
        src = clouds[i]
        prev_normals = _pca_normals(src.points, min(k_norm, len(src) - 1))
        prev_tree = cKDTree(src.points)
    return chain_poses(relatives, Pose.identity())


def register_from_video(frames: Sequence[RgbdPatch],
                        params: Optional[RegistrationParams] = None) -> SupportSet:
    """Turn an unlabeled object video into a support set.

    The object frame is frame 0's camera frame. Per-frame poses come from
    chained adjacent ICP; the k most rotation-diverse frames are selected.
    """
    params = params or RegistrationParams()
    trajectory = estimate_video_trajectory(frames, params)
    cam_poses = [t.invert() for t in trajectory]
    quats = [p.rotation_quaternion() for p in cam_poses]
    k = min(params.k, len(frames))
    picked = farthest_rotation_sample(quats, k, start_index=0)
    views = []
    for i in picked:
        f = frames[i]
        views.append(RgbdPatch(f.rgb, f.depth, f.mask, f.intrinsics, cam_poses[i]))
    return make_support_set("video", views)


def register_video_dir(video_dir, k: int = 16,
                       params: Optional[RegistrationParams] = None,
                       out_path=None) -> tuple[str, list[str], list[Pose]]:
    """Register a saved frame directory; optionally write a support manifest."""
    params = params or RegistrationParams()
    params = replace(params, k=k)
    root = Path(video_dir)
    scene_root = root / "scenes" if (root / "scenes").exists() else root
    scene_dirs = sorted(p for p in scene_root.iterdir()
                        if p.is_dir() and p.name.startswith("scene_"))
    if not scene_dirs:
        raise DatasetFormatError(f"no scene_* directories under {video_dir}")
    metas = [json.loads(_require(d / "meta.json").read_text()) for d in scene_dirs]
    object_id = metas[0]["objects"][0]
    frames = []
    for d in scene_dirs:
        patch, masks, _ = load_scene(d)
        frames.append(RgbdPatch(patch.rgb, patch.depth, masks[object_id],
                                patch.intrinsics))
    trajectory = estimate_video_trajectory(frames, params)
    cam_poses = [t.invert() for t in trajectory]
    picked = farthest_rotation_sample([p.rotation_quaternion() for p in cam_poses],
                                      min(k, len(frames)), start_index=0)
    scene_ids = [scene_dirs[i].name for i in picked]
    poses = [cam_poses[i] for i in picked]
    if out_path is not None:
        source = scene_root.parent if scene_root.name == "scenes" else scene_root
        save_support_manifest(out_path, object_id, source, scene_ids, poses)
    return object_id, scene_ids, poses
