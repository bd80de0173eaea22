"""Pydantic request/response models for the HTTP service.

The service operates on server-local paths: datasets, scene directories and
reports live on the host running the service.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..pipeline import EvalConfig


class PoseModel(BaseModel):
    rotation: list[float] = Field(..., min_length=9, max_length=9,
                                  description="row-major 3x3 rotation")
    translation: list[float] = Field(..., min_length=3, max_length=3)
    units: str = "m"


class ConfigModel(BaseModel):
    """Mirror of EvalConfig; every field optional, defaults applied server-side."""

    model_config = {"extra": "forbid"}

    seed: Optional[int] = None
    support_k: Optional[int] = None
    patch_size: Optional[int] = None
    n_points: Optional[int] = None
    descriptor_dim: Optional[int] = None
    color_window: Optional[int] = None
    k_neighbors: Optional[int] = None
    weights_seed: Optional[int] = None
    weights_path: Optional[str] = None
    temperature: Optional[float] = None
    sinkhorn_iterations: Optional[int] = None
    use_dustbin: Optional[bool] = None
    dustbin_score: Optional[float] = None
    match_threshold: Optional[float] = None
    ransac_iterations: Optional[int] = None
    ransac_inlier_threshold: Optional[float] = None
    ransac_min_inliers: Optional[int] = None
    use_icp: Optional[bool] = None
    icp_max_iterations: Optional[int] = None
    icp_convergence_eps: Optional[float] = None
    icp_max_corr_dist: Optional[float] = None
    auc_max_threshold: Optional[float] = None
    auc_step: Optional[float] = None
    recall_fraction: Optional[float] = None
    crop_padding: Optional[int] = None
    baseline_samples: Optional[int] = None
    dump_assignments_dir: Optional[str] = None

    def to_eval_config(self) -> EvalConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        base = EvalConfig().to_json_dict()
        base.update(overrides)
        # weights_path is None by default; an explicit null stays None
        return EvalConfig.from_json_dict(base)


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateScenesRequest(BaseModel):
    out_dir: str
    scenes: int = Field(..., ge=1)
    objects_per_scene: int = Field(1, ge=1)
    seed: int = 0
    textures_dir: Optional[str] = None
    image_size: int = 128
    support_fraction: float = 0.6


class GenerateScenesResponse(BaseModel):
    dataset_dir: str
    objects: list[str]
    scenes: list[str]


class SampleViewsRequest(BaseModel):
    dataset_dir: str
    object_id: str
    k: int = 16
    out_path: Optional[str] = None


class SampleViewsResponse(BaseModel):
    object_id: str
    scenes: list[str]
    poses: list[PoseModel]


class RegisterVideoRequest(BaseModel):
    video_dir: str
    k: int = 16
    plane_removal: bool = False
    out_path: Optional[str] = None


class EstimateRequest(BaseModel):
    support_path: str
    query_dir: str
    config: Optional[ConfigModel] = None
    icp: bool = False


class EstimateResponse(BaseModel):
    pose: PoseModel
    chosen_view: int
    per_view_losses: list[float]
    match_counts: list[int]
    refined: bool


class EvalRequest(BaseModel):
    dataset_dir: str
    k: int = 16
    config: Optional[ConfigModel] = None
    out_dir: Optional[str] = None
    oracle_pose: bool = False


class ObjectSummary(BaseModel):
    object_id: str
    adds_auc: float
    add_auc: float
    add_recall_0p1d: float
    baseline_recall_0p1d: float


class EvalResponse(BaseModel):
    summary: list[ObjectSummary]
    per_frame_csv: Optional[str] = None
    summary_csv: Optional[str] = None
