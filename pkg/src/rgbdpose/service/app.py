"""FastAPI application exposing the pose estimation core.

Error mapping: dataset problems -> 422, estimation failures -> 409.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    DatasetFormatError,
    NotEnoughFrames,
    PoseEstimationFailed,
    RegistrationDiverged,
    TooFewFrames,
)
from ..pipeline import (
    EvalConfig,
    RegistrationParams,
    estimate_pose,
    load_frame_patch,
    load_support_set_from_manifest,
    register_video_dir,
    run_eval,
    sample_support_views,
)
from ..synth import generate_dataset
from . import schemas


def _config_from(model: schemas.ConfigModel | None) -> EvalConfig:
    return model.to_eval_config() if model is not None else EvalConfig()


def create_app() -> FastAPI:
    app = FastAPI(title="rgbdpose", version=__version__)

    @app.exception_handler(DatasetFormatError)
    @app.exception_handler(NotEnoughFrames)
    async def _dataset_error(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(PoseEstimationFailed)
    @app.exception_handler(RegistrationDiverged)
    @app.exception_handler(TooFewFrames)
    async def _estimation_error(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/config/defaults")
    def config_defaults():
        return EvalConfig().to_json_dict()

    @app.post("/scenes/generate", response_model=schemas.GenerateScenesResponse)
    def scenes_generate(req: schemas.GenerateScenesRequest):
        index = generate_dataset(req.out_dir, req.scenes, req.objects_per_scene,
                                 req.seed, req.textures_dir, req.image_size,
                                 req.support_fraction)
        return schemas.GenerateScenesResponse(dataset_dir=req.out_dir,
                                              objects=index["objects"],
                                              scenes=index["scenes"])

    @app.post("/support/sample", response_model=schemas.SampleViewsResponse)
    def support_sample(req: schemas.SampleViewsRequest):
        scene_ids, poses = sample_support_views(req.dataset_dir, req.object_id,
                                                req.k, req.out_path)
        return schemas.SampleViewsResponse(
            object_id=req.object_id, scenes=scene_ids,
            poses=[schemas.PoseModel(**p.to_json_dict()) for p in poses])

    @app.post("/support/register", response_model=schemas.SampleViewsResponse)
    def support_register(req: schemas.RegisterVideoRequest):
        params = RegistrationParams(k=req.k, use_plane_removal=req.plane_removal)
        object_id, scene_ids, poses = register_video_dir(
            req.video_dir, req.k, params, req.out_path)
        return schemas.SampleViewsResponse(
            object_id=object_id, scenes=scene_ids,
            poses=[schemas.PoseModel(**p.to_json_dict()) for p in poses])

    @app.post("/pose/estimate", response_model=schemas.EstimateResponse)
    def pose_estimate(req: schemas.EstimateRequest):
        config = _config_from(req.config)
        if req.icp:
            config.use_icp = True
        if not Path(req.support_path).exists():
            raise HTTPException(status_code=422,
                                detail=f"missing support manifest {req.support_path}")
        support = load_support_set_from_manifest(req.support_path, config.crop_padding)
        query_dir = Path(req.query_dir)
        query = load_frame_patch(query_dir.parent, query_dir.name,
                                 support.object_id, config.crop_padding)
        result = estimate_pose(support, query, config)
        losses = [v if math.isfinite(v) else math.inf for v in result.per_view_losses]
        return schemas.EstimateResponse(
            pose=schemas.PoseModel(**result.pose.to_json_dict()),
            chosen_view=result.chosen_view,
            per_view_losses=losses,
            match_counts=[int(v) for v in result.match_counts],
            refined=result.refined)

    @app.post("/evaluate", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        config = _config_from(req.config)
        result = run_eval(req.dataset_dir, req.k, config, req.out_dir,
                          req.oracle_pose)
        summary = [schemas.ObjectSummary(
            object_id=row["object_id"],
            adds_auc=float(row["adds_auc"]),
            add_auc=float(row["add_auc"]),
            add_recall_0p1d=float(row["add_recall_0p1d"]),
            baseline_recall_0p1d=float(row["baseline_recall_0p1d"]))
            for row in result["summary_rows"]]
        return schemas.EvalResponse(summary=summary,
                                    per_frame_csv=result.get("per_frame_csv"),
                                    summary_csv=result.get("summary_csv"))

    return app
