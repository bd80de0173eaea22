"""Command-line interface: a thin client over the library core.

Exit codes: 0 success, 2 dataset error, 3 estimation/registration failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .errors import (
    DatasetFormatError,
    NotEnoughFrames,
    PoseEstimationFailed,
    RegistrationDiverged,
    TooFewFrames,
)
from .pipeline import (
    EvalConfig,
    RegistrationParams,
    estimate_pose,
    load_frame_patch,
    load_support_set_from_manifest,
    register_video_dir,
    run_eval,
    sample_support_views,
)
from .synth import generate_dataset, generate_turntable

EXIT_DATASET_ERROR = 2
EXIT_ESTIMATION_ERROR = 3


def _mapped_exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DatasetFormatError, NotEnoughFrames) as exc:
            click.echo(f"dataset error: {exc}", err=True)
            sys.exit(EXIT_DATASET_ERROR)
        except (PoseEstimationFailed, RegistrationDiverged, TooFewFrames) as exc:
            click.echo(f"estimation error: {exc}", err=True)
            sys.exit(EXIT_ESTIMATION_ERROR)
    return wrapper


def _load_config(path) -> EvalConfig:
    if path is None:
        return EvalConfig()
    return EvalConfig.from_json_file(path)


@click.group(invoke_without_command=True)
@click.option("--print-config", is_flag=True,
              help="Print the default configuration as JSON and exit.")
@click.pass_context
def main(ctx, print_config):
    """Few-shot RGBD pose estimation toolkit."""
    if print_config:
        click.echo(json.dumps(EvalConfig().to_json_dict(), indent=2))
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@main.group()
def synth():
    """Synthetic dataset generation."""


@synth.command("gen")
@click.option("--scenes", type=int, required=True)
@click.option("--objects-per-scene", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--textures", "textures_dir", type=click.Path(exists=True), default=None)
@click.option("--image-size", type=int, default=128, show_default=True)
@click.option("--support-fraction", type=float, default=0.6, show_default=True)
@_mapped_exit_codes
def synth_gen(scenes, objects_per_scene, out_dir, seed, textures_dir, image_size,
              support_fraction):
    """Render a labeled multi-scene dataset with exact poses and masks."""
    index = generate_dataset(out_dir, scenes, objects_per_scene, seed,
                             textures_dir, image_size, support_fraction)
    click.echo(f"wrote {len(index['scenes'])} scenes of "
               f"{len(index['objects'])} objects to {out_dir}")


@synth.command("gen-video")
@click.option("--frames", type=int, default=72, show_default=True)
@click.option("--step-deg", type=float, default=5.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--image-size", type=int, default=160, show_default=True)
@_mapped_exit_codes
def synth_gen_video(frames, step_deg, out_dir, seed, image_size):
    """Render a fixed-step turntable sequence of one object."""
    generate_turntable(out_dir, frames, step_deg, seed, image_size)
    click.echo(f"wrote {frames} frames to {out_dir}")


@main.command("sample-views")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--object", "object_id", required=True)
@click.option("--k", type=int, default=16, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_exit_codes
def sample_views(dataset_dir, object_id, k, out_path):
    """Select k support views by farthest rotation and write a manifest."""
    scene_ids, _ = sample_support_views(dataset_dir, object_id, k, out_path)
    click.echo(f"selected {len(scene_ids)} views: {' '.join(scene_ids)}")


@main.command("estimate")
@click.option("--support", "support_path", type=click.Path(exists=True), required=True)
@click.option("--query", "query_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--icp", is_flag=True, help="Refine the winning pose with ICP.")
@_mapped_exit_codes
def estimate(support_path, query_dir, config_path, out_path, icp):
    """Estimate the pose of the supported object in one query frame."""
    config = _load_config(config_path)
    if icp:
        config.use_icp = True
    support = load_support_set_from_manifest(support_path, config.crop_padding)
    query_dir = Path(query_dir)
    query = load_frame_patch(query_dir.parent, query_dir.name, support.object_id,
                             config.crop_padding)
    result = estimate_pose(support, query, config)
    payload = result.pose.to_json_dict()
    payload.update({
        "chosen_view": result.chosen_view,
        "per_view_losses": [float(v) for v in result.per_view_losses],
        "match_counts": [int(v) for v in result.match_counts],
        "refined": result.refined,
    })
    Path(out_path).write_text(json.dumps(payload, indent=2))
    click.echo(f"pose written to {out_path} (view {result.chosen_view}, "
               f"loss {result.per_view_losses[result.chosen_view]:.3e})")


@main.command("eval")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=16, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--oracle-pose", is_flag=True,
              help="Report metrics with predictions forced to ground truth.")
@_mapped_exit_codes
def eval_cmd(dataset_dir, k, config_path, out_dir, oracle_pose):
    """Run the full evaluation protocol over a dataset."""
    config = _load_config(config_path)
    result = run_eval(dataset_dir, k, config, out_dir, oracle_pose)
    for row in result["summary_rows"]:
        click.echo(f"{row['object_id']}: adds_auc={float(row['adds_auc']):.4f} "
                   f"add_auc={float(row['add_auc']):.4f} "
                   f"add_recall_0p1d={float(row['add_recall_0p1d']):.4f} "
                   f"baseline={float(row['baseline_recall_0p1d']):.4f}")
    click.echo(f"report written to {out_dir}")


@main.command("register")
@click.option("--video", "video_dir", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=16, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--plane-removal", is_flag=True,
              help="Mask the object by removing the dominant plane instead of "
                   "using stored masks.")
@_mapped_exit_codes
def register(video_dir, k, out_path, plane_removal):
    """Build a support manifest from an object video via chained ICP."""
    params = RegistrationParams(k=k, use_plane_removal=plane_removal)
    object_id, scene_ids, _ = register_video_dir(video_dir, k, params, out_path)
    click.echo(f"registered {object_id}: {len(scene_ids)} views -> {out_path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service wrapping the library."""
    import uvicorn

    from .service.app import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
