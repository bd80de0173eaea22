"""Few-shot RGBD object pose estimation toolkit.

Core pieces: rigid-body math and robust alignment (geom), the ADD/ADDS
evaluation protocol (metrics), RGBD geometry and handcrafted dense features
(rgbd), forward-pass attention enhancement (attention), Sinkhorn-based
correspondence (matching), a deterministic synthetic scene generator (synth),
and end-to-end orchestration (pipeline). A FastAPI service wraps the library
for long-running multi-client use; the CLI is a thin client of the same core.
"""

from .geom import (
    AlignmentResult,
    CorrespondenceSet,
    IcpParams,
    PointCloud,
    Pose,
    Quaternion,
    RansacParams,
    chain_poses,
    farthest_rotation_sample,
    icp_refine,
    quat_distance,
    ransac_align,
    transform_points,
    umeyama_align,
)
from .metrics import MetricReport, ObjectModel, add, add_recall_at, adds, auc, diameter
from .rgbd import (
    FeatureCloud,
    Intrinsics,
    RgbdPatch,
    backproject,
    estimate_normals,
    extract_toy_features,
    farthest_point_sample,
    project,
)
from .attention import AttentionWeights, enhance, linear_attention, softmax_attention
from .matching import MatchSet, extract_matches, matching_nll_loss, score_matrix, sinkhorn
from .synth import (
    SceneSpec,
    TexturedMesh,
    blend_texture_color,
    compose_scene,
    deform_mesh,
    gen_procedural_mesh,
    generate_dataset,
    generate_turntable,
    rasterize,
)
from .pipeline import (
    EstimateResult,
    EvalConfig,
    SupportSet,
    build_support_set,
    estimate_pose,
    register_from_video,
    run_eval,
)

__version__ = "0.1.0"
