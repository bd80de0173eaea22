import numpy as np
import pytest

from rgbdpose.geom import Pose, Quaternion


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pose(rng, translation_scale=1.0) -> Pose:
    return Pose(Quaternion.random(rng).as_matrix(),
                rng.normal(scale=translation_scale, size=3))


@pytest.fixture
def tiny_config():
    """Small but representative pipeline configuration for fast tests."""
    from rgbdpose.pipeline import EvalConfig
    return EvalConfig(n_points=256, patch_size=128, sinkhorn_iterations=30,
                      ransac_iterations=192, baseline_samples=200)
