"""HTTP service wrapping the pose estimation core."""

from .app import create_app

__all__ = ["create_app"]
