"""6D pose evaluation: average-distance errors, threshold AUC, diameter recall."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import EmptyModel, InvalidDiameter, InvalidThreshold
from .geom import PointCloud, Pose

PER_FRAME_COLUMNS = ["object_id", "frame_id", "metric_kind", "error_m"]
SUMMARY_COLUMNS = ["object_id", "adds_auc", "add_auc", "add_recall_0p1d",
                   "baseline_recall_0p1d"]


def diameter(vertices: Union[PointCloud, np.ndarray]) -> float:
    """Maximum pairwise vertex distance (exhaustive, exact)."""
    pts = vertices.points if isinstance(vertices, PointCloud) else np.asarray(vertices, dtype=float)
    pts = pts.reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyModel("no vertices")
    if len(pts) == 1:
        return 0.0
    return float(pdist(pts).max())


@dataclass(frozen=True)
class ObjectModel:
    """Evaluand of the distance metrics: vertex set, diameter, symmetry flag."""

    vertices: np.ndarray
    diameter: float
    symmetric: bool = False

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise EmptyModel("object model needs at least one vertex")
        if not np.all(np.isfinite(pts)):
            raise ValueError("object model has non-finite vertices")
        object.__setattr__(self, "vertices", pts)

    @classmethod
    def from_vertices(cls, vertices, symmetric: bool = False) -> "ObjectModel":
        pts = np.asarray(vertices, dtype=float).reshape(-1, 3)
        return cls(pts, diameter(pts), symmetric)

    def to_json_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "diameter": float(self.diameter),
                "symmetric": bool(self.symmetric)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "ObjectModel":
        return cls(np.asarray(data["vertices"], dtype=float),
                   float(data["diameter"]), bool(data["symmetric"]))


def add(model: ObjectModel, pred: Pose, gt: Pose) -> float:
    """Mean distance between model vertices under the two poses."""
    p = pred.apply(model.vertices)
    g = gt.apply(model.vertices)
    return float(np.linalg.norm(p - g, axis=1).mean())


def adds(model: ObjectModel, pred: Pose, gt: Pose) -> float:
    """Mean closest-point distance between the two transformed vertex sets.

    Exhaustive pairwise distances; symmetric objects score 0 whenever the
    predicted pose maps the vertex set onto itself.
    """
    p = pred.apply(model.vertices)
    g = gt.apply(model.vertices)
    return float(cdist(p, g).min(axis=1).mean())


def auc(errors, max_threshold: float = 0.1, step: float = 0.001) -> float:
    """Area under the accuracy-vs-threshold curve.

    Mean over thresholds {step, 2*step, ..., max_threshold} of the fraction
    of errors strictly below each threshold. Infinite errors never count.
    """
    if max_threshold <= 0 or step <= 0 or step > max_threshold:
        raise InvalidThreshold(f"bad thresholds max={max_threshold} step={step}")
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size == 0:
        return 0.0
    n_steps = int(np.floor(max_threshold / step + 1e-9))
    thresholds = step * np.arange(1, n_steps + 1)
    accuracy = (e[None, :] < thresholds[:, None]).mean(axis=1)
    return float(accuracy.mean())


def add_recall_at(errors, diameter: float, fraction: float = 0.1) -> float:
    """Share of errors below fraction * diameter."""
    if diameter <= 0:
        raise InvalidDiameter(f"diameter must be positive, got {diameter}")
    if fraction <= 0:
        raise InvalidThreshold(f"fraction must be positive, got {fraction}")
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size == 0:
        return 0.0
    return float((e < fraction * diameter).mean())


@dataclass(frozen=True)
class MetricReport:
    metric_kind: str  # "ADD" or "ADDS"
    per_frame_errors: np.ndarray
    auc: float
    recall_at_0p1d: float

    def __post_init__(self):
        e = np.asarray(self.per_frame_errors, dtype=float).reshape(-1)
        if np.any(e < 0):
            raise ValueError("errors must be non-negative")
        if not 0.0 <= self.auc <= 1.0 or not 0.0 <= self.recall_at_0p1d <= 1.0:
            raise ValueError("auc and recall must lie in [0, 1]")
        object.__setattr__(self, "per_frame_errors", e)


def write_per_frame_csv(path, rows: Iterable[Mapping]) -> None:
    """CSV rows: object_id, frame_id, metric_kind, error_m."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PER_FRAME_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in PER_FRAME_COLUMNS})


def write_summary_csv(path, rows: Iterable[Mapping]) -> None:
    """CSV rows: object_id, adds_auc, add_auc, add_recall_0p1d, baseline_recall_0p1d."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SUMMARY_COLUMNS})


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
