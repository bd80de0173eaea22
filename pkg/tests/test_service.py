import json

import pytest
from fastapi.testclient import TestClient

from rgbdpose.service.app import create_app

TINY_CONFIG = {"n_points": 256, "patch_size": 128, "sinkhorn_iterations": 30,
               "ransac_iterations": 192, "baseline_samples": 100}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def served_dataset(client, tmp_path_factory):
    root = tmp_path_factory.mktemp("svc") / "ds"
    resp = client.post("/scenes/generate", json={
        "out_dir": str(root), "scenes": 8, "objects_per_scene": 1,
        "seed": 31, "image_size": 128, "support_fraction": 0.6})
    assert resp.status_code == 200, resp.text
    return root, resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"


def test_config_defaults_published(client):
    resp = client.get("/config/defaults")
    assert resp.status_code == 200
    config = resp.json()
    assert config["support_k"] == 16
    assert config["patch_size"] == 255


def test_generate_scenes(served_dataset):
    root, body = served_dataset
    assert body["objects"] == ["obj00"]
    assert len(body["scenes"]) == 8
    assert (root / "dataset.json").exists()


def test_sample_support(client, served_dataset, tmp_path):
    root, _ = served_dataset
    out = tmp_path / "support.json"
    resp = client.post("/support/sample", json={
        "dataset_dir": str(root), "object_id": "obj00", "k": 4,
        "out_path": str(out)})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert len(body["scenes"]) == 4
    assert len(body["poses"][0]["rotation"]) == 9
    assert out.exists()


def test_sample_support_unknown_object_422(client, served_dataset):
    root, _ = served_dataset
    resp = client.post("/support/sample", json={
        "dataset_dir": str(root), "object_id": "nope", "k": 4})
    assert resp.status_code == 422


def test_estimate_endpoint(client, served_dataset, tmp_path):
    root, _ = served_dataset
    manifest = tmp_path / "support.json"
    client.post("/support/sample", json={
        "dataset_dir": str(root), "object_id": "obj00", "k": 4,
        "out_path": str(manifest)})
    scene = json.loads(manifest.read_text())["frames"][0]["scene"]
    resp = client.post("/pose/estimate", json={
        "support_path": str(manifest),
        "query_dir": str(root / "scenes" / scene),
        "config": TINY_CONFIG})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["pose"]["units"] == "m"
    assert len(body["pose"]["rotation"]) == 9
    assert len(body["per_view_losses"]) == 4
    assert body["refined"] is False


def test_estimate_failure_409(client, served_dataset, tmp_path):
    root, _ = served_dataset
    manifest = tmp_path / "support.json"
    client.post("/support/sample", json={
        "dataset_dir": str(root), "object_id": "obj00", "k": 2,
        "out_path": str(manifest)})
    scene = json.loads(manifest.read_text())["frames"][0]["scene"]
    config = dict(TINY_CONFIG, match_threshold=1.1, sinkhorn_iterations=10,
                  n_points=128)
    resp = client.post("/pose/estimate", json={
        "support_path": str(manifest),
        "query_dir": str(root / "scenes" / scene),
        "config": config})
    assert resp.status_code == 409


def test_estimate_missing_support_422(client, served_dataset, tmp_path):
    root, _ = served_dataset
    resp = client.post("/pose/estimate", json={
        "support_path": str(tmp_path / "missing.json"),
        "query_dir": str(root / "scenes" / "scene_0000")})
    assert resp.status_code == 422


def test_evaluate_oracle(client, served_dataset, tmp_path):
    root, _ = served_dataset
    out = tmp_path / "report"
    resp = client.post("/evaluate", json={
        "dataset_dir": str(root), "k": 4, "config": TINY_CONFIG,
        "out_dir": str(out), "oracle_pose": True})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["summary"][0]["add_auc"] == 1.0
    assert body["summary"][0]["add_recall_0p1d"] == 1.0
    assert body["per_frame_csv"] is not None


def test_config_model_rejects_unknown_fields(client, served_dataset):
    root, _ = served_dataset
    resp = client.post("/evaluate", json={
        "dataset_dir": str(root), "k": 4,
        "config": {"not_a_field": 1}, "oracle_pose": True})
    assert resp.status_code == 422
