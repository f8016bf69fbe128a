from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from reeflab import (
    Project,
    ProjectConfig,
    create_project,
    load_project,
    save_project,
)
from reeflab.interchange import export_coco_bytes, instances_csv, stats_csv
from reeflab.server import create_app
from reeflab.synthetic import corpus_to_coco, make_corpus, scene_image

N_IMAGES = 3


@pytest.fixture
def workspace(tmp_path):
    """Project of three synthetic scenes, prepared against an oracle backend."""
    corpus = make_corpus(N_IMAGES, 24, 24, blobs=(2, 3), seed=21)
    image_paths = []
    for gt in corpus:
        path = tmp_path / f"img_{gt.image_id:04d}.png"
        scene_image(gt).save(path, format="PNG")
        image_paths.append(path)
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps(corpus_to_coco(corpus)))
    project, problems = create_project(
        image_paths, config=ProjectConfig(min_area_fraction=0.0), base_dir=tmp_path
    )
    assert problems == []
    for entry in project.images:
        project.mark_prepared(entry.image_id)
    project_path = tmp_path / "project.json"
    save_project(project, project_path)
    return {
        "project_path": project_path,
        "descriptor": f"oracle:{gt_path}",
        "corpus": {gt.image_id: gt for gt in corpus},
    }


@pytest.fixture
def client(workspace):
    app = create_app(workspace["project_path"], workspace["descriptor"])
    with TestClient(app) as test_client:
        yield test_client


def coral_point(workspace, image_id=1):
    gt = workspace["corpus"][image_id]
    import numpy as np

    ys, xs = np.nonzero(gt.union)
    return int(xs[0]), int(ys[0])


def background_point(workspace, image_id=1):
    gt = workspace["corpus"][image_id]
    import numpy as np

    ys, xs = np.nonzero(~gt.union)
    return int(xs[0]), int(ys[0])


class TestReads:
    def test_project_summary(self, client):
        body = client.get("/api/project").json()
        assert body["image_count"] == N_IMAGES
        assert body["schema_version"] == 1

    def test_images_listing(self, client):
        body = client.get("/api/images").json()
        assert len(body) == N_IMAGES
        assert all(entry["prepared"] for entry in body)
        assert all("revision" in entry for entry in body)

    def test_image_file(self, client):
        response = client.get("/api/images/1/file")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert response.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_image_404(self, client):
        response = client.get("/api/images/99/file")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "not_found" and body["status"] == 404

    def test_reads_are_pure(self, client):
        first = client.get("/api/stats").json()
        second = client.get("/api/stats").json()
        assert first == second

    def test_export_matches_library(self, client, workspace):
        project = load_project(workspace["project_path"])
        assert client.get("/api/export/coco").content == export_coco_bytes(project)
        assert client.get("/api/export/csv?kind=instances").content == instances_csv(project)
        assert client.get("/api/export/csv?kind=stats").content == stats_csv(project)

    def test_export_unknown_kind(self, client):
        response = client.get("/api/export/csv?kind=pdf")
        assert response.status_code == 422
        assert response.json()["code"] == "validation"


class TestPromptAndAuto:
    def test_prompt_on_coral(self, client, workspace):
        x, y = coral_point(workspace)
        response = client.post("/api/images/1/prompt", json={"points": [{"x": x, "y": y}]})
        assert response.status_code == 200
        body = response.json()
        assert body["confidence"] == 1.0
        assert sum(body["mask"]["counts"][1::2]) > 0

    def test_prompt_on_background(self, client, workspace):
        x, y = background_point(workspace)
        body = client.post(
            "/api/images/1/prompt", json={"points": [{"x": x, "y": y}]}
        ).json()
        assert body["confidence"] == 0.0
        assert sum(body["mask"]["counts"][1::2]) == 0

    def test_prompt_requires_positive(self, client, workspace):
        x, y = coral_point(workspace)
        response = client.post(
            "/api/images/1/prompt",
            json={"points": [{"x": x, "y": y, "polarity": "negative"}]},
        )
        assert response.status_code == 422

    def test_prompt_out_of_bounds(self, client):
        response = client.post(
            "/api/images/1/prompt", json={"points": [{"x": 500, "y": 0}]}
        )
        assert response.status_code == 422

    def test_auto_preview_does_not_persist(self, client, workspace):
        before = workspace["project_path"].read_bytes()
        body = client.post("/api/images/1/auto", json={}).json()
        assert len(body["proposals"]) == len(workspace["corpus"][1].masks)
        assert workspace["project_path"].read_bytes() == before

    def test_auto_commit_persists(self, client, workspace):
        body = client.post("/api/images/1/auto", json={"commit": True}).json()
        assert body["created_instance_ids"]
        stored = load_project(workspace["project_path"])
        assert len(stored.image_instances(1)) == len(body["created_instance_ids"])
        listing = client.get("/api/images/1/instances").json()
        assert listing["revision"] == body["revision"]


class TestInstanceEditing:
    def put(self, client, image_id, payload):
        return client.put(f"/api/images/{image_id}/instances", json=payload)

    def test_add_label_and_health_flow(self, client):
        assert client.put(
            "/api/labels",
            json=[{"id": 1, "name": "Acropora", "color": "#FF0000"}],
        ).status_code == 200
        listing = client.get("/api/images/1/instances").json()
        payload = {
            "revision": listing["revision"],
            "instances": [
                {
                    "mask": {"size": [24, 24], "counts": [0, 24 * 24]},
                    "label_id": 1,
                    "health": "Bleached",
                }
            ],
        }
        response = self.put(client, 1, payload)
        assert response.status_code == 200
        body = response.json()
        assert body["created_instance_ids"] == [1]
        inst = body["instances"][0]
        assert inst["label_id"] == 1 and inst["health"] == "Bleached"
        stats = client.get("/api/images/1/stats").json()
        assert stats["coverage"] == 1.0
        assert stats["health"]["Bleached"]["fraction_of_coral"] == 1.0

    def test_stale_revision_conflict(self, client):
        listing = client.get("/api/images/1/instances").json()
        payload = {
            "revision": listing["revision"],
            "instances": [{"mask": {"size": [24, 24], "counts": [0, 576]}}],
        }
        assert self.put(client, 1, payload).status_code == 200
        # replay the same (now stale) revision
        response = self.put(client, 1, payload)
        assert response.status_code == 409
        assert response.json()["code"] == "conflict"

    def test_removal_by_omission(self, client):
        listing = client.get("/api/images/1/instances").json()
        first = self.put(
            client,
            1,
            {
                "revision": listing["revision"],
                "instances": [{"mask": {"size": [24, 24], "counts": [0, 576]}}],
            },
        ).json()
        second = self.put(client, 1, {"revision": first["revision"], "instances": []})
        assert second.json()["instances"] == []

    def test_unknown_label_rejected_atomically(self, client, workspace):
        before = workspace["project_path"].read_bytes()
        listing = client.get("/api/images/1/instances").json()
        response = self.put(
            client,
            1,
            {
                "revision": listing["revision"],
                "instances": [
                    {"mask": {"size": [24, 24], "counts": [0, 576]}, "label_id": 9}
                ],
            },
        )
        assert response.status_code == 404
        assert workspace["project_path"].read_bytes() == before
        assert client.get("/api/images/1/instances").json()["instances"] == []

    def test_duplicate_labels_rejected(self, client):
        response = client.put(
            "/api/labels",
            json=[
                {"id": 1, "name": "A", "color": "#FF0000"},
                {"id": 1, "name": "B", "color": "#00FF00"},
            ],
        )
        assert response.status_code == 422


INJECTION_POINTS = [
    "deepcopy",
    "save_project",
    "validate",
    "serialize",
    "mkstemp",
    "fsync",
    "replace",
    "add_instance",
    "remove_instance",
    "to_dict",
]


class TestAtomicity:
    """Injected failures mid-mutation must leave the persisted file unchanged."""

    @pytest.fixture
    def fragile_client(self, workspace):
        app = create_app(workspace["project_path"], workspace["descriptor"])
        with TestClient(app, raise_server_exceptions=False) as test_client:
            # seed one instance so the replacement exercises remove + add
            listing = test_client.get("/api/images/2/instances").json()
            response = test_client.put(
                "/api/images/2/instances",
                json={
                    "revision": listing["revision"],
                    "instances": [{"mask": {"size": [24, 24], "counts": [1, 575]}}],
                },
            )
            assert response.status_code == 200
            yield test_client

    def _mutating_request(self, client, revision):
        """Replace image 2's list: removes the seeded instance, adds a new one."""
        return client.put(
            "/api/images/2/instances",
            json={
                "revision": revision,
                "instances": [{"mask": {"size": [24, 24], "counts": [0, 576]}}],
            },
        )

    def _boom(self, *args, **kwargs):
        raise RuntimeError("injected failure")

    @pytest.fixture
    def injectors(self, monkeypatch):
        import reeflab.project
        import reeflab.server

        def patch(target, name):
            return lambda: monkeypatch.setattr(target, name, self._boom)

        return {
            "deepcopy": patch(reeflab.server.copy, "deepcopy"),
            "save_project": patch(reeflab.server, "save_project"),
            "validate": patch(reeflab.project.Project, "validate"),
            "serialize": patch(reeflab.project.json, "dumps"),
            "mkstemp": patch(reeflab.project.tempfile, "mkstemp"),
            "fsync": patch(reeflab.project.os, "fsync"),
            "replace": patch(reeflab.project.os, "replace"),
            "add_instance": patch(reeflab.project.Project, "add_instance"),
            "remove_instance": patch(reeflab.project.Project, "remove_instance"),
            "to_dict": patch(reeflab.project.Project, "to_dict"),
        }

    @pytest.mark.parametrize("point", INJECTION_POINTS)
    def test_injection_leaves_file_unchanged(self, fragile_client, workspace, injectors, point):
        revision = fragile_client.get("/api/images/2/instances").json()["revision"]
        baseline = workspace["project_path"].read_bytes()
        injectors[point]()
        response = self._mutating_request(fragile_client, revision)
        assert response.status_code >= 500
        assert workspace["project_path"].read_bytes() == baseline

    def test_state_recovers_after_injection(self, fragile_client, workspace, injectors, monkeypatch):
        revision = fragile_client.get("/api/images/2/instances").json()["revision"]
        baseline = workspace["project_path"].read_bytes()
        injectors["replace"]()
        assert self._mutating_request(fragile_client, revision).status_code >= 500
        monkeypatch.undo()
        assert workspace["project_path"].read_bytes() == baseline
        # the served state is still the pre-failure one; the same revision works
        response = self._mutating_request(fragile_client, revision)
        assert response.status_code == 200
        stored = load_project(workspace["project_path"])
        assert len(stored.image_instances(2)) == 1
