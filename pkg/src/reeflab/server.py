"""HTTP API consumed by the labeling UI.

Reads are pure functions of the persisted project; every mutation is applied
to a working copy, written through to disk atomically, and only then swapped
into memory — an error at any point leaves both the file and the served
state unchanged.  Each image's instance list carries a content-derived
revision token; PUTs with a stale token are rejected with a conflict.
"""

from __future__ import annotations

import copy
import hashlib
import json
import threading
from pathlib import Path
from typing import Callable

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response

from .analytics import image_stats, project_stats
from .backends import SegmentationBackend, create_backend
from .backends.base import BackendDescriptor, PointPrompt
from .errors import ConflictError, NotFoundError, ReefLabError, ValidationError
from .interchange import export_coco_bytes, instances_csv, stats_csv
from .masks import BinaryMask
from .project import (
    HealthStatus,
    InstanceSource,
    Label,
    Project,
    load_project,
    save_project,
)

_STATUS_BY_CODE = {
    "validation": 422,
    "not_found": 404,
    "conflict": 409,
    "version": 400,
    "backend_unavailable": 503,
}

_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg",
                ".webp": "image/webp"}


class ProjectService:
    """Owns the served project: single writer, concurrent readers."""

    def __init__(self, project_path: str | Path, backend: SegmentationBackend):
        self.project_path = Path(project_path)
        self.backend = backend
        self.project = load_project(self.project_path)
        self.lock = threading.Lock()

    def resolve_image_path(self, image_id: int) -> Path:
        entry = self.project.image(image_id)
        return self.project_path.parent / entry.path

    def prepare_known_images(self) -> None:
        """Re-run backend preparation for images the project marks prepared."""
        for entry in self.project.images:
            if entry.prepared:
                self.backend.prepare(entry.image_id, self.resolve_image_path(entry.image_id))

    def mutate(self, operation: Callable[[Project], dict]) -> dict:
        """Apply, persist, then publish; any failure leaves state untouched."""
        with self.lock:
            working = copy.deepcopy(self.project)
            result = operation(working)
            save_project(working, self.project_path)
            self.project = working
            return result


def revision_token(project: Project, image_id: int) -> str:
    payload = json.dumps(
        [inst.to_dict() for inst in project.image_instances(image_id)], sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _instances_payload(project: Project, image_id: int) -> dict:
    return {
        "image_id": image_id,
        "revision": revision_token(project, image_id),
        "instances": [inst.to_dict() for inst in project.image_instances(image_id)],
    }


def _apply_instance_list(project: Project, image_id: int, payload: dict) -> dict:
    """Replace an image's instance list from a PUT payload."""
    if not isinstance(payload.get("instances"), list):
        raise ValidationError("payload must carry an 'instances' list")
    offered = payload["instances"]
    existing = {inst.instance_id: inst for inst in project.image_instances(image_id)}
    kept_ids: set[int] = set()
    new_entries: list[dict] = []
    for item in offered:
        instance_id = item.get("instance_id")
        if instance_id is None:
            new_entries.append(item)
            continue
        instance_id = int(instance_id)
        if instance_id not in existing:
            raise NotFoundError(f"image {image_id} has no instance {instance_id}")
        kept_ids.add(instance_id)
        if "label_id" in item:
            label_id = item["label_id"]
            project.assign_label(
                image_id, instance_id, None if label_id is None else int(label_id)
            )
        if "health" in item:
            try:
                health = HealthStatus(item["health"])
            except ValueError:
                raise ValidationError(f"unknown health status {item['health']!r}")
            project.assign_health(image_id, instance_id, health)
    for instance_id in sorted(set(existing) - kept_ids):
        project.remove_instance(image_id, instance_id)
    created: list[int] = []
    for item in new_entries:
        if "mask" not in item:
            raise ValidationError("new instances need a mask")
        mask = BinaryMask.from_json(item["mask"])
        try:
            source = InstanceSource(item.get("source", "manual"))
        except ValueError:
            raise ValidationError(f"unknown source {item.get('source')!r}")
        instance_id = project.add_instance(
            image_id, mask, source=source, confidence=item.get("confidence")
        )
        created.append(instance_id)
        if item.get("label_id") is not None:
            project.assign_label(image_id, instance_id, int(item["label_id"]))
        if "health" in item:
            try:
                health = HealthStatus(item["health"])
            except ValueError:
                raise ValidationError(f"unknown health status {item['health']!r}")
            project.assign_health(image_id, instance_id, health)
    result = _instances_payload(project, image_id)
    result["created_instance_ids"] = created
    return result


def create_app(
    project_path: str | Path, backend: SegmentationBackend | BackendDescriptor | str
) -> FastAPI:
    if not isinstance(backend, SegmentationBackend):
        backend = create_backend(backend)
    service = ProjectService(project_path, backend)
    service.prepare_known_images()

    app = FastAPI(title="reeflab", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = service

    @app.exception_handler(ReefLabError)
    async def domain_error_handler(request: Request, exc: ReefLabError):
        status = _STATUS_BY_CODE.get(exc.code, 422)
        return JSONResponse(
            status_code=status,
            content={
                "status": status,
                "code": exc.code,
                "message": str(exc),
                "details": exc.details,
            },
        )

    # -- reads -----------------------------------------------------------

    @app.get("/api/project")
    def get_project():
        project = service.project
        return {
            "schema_version": project.schema_version,
            "config": project.config.to_dict(),
            "image_count": len(project.images),
            "label_count": len(project.labels),
            "instance_count": project.total_instance_count(),
        }

    @app.get("/api/images")
    def get_images():
        project = service.project
        return [
            {
                **entry.to_dict(),
                "revision": revision_token(project, entry.image_id),
                "instance_count": len(project.image_instances(entry.image_id)),
            }
            for entry in project.images
        ]

    @app.get("/api/images/{image_id}/file")
    def get_image_file(image_id: int):
        path = service.resolve_image_path(image_id)
        if not path.is_file():
            raise NotFoundError(f"image file {path} is missing")
        media_type = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media_type)

    @app.get("/api/images/{image_id}/instances")
    def get_instances(image_id: int):
        return _instances_payload(service.project, image_id)

    @app.get("/api/labels")
    def get_labels():
        return [
            {"id": label.id, "name": label.name, "color": label.color}
            for label in service.project.labels
        ]

    @app.get("/api/stats")
    def get_project_stats():
        return project_stats(service.project).to_dict()

    @app.get("/api/images/{image_id}/stats")
    def get_image_stats(image_id: int):
        return image_stats(service.project, image_id).to_dict()

    @app.get("/api/export/coco")
    def get_export_coco():
        return Response(
            content=export_coco_bytes(service.project), media_type="application/json"
        )

    @app.get("/api/export/csv")
    def get_export_csv(kind: str = "instances"):
        if kind == "instances":
            body = instances_csv(service.project)
        elif kind == "stats":
            body = stats_csv(service.project)
        else:
            raise ValidationError(f"unknown csv kind {kind!r}, want instances|stats")
        return Response(content=body, media_type="text/csv; charset=utf-8")

    # -- mutations ---------------------------------------------------------

    @app.put("/api/images/{image_id}/instances")
    def put_instances(image_id: int, payload: dict = Body(...)):
        current = revision_token(service.project, image_id)
        if payload.get("revision") != current:
            raise ConflictError(
                f"stale revision for image {image_id}",
                details={"expected": current},
            )
        return service.mutate(lambda project: _apply_instance_list(project, image_id, payload))

    @app.post("/api/images/{image_id}/prompt")
    def post_prompt(image_id: int, payload: dict = Body(...)):
        service.project.image(image_id)
        points = payload.get("points")
        if not isinstance(points, list) or not points:
            raise ValidationError("payload must carry a non-empty 'points' list")
        prompts = [PointPrompt.from_dict(p) for p in points]
        if not any(p.is_positive for p in prompts):
            raise ValidationError("at least one positive prompt is required")
        proposal = service.backend.prompt(image_id, prompts)
        return {"mask": proposal.mask.to_json(), "confidence": proposal.confidence}

    @app.post("/api/images/{image_id}/auto")
    def post_auto(image_id: int, payload: dict = Body(default={})):
        project = service.project
        project.image(image_id)
        min_area = float(payload.get("min_area_fraction", project.config.min_area_fraction))
        threshold = float(
            payload.get("confidence_threshold", project.config.confidence_threshold)
        )
        proposals = service.backend.auto_segment(image_id, min_area, threshold)
        response: dict = {
            "proposals": [
                {"mask": p.mask.to_json(), "confidence": p.confidence} for p in proposals
            ]
        }
        if payload.get("commit"):
            def commit(working: Project) -> dict:
                ids = [
                    working.add_instance(
                        image_id, p.mask, source=InstanceSource.AUTO, confidence=p.confidence
                    )
                    for p in proposals
                ]
                return {
                    "created_instance_ids": ids,
                    "revision": revision_token(working, image_id),
                }
            response.update(service.mutate(commit))
        return response

    @app.put("/api/labels")
    def put_labels(payload: list = Body(...)):
        def replace(working: Project) -> dict:
            try:
                labels = [
                    Label(id=int(l["id"]), name=str(l["name"]), color=str(l["color"]))
                    for l in payload
                ]
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"malformed label entry: {exc}")
            working.define_labels(labels)
            return {
                "labels": [
                    {"id": l.id, "name": l.name, "color": l.color} for l in working.labels
                ]
            }
        return service.mutate(replace)

    return app


def run_server(
    project_path: str | Path,
    backend: SegmentationBackend | BackendDescriptor | str,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    import uvicorn

    app = create_app(project_path, backend)
    uvicorn.run(app, host=host, port=port, log_level="info")
