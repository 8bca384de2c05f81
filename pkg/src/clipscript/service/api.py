"""HTTP/1.1 API over the service.

Progress is poll-based: GETs return the session document as persisted so far
plus the states of its jobs. Status mapping: validation problems are
400-class (with the offending field named), unknown ids are 404, backend
unavailability is 503 with a Retry-After hint. Every mutation is persisted
before the response is sent.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from ..errors import (
    AdapterUnavailableError,
    ClipscriptError,
    ContentPolicyError,
    MediaTooLargeError,
    NotFoundError,
    UnsupportedMediaError,
    ValidationError,
)
from ..media import parse_scene_clip
from ..model import policy_from_dict, rewrite_to_dict
from .core import Service
from .jobs import job_to_dict


class ReconstructionRequest(BaseModel):
    clip_id: str
    policy: dict = {}
    frames_per_clip: int | None = None


class RewriteRequest(BaseModel):
    clip_id: str


class PromptUpdate(BaseModel):
    text: str


class GoalRequest(BaseModel):
    goal: str


def _version_doc(version, frames) -> dict:
    return {
        "version_index": version.version_index,
        "prompt_snapshot": {
            "text": version.prompt_snapshot.text,
            "provenance": version.prompt_snapshot.provenance,
        },
        "first_frame_ref": frames.put_frame(version.first_frame_snapshot.pixels),
        "clip": {
            "id": version.clip.id,
            "media_ref": version.clip.media_ref,
            "duration": version.clip.duration,
        },
    }


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="clipscript", version="0.1.0")

    @app.exception_handler(ClipscriptError)
    async def _handle_domain_error(request: Request, exc: ClipscriptError):
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, MediaTooLargeError):
            status = 413
        elif isinstance(exc, UnsupportedMediaError):
            status = 415
        elif isinstance(exc, ValidationError):
            status = 400
        elif isinstance(exc, ContentPolicyError):
            status = 422
        elif isinstance(exc, AdapterUnavailableError):
            return JSONResponse(
                status_code=503,
                content={"error": str(exc)},
                headers={"Retry-After": "5"},
            )
        else:
            status = 500
        body = {"error": str(exc)}
        if isinstance(exc, ValidationError):
            body["field"] = exc.field
        return JSONResponse(status_code=status, content=body)

    # -- media -------------------------------------------------------------

    @app.post("/clips", status_code=201)
    async def upload_clip(file: UploadFile):
        data = await file.read()
        clip = service.store_clip(data)
        return {
            "id": clip.id,
            "media_ref": clip.media_ref,
            "duration": clip.duration,
            "native_fps": clip.native_fps,
            "width": clip.width,
            "height": clip.height,
        }

    @app.get("/media/{digest}")
    def get_media(digest: str):
        data = service.media.get(digest)
        if data[:8] == b"\x89PNG\r\n\x1a\n":
            media_type = "image/png"
        elif parse_scene_clip(data) is not None:
            media_type = "application/json"
        else:
            media_type = "application/octet-stream"
        return Response(content=data, media_type=media_type)

    # -- reconstructions ------------------------------------------------------

    @app.post("/reconstructions", status_code=202)
    def create_reconstruction(req: ReconstructionRequest):
        policy = policy_from_dict(req.policy)
        session_id, job = service.submit_reconstruction(
            req.clip_id, policy, req.frames_per_clip
        )
        return {"id": session_id, "job": job_to_dict(job)}

    @app.get("/reconstructions/{session_id}")
    def get_reconstruction(session_id: str):
        return service.reconstruction_state(session_id)

    # -- rewrites ----------------------------------------------------------------

    @app.post("/rewrites", status_code=202)
    def create_rewrite(req: RewriteRequest):
        rewrite_id, job = service.submit_rewrite_start(req.clip_id)
        return {"id": rewrite_id, "job": job_to_dict(job)}

    @app.get("/rewrites/{rewrite_id}")
    def get_rewrite(rewrite_id: str):
        return service.rewrite_state(rewrite_id)

    @app.put("/rewrites/{rewrite_id}/prompt")
    def put_prompt(rewrite_id: str, update: PromptUpdate):
        updated = service.edit_prompt(rewrite_id, update.text)
        return rewrite_to_dict(updated, service.media)

    @app.post("/rewrites/{rewrite_id}/assist", status_code=202)
    def post_assist(rewrite_id: str, req: GoalRequest):
        job = service.submit_assist(rewrite_id, req.goal)
        return {"id": rewrite_id, "job": job_to_dict(job)}

    @app.post("/rewrites/{rewrite_id}/first-frame", status_code=202)
    def post_first_frame(rewrite_id: str, req: GoalRequest):
        job = service.submit_first_frame(rewrite_id, req.goal)
        return {"id": rewrite_id, "job": job_to_dict(job)}

    @app.post("/rewrites/{rewrite_id}/first-frame/revert")
    def post_revert(rewrite_id: str):
        updated = service.revert_first_frame(rewrite_id)
        return rewrite_to_dict(updated, service.media)

    @app.post("/rewrites/{rewrite_id}/versions", status_code=202)
    def post_version(rewrite_id: str):
        job = service.submit_generate_version(rewrite_id)
        return {"id": rewrite_id, "job": job_to_dict(job)}

    @app.get("/rewrites/{rewrite_id}/versions")
    def list_versions(rewrite_id: str):
        session = service.sessions.load_rewrite(rewrite_id)
        return {
            "versions": [_version_doc(v, service.media) for v in session.versions]
        }

    @app.get("/rewrites/{rewrite_id}/versions/{a}/compare/{b}")
    def compare(rewrite_id: str, a: int, b: int):
        session = service.sessions.load_rewrite(rewrite_id)
        va = session.version(a)
        vb = session.version(b)
        return {
            "a": _version_doc(va, service.media),
            "b": _version_doc(vb, service.media),
        }

    # -- jobs ---------------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return job_to_dict(service.jobs.load(job_id))

    @app.get("/healthz")
    def health():
        return {"status": "ok", "adapter": service.config.adapter}

    if service.config.ui_dir is not None and Path(service.config.ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/", StaticFiles(directory=service.config.ui_dir, html=True), name="ui"
        )

    return app
