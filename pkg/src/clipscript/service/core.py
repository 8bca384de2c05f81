"""Service assembly: adapters + media + session store + job handlers.

Mutations on a single session are serialized through a per-session lock; job
workers process independent sessions in parallel. Reconstruction jobs
checkpoint the session document after every iteration, which both feeds the
poll-based progress API and makes the jobs resumable after a crash or a
graceful shutdown.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .. import rewrite as rewrite_ops
from ..adapters.base import AdapterConfig, AdapterSet
from ..adapters.simulation import SimulationParams, build_simulation_adapters
from ..engine import PROBE_ITERATIONS, resume, run_reconstruction
from ..errors import NotFoundError, ValidationError
from ..media import ExternalFrameExtractor, MediaService
from ..model import (
    ReconstructionSession,
    STATUS_FAILED,
    StoppingPolicy,
    VideoClip,
    policy_from_dict,
    policy_to_dict,
)
from ..similarity import DEFAULT_FRAMES_PER_CLIP
from .jobs import Job, JobInterrupted, JobRunner, JobStore
from .storage import SessionStore


@dataclass
class ServiceConfig:
    data_dir: Path
    adapter: str = "sim"  # "sim" | "remote"
    seed: int = 0
    sim_params: Optional[SimulationParams] = None
    remote: Optional[AdapterConfig] = None
    workers: int = 2
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP
    probe_iterations: int = PROBE_ITERATIONS
    media_policy: str = "auto"  # "auto" | "sim" | "external"
    ui_dir: Optional[Path] = None
    extractor: ExternalFrameExtractor = field(default_factory=ExternalFrameExtractor)

    def needs_extractor(self) -> bool:
        if self.media_policy == "external":
            return True
        if self.media_policy == "sim":
            return False
        return self.adapter == "remote"


class Service:
    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        config.data_dir = Path(config.data_dir)
        config.data_dir.mkdir(parents=True, exist_ok=True)

        extractor = None
        if config.needs_extractor():
            if not config.extractor.available():
                raise ValidationError(
                    "media_policy",
                    "external frame extractor (ffprobe/ffmpeg) not found on PATH; "
                    "required for this configuration",
                )
            extractor = config.extractor

        self.media = MediaService(config.data_dir, extractor=extractor)
        self.sessions = SessionStore(config.data_dir, self.media)
        self.jobs = JobStore(config.data_dir)
        self.adapters: AdapterSet = self._build_adapters()
        self.runner = JobRunner(self.jobs, self._handle_job, workers=config.workers)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _build_adapters(self) -> AdapterSet:
        if self.config.adapter == "sim":
            params = self.config.sim_params or SimulationParams(seed=self.config.seed)
            return build_simulation_adapters(self.media, params)
        if self.config.adapter == "remote":
            if self.config.remote is None:
                raise ValidationError("remote", "remote adapter config is required")
            from ..adapters.remote import build_remote_adapters

            return build_remote_adapters(self.media, self.config.remote)
        raise ValidationError("adapter", "must be 'sim' or 'remote'")

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self.runner.start()

    def stop(self) -> None:
        self.runner.stop()

    # -- locking --------------------------------------------------------------

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = self._locks[session_id] = threading.Lock()
            return lock

    # -- uploads ----------------------------------------------------------------

    def store_clip(self, data: bytes) -> VideoClip:
        return self.media.ingest_clip(data)

    def load_clip(self, clip_id: str) -> VideoClip:
        if not self.media.exists(clip_id):
            raise NotFoundError(f"clip {clip_id} does not exist")
        return self.media.ingest_clip(self.media.get(clip_id))

    # -- job submission -----------------------------------------------------------

    def submit_reconstruction(
        self,
        clip_id: str,
        policy: StoppingPolicy,
        frames_per_clip: Optional[int] = None,
    ) -> tuple[str, Job]:
        self.load_clip(clip_id)  # 404 before accepting work
        session_id = uuid.uuid4().hex
        job = self.runner.submit(
            "reconstruct",
            {
                "session_id": session_id,
                "clip_id": clip_id,
                "policy": policy_to_dict(policy),
                "frames_per_clip": frames_per_clip or self.config.frames_per_clip,
            },
        )
        return session_id, job

    def submit_rewrite_start(self, clip_id: str) -> tuple[str, Job]:
        self.load_clip(clip_id)
        rewrite_id = uuid.uuid4().hex
        job = self.runner.submit(
            "reconstruct",
            {
                "session_id": rewrite_id,
                "clip_id": clip_id,
                "rewrite": True,
                "iterations": self.config.probe_iterations,
                "frames_per_clip": self.config.frames_per_clip,
            },
        )
        return rewrite_id, job

    def submit_assist(self, rewrite_id: str, goal: str) -> Job:
        if not goal.strip():
            raise ValidationError("goal", "must be non-empty")
        self.sessions.load_rewrite(rewrite_id)  # 404 before accepting
        return self.runner.submit(
            "assist", {"session_id": rewrite_id, "goal": goal}
        )

    def submit_first_frame(self, rewrite_id: str, goal: str) -> Job:
        if not goal.strip():
            raise ValidationError("goal", "must be non-empty")
        self.sessions.load_rewrite(rewrite_id)
        return self.runner.submit(
            "first_frame", {"session_id": rewrite_id, "goal": goal}
        )

    def submit_generate_version(self, rewrite_id: str) -> Job:
        self.sessions.load_rewrite(rewrite_id)
        return self.runner.submit("generate_version", {"session_id": rewrite_id})

    # -- synchronous mutations ------------------------------------------------

    def edit_prompt(self, rewrite_id: str, text: str):
        with self.session_lock(rewrite_id):
            session = self.sessions.load_rewrite(rewrite_id)
            updated = rewrite_ops.edit_prompt(session, text)
            self.sessions.save_rewrite(
                updated, applied_jobs=self.sessions.applied_jobs(rewrite_id)
            )
            return updated

    def revert_first_frame(self, rewrite_id: str):
        with self.session_lock(rewrite_id):
            session = self.sessions.load_rewrite(rewrite_id)
            updated = rewrite_ops.revert_first_frame(session)
            self.sessions.save_rewrite(
                updated, applied_jobs=self.sessions.applied_jobs(rewrite_id)
            )
            return updated

    # -- job execution ----------------------------------------------------------

    def _handle_job(self, job: Job, runner: JobRunner) -> str:
        if job.kind == "reconstruct":
            return self._run_reconstruct(job, runner)
        session_id = job.payload["session_id"]
        with self.session_lock(session_id):
            applied = self.sessions.applied_jobs(session_id)
            if job.id in applied:
                return session_id  # crash-replay of already-applied work
            session = self.sessions.load_rewrite(session_id)
            if job.kind == "generate_version":
                updated = rewrite_ops.generate_version(session, self.adapters)
            elif job.kind == "assist":
                updated = rewrite_ops.request_assist(
                    session, job.payload["goal"], self.adapters
                )
            elif job.kind == "first_frame":
                updated = rewrite_ops.request_first_frame(
                    session, job.payload["goal"], self.adapters
                )
            else:
                raise ValidationError("kind", f"unknown job kind {job.kind}")
            self.sessions.save_rewrite(updated, applied_jobs=applied + [job.id])
        return session_id

    def _run_reconstruct(self, job: Job, runner: JobRunner) -> str:
        payload = job.payload
        session_id = payload["session_id"]
        clip = self.load_clip(payload["clip_id"])
        frames_per_clip = int(payload.get("frames_per_clip", self.config.frames_per_clip))
        is_rewrite = bool(payload.get("rewrite"))
        if is_rewrite:
            iterations = int(payload.get("iterations", self.config.probe_iterations))
            policy = StoppingPolicy(max_iterations=iterations, patience=0)
            recon_id = f"recon-{session_id}"
        else:
            policy = policy_from_dict(payload.get("policy", {}))
            recon_id = session_id

        def checkpoint(snapshot: ReconstructionSession) -> None:
            self.sessions.save_reconstruction(snapshot)
            if runner.stopping:
                raise JobInterrupted()

        if self.sessions.exists(recon_id):
            partial = self.sessions.load_reconstruction(recon_id)
            session = resume(
                partial,
                self.adapters,
                policy,
                frames_per_clip=frames_per_clip,
                checkpoint=checkpoint,
            )
        else:
            session = run_reconstruction(
                clip,
                self.adapters,
                policy,
                frames_per_clip=frames_per_clip,
                session_id=recon_id,
                checkpoint=checkpoint,
            )
        self.sessions.save_reconstruction(session)
        if session.status == STATUS_FAILED:
            raise RuntimeError(session.failure_reason or "reconstruction failed")

        if is_rewrite:
            with self.session_lock(session_id):
                if not self.sessions.exists(session_id):
                    rewrite_session = rewrite_ops.session_from_reconstruction(
                        session, session_id
                    )
                    self.sessions.save_rewrite(rewrite_session, applied_jobs=[job.id])
        return session_id

    # -- read model ----------------------------------------------------------------

    def reconstruction_state(self, session_id: str) -> dict[str, Any]:
        session_doc = (
            self.sessions.load_raw(session_id) if self.sessions.exists(session_id) else None
        )
        jobs = self.jobs.for_session(session_id)
        if session_doc is None and not jobs:
            raise NotFoundError(f"reconstruction {session_id} does not exist")
        from .jobs import job_to_dict

        return {
            "id": session_id,
            "session": session_doc,
            "jobs": [job_to_dict(j) for j in jobs],
        }

    def rewrite_state(self, rewrite_id: str) -> dict[str, Any]:
        doc = None
        if self.sessions.exists(rewrite_id):
            doc = self.sessions.load_raw(rewrite_id)
        recon_id = f"recon-{rewrite_id}"
        recon_doc = (
            self.sessions.load_raw(recon_id) if self.sessions.exists(recon_id) else None
        )
        jobs = self.jobs.for_session(rewrite_id)
        if doc is None and not jobs:
            raise NotFoundError(f"rewrite {rewrite_id} does not exist")
        from .jobs import job_to_dict

        return {
            "id": rewrite_id,
            "session": doc,
            "reconstruction": recon_doc,
            "jobs": [job_to_dict(j) for j in jobs],
        }
