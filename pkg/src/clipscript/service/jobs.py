"""Persistent background job queue.

Jobs live as JSON documents under ``<data_dir>/jobs/<id>.json`` and move
through ``queued -> running -> done | failed``; no other transition exists. A
job that was ``running`` when the process died is picked up again on startup
and re-executed — handlers are resumable/idempotent, so this continues the
work instead of repeating it.

Workers are threads. Graceful shutdown lets the current loop iteration finish
(handlers observe the stop flag at their checkpoint points and raise
:class:`JobInterrupted`), leaving the job ``running`` on disk for the next
start.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

from ..errors import NotFoundError, ValidationError

JOB_KINDS = ("reconstruct", "generate_version", "assist", "first_frame")
JOB_STATES = ("queued", "running", "done", "failed")

_LEGAL_TRANSITIONS = {
    ("queued", "running"),
    ("running", "done"),
    ("running", "failed"),
}


class JobInterrupted(Exception):
    """Raised inside a handler when the runner is shutting down."""


@dataclass(frozen=True)
class Job:
    id: str
    kind: str
    state: str = "queued"
    created_at: float = 0.0
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    result_ref: Optional[str] = None
    error: Optional[str] = None
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in JOB_KINDS:
            raise ValidationError("kind", f"must be one of {JOB_KINDS}")
        if self.state not in JOB_STATES:
            raise ValidationError("state", f"must be one of {JOB_STATES}")
        if self.state == "failed" and not self.error:
            raise ValidationError("error", "failed jobs carry a reason")

    def session_id(self) -> Optional[str]:
        return self.payload.get("session_id")


def transition(job: Job, new_state: str, **changes: Any) -> Job:
    if (job.state, new_state) not in _LEGAL_TRANSITIONS:
        raise ValidationError(
            "state", f"illegal job transition {job.state} -> {new_state}"
        )
    return replace(job, state=new_state, **changes)


def job_to_dict(job: Job) -> dict[str, Any]:
    return {
        "kind_doc": "job",
        "id": job.id,
        "kind": job.kind,
        "state": job.state,
        "created_at": job.created_at,
        "started_at": job.started_at,
        "finished_at": job.finished_at,
        "result_ref": job.result_ref,
        "error": job.error,
        "payload": job.payload,
    }


def job_from_dict(d: dict[str, Any]) -> Job:
    return Job(
        id=d["id"],
        kind=d["kind"],
        state=d["state"],
        created_at=float(d.get("created_at", 0.0)),
        started_at=d.get("started_at"),
        finished_at=d.get("finished_at"),
        result_ref=d.get("result_ref"),
        error=d.get("error"),
        payload=d.get("payload", {}),
    )


class JobStore:
    def __init__(self, root: Path | str) -> None:
        self.dir = Path(root) / "jobs"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, job_id: str) -> Path:
        return self.dir / f"{job_id}.json"

    def save(self, job: Job) -> None:
        with self._lock:
            path = self._path(job.id)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(job_to_dict(job), indent=1), encoding="utf-8")
            tmp.replace(path)

    def load(self, job_id: str) -> Job:
        path = self._path(job_id)
        if not path.exists():
            raise NotFoundError(f"job {job_id} does not exist")
        return job_from_dict(json.loads(path.read_text(encoding="utf-8")))

    def all_jobs(self) -> list[Job]:
        jobs = []
        for path in self.dir.glob("*.json"):
            try:
                jobs.append(job_from_dict(json.loads(path.read_text(encoding="utf-8"))))
            except (json.JSONDecodeError, KeyError):
                continue  # half-written leftovers are not jobs
        return sorted(jobs, key=lambda j: j.created_at)

    def for_session(self, session_id: str) -> list[Job]:
        return [j for j in self.all_jobs() if j.session_id() == session_id]

    def unfinished(self) -> list[Job]:
        return [j for j in self.all_jobs() if j.state in ("queued", "running")]


class JobRunner:
    """Thread-pool runner draining the persistent queue.

    ``handler(job, runner)`` does the work and returns the result reference;
    it may raise :class:`JobInterrupted` after persisting a checkpoint when
    ``runner.stopping`` is set.
    """

    def __init__(
        self,
        store: JobStore,
        handler: Callable[[Job, "JobRunner"], str],
        workers: int = 2,
    ) -> None:
        if workers < 1:
            raise ValidationError("workers", "must be >= 1")
        self.store = store
        self.handler = handler
        self.workers = workers
        self._queue: list[Job] = []
        self._known: set[str] = set()  # ids queued or executing in this process
        self._cond = threading.Condition()
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._idle = threading.Event()
        self._active = 0

    @property
    def stopping(self) -> bool:
        return self._stop.is_set()

    def submit(self, kind: str, payload: dict[str, Any]) -> Job:
        job = Job(id=uuid.uuid4().hex, kind=kind, payload=payload, created_at=time.time())
        self.store.save(job)
        self._enqueue(job)
        return job

    def _enqueue(self, job: Job) -> None:
        with self._cond:
            if job.id in self._known:
                return  # already queued or executing (e.g. submitted pre-start)
            self._known.add(job.id)
            self._queue.append(job)
            self._idle.clear()
            self._cond.notify()

    def start(self) -> None:
        self._stop.clear()
        # Recover accepted work from a previous process: queued jobs go back
        # in line; running jobs were interrupted and resume.
        for job in self.store.unfinished():
            self._enqueue(job)
        for i in range(self.workers):
            t = threading.Thread(target=self._worker, name=f"job-worker-{i}", daemon=True)
            t.start()
            self._threads.append(t)

    def request_stop(self) -> None:
        """Signal shutdown without blocking; running handlers observe the
        flag at their next checkpoint."""
        self._stop.set()
        with self._cond:
            self._cond.notify_all()

    def stop(self) -> None:
        """Graceful: running handlers finish their current iteration."""
        self.request_stop()
        for t in self._threads:
            t.join(timeout=60)
        self._threads.clear()

    def wait_idle(self, timeout: float = 60.0) -> bool:
        """Block until the queue is drained and no handler is active."""
        deadline = time.time() + timeout
        while time.time() < deadline:
            with self._cond:
                if not self._queue and self._active == 0:
                    return True
            time.sleep(0.02)
        return False

    def _worker(self) -> None:
        while True:
            with self._cond:
                while not self._queue and not self._stop.is_set():
                    self._cond.wait(timeout=0.5)
                if self._stop.is_set() and not self._queue:
                    return
                if not self._queue:
                    continue
                job = self._queue.pop(0)
                self._active += 1
            try:
                self._run_one(job)
            finally:
                with self._cond:
                    self._active -= 1

    def _run_one(self, job: Job) -> None:
        if job.state == "queued":
            job = transition(job, "running", started_at=time.time())
            self.store.save(job)
        # (a recovered "running" job stays running; its handler resumes)
        try:
            result_ref = self.handler(job, self)
        except JobInterrupted:
            return  # left running on disk AND in _known; next start resumes it
        except Exception as exc:  # noqa: BLE001 - job boundary
            self.store.save(
                transition(job, "failed", error=str(exc), finished_at=time.time())
            )
            self._forget(job.id)
            return
        self.store.save(
            transition(job, "done", result_ref=result_ref, finished_at=time.time())
        )
        self._forget(job.id)

    def _forget(self, job_id: str) -> None:
        with self._cond:
            self._known.discard(job_id)
