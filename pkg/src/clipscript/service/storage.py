"""On-disk session documents.

Layout: ``<data_dir>/sessions/<id>.json``, one self-describing JSON document
per session. Pixel buffers go through the media store (written *before* the
document that references them), so documents only ever hold content-addressed
references. Writes are atomic (tmp file + rename).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from ..errors import NotFoundError
from ..model import (
    FrameStore,
    ReconstructionSession,
    RewriteSession,
    rewrite_from_dict,
    rewrite_to_dict,
    session_from_dict,
    session_to_dict,
)


class SessionStore:
    def __init__(self, root: Path | str, frames: FrameStore) -> None:
        self.dir = Path(root) / "sessions"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.frames = frames

    def _path(self, session_id: str) -> Path:
        return self.dir / f"{session_id}.json"

    def _write(self, session_id: str, doc: dict[str, Any]) -> None:
        path = self._path(session_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        tmp.replace(path)

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def load_raw(self, session_id: str) -> dict[str, Any]:
        path = self._path(session_id)
        if not path.exists():
            raise NotFoundError(f"session {session_id} does not exist")
        return json.loads(path.read_text(encoding="utf-8"))

    # -- reconstruction sessions ------------------------------------------

    def save_reconstruction(self, session: ReconstructionSession) -> None:
        self._write(session.id, session_to_dict(session, self.frames))

    def load_reconstruction(self, session_id: str) -> ReconstructionSession:
        return session_from_dict(self.load_raw(session_id), self.frames)

    # -- rewrite sessions ---------------------------------------------------

    def save_rewrite(
        self, session: RewriteSession, applied_jobs: Optional[list[str]] = None
    ) -> None:
        doc = rewrite_to_dict(session, self.frames)
        if applied_jobs is not None:
            # Service-level idempotency marker: job ids whose mutation is
            # already reflected in this document.
            doc["applied_jobs"] = list(applied_jobs)
        self._write(session.id, doc)

    def load_rewrite(self, session_id: str) -> RewriteSession:
        return rewrite_from_dict(self.load_raw(session_id), self.frames)

    def applied_jobs(self, session_id: str) -> list[str]:
        if not self.exists(session_id):
            return []
        return list(self.load_raw(session_id).get("applied_jobs", []))
