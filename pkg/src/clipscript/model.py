"""Shared domain types and their invariants.

Pure data: no I/O and no model calls. Every type validates its invariants at
construction and raises :class:`~clipscript.errors.ValidationError` naming the
violated field. All types are immutable after construction and safe to share
between threads.

Serialization: each type has ``*_to_dict`` / ``*_from_dict`` helpers producing
a self-describing JSON document. Pixel buffers are never inlined — types that
carry frames serialize them through a :class:`FrameStore`, storing a
content-addressed reference only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import InitVar, dataclass, field, replace
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from .errors import ValidationError

# Generator clip-length ceiling, seconds. Deployments with a different
# backend limit pass their own value where clips are constructed.
DEFAULT_MAX_CLIP_SECONDS = 8.0

# Prompt provenance values.
PROV_INITIAL = "initial"
PROV_REFINED = "refined"
PROV_USER_EDITED = "user_edited"
PROV_ASSISTANT_SUGGESTED = "assistant_suggested"
PROVENANCE_KINDS = (
    PROV_INITIAL,
    PROV_REFINED,
    PROV_USER_EDITED,
    PROV_ASSISTANT_SUGGESTED,
)

# Closed category set for difference-report discrepancies.
DISCREPANCY_CATEGORIES = (
    "object",
    "color",
    "lighting",
    "composition",
    "motion",
    "pacing",
    "other",
)

# Session status values.
STATUS_RUNNING = "running"
STATUS_CONVERGED = "converged"
STATUS_MAX_REACHED = "max_reached"
STATUS_FAILED = "failed"
SESSION_STATUSES = (STATUS_RUNNING, STATUS_CONVERGED, STATUS_MAX_REACHED, STATUS_FAILED)

CHAT_ROLES = ("user", "assistant")


class FrameStore(Protocol):
    """Sink/source for frame pixel buffers used during (de)serialization."""

    def put_frame(self, pixels: np.ndarray) -> str:
        """Persist a pixel buffer, return its content-addressed reference."""
        ...

    def get_frame(self, ref: str) -> np.ndarray:
        """Load the pixel buffer stored under ``ref``."""
        ...


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ValidationError(field_name, message)


@dataclass(frozen=True)
class VideoClip:
    """Reference to one stored clip plus its probed geometry."""

    id: str
    media_ref: str
    duration: float
    native_fps: float
    width: int
    height: int
    max_duration: InitVar[float] = DEFAULT_MAX_CLIP_SECONDS

    def __post_init__(self, max_duration: float) -> None:
        _require(bool(self.id), "id", "must be non-empty")
        _require(bool(self.media_ref), "media_ref", "must be non-empty")
        _require(self.duration > 0, "duration", "must be > 0")
        _require(
            self.duration <= max_duration,
            "duration",
            f"must be <= generator maximum of {max_duration} s, got {self.duration}",
        )
        _require(self.native_fps > 0, "native_fps", "must be > 0")
        _require(self.width > 0, "width", "must be > 0")
        _require(self.height > 0, "height", "must be > 0")


def pixel_digest(pixels: np.ndarray) -> str:
    """Content digest of a decoded pixel buffer (shape-aware, byte-exact)."""
    h = hashlib.sha256()
    h.update(repr(pixels.shape).encode())
    h.update(str(pixels.dtype).encode())
    h.update(np.ascontiguousarray(pixels).tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class Frame:
    """One decoded frame: a timestamp and its pixel buffer.

    Buffers are (height, width, 3) uint8 and treated as immutable; the
    constructor sets the array read-only.
    """

    timestamp: float
    pixels: np.ndarray
    clip_duration: InitVar[Optional[float]] = None

    def __post_init__(self, clip_duration: Optional[float]) -> None:
        _require(self.timestamp >= 0, "timestamp", "must be >= 0")
        if clip_duration is not None:
            _require(
                self.timestamp <= clip_duration,
                "timestamp",
                f"must be <= clip duration {clip_duration}",
            )
        px = self.pixels
        _require(
            isinstance(px, np.ndarray) and px.ndim == 3 and px.shape[2] == 3,
            "pixels",
            "must be an (h, w, 3) array",
        )
        _require(px.dtype == np.uint8, "pixels", "must be uint8")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.timestamp == other.timestamp and np.array_equal(
            self.pixels, other.pixels
        )

    def __hash__(self) -> int:
        return hash((self.timestamp, self.digest))

    @property
    def digest(self) -> str:
        return pixel_digest(self.pixels)


@dataclass(frozen=True)
class Prompt:
    """Editable prompt text with provenance.

    ``refined_iteration`` is set only for ``refined`` provenance and names the
    loop iteration whose comparison produced the text; it may be ``None`` when
    the refinement is not yet attributed to an iteration.
    """

    text: str
    provenance: str = PROV_INITIAL
    refined_iteration: Optional[int] = None
    created_at: float = 0.0

    def __post_init__(self) -> None:
        _require(bool(self.text.strip()), "text", "must be non-empty after trimming")
        _require(
            self.provenance in PROVENANCE_KINDS,
            "provenance",
            f"must be one of {PROVENANCE_KINDS}",
        )
        if self.refined_iteration is not None:
            _require(
                self.provenance == PROV_REFINED,
                "refined_iteration",
                "only refined prompts carry an iteration index",
            )
            _require(self.refined_iteration >= 1, "refined_iteration", "must be >= 1")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Fixed-length finite vector; all vectors compared together share one
    dimension."""

    components: np.ndarray
    dimension: int = 512

    def __post_init__(self) -> None:
        comps = np.asarray(self.components, dtype=np.float64)
        _require(comps.ndim == 1, "components", "must be 1-D")
        _require(
            comps.shape[0] == self.dimension,
            "components",
            f"length {comps.shape[0]} != dimension {self.dimension}",
        )
        _require(bool(np.all(np.isfinite(comps))), "components", "must be finite")
        comps = np.ascontiguousarray(comps)
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.dimension == other.dimension and np.array_equal(
            self.components, other.components
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.components.tobytes()))


@dataclass(frozen=True)
class SimilarityScore:
    value: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.value), "value", "must be finite")
        _require(-1.0 <= self.value <= 1.0, "value", "must be within [-1, 1]")


@dataclass(frozen=True)
class Discrepancy:
    category: str
    description: str

    def __post_init__(self) -> None:
        _require(
            self.category in DISCREPANCY_CATEGORIES,
            "category",
            f"must be one of {DISCREPANCY_CATEGORIES}",
        )


@dataclass(frozen=True)
class DifferenceReport:
    """Structured discrepancies between original and generated video plus the
    revised prompt for the next cycle."""

    discrepancies: tuple[Discrepancy, ...]
    revised_prompt: Prompt

    def __post_init__(self) -> None:
        object.__setattr__(self, "discrepancies", tuple(self.discrepancies))
        _require(
            self.revised_prompt.provenance == PROV_REFINED,
            "revised_prompt",
            "must carry refined provenance",
        )


@dataclass(frozen=True)
class StoppingPolicy:
    """Early-stopping rule: halt after ``patience`` iterations without the
    best score improving by more than ``min_delta``. ``patience`` 0 disables
    early stopping entirely (run to ``max_iterations``)."""

    max_iterations: int = 10
    patience: int = 2
    min_delta: float = 0.0

    def __post_init__(self) -> None:
        _require(self.max_iterations >= 1, "max_iterations", "must be >= 1")
        _require(self.patience >= 0, "patience", "must be >= 0")
        _require(self.min_delta >= 0, "min_delta", "must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    """One generate/score/refine cycle. ``report`` is absent only on the
    final recorded iteration of a session."""

    index: int
    prompt: Prompt
    generated_clip: VideoClip
    score: SimilarityScore
    report: Optional[DifferenceReport] = None
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        _require(self.index >= 1, "index", "must be >= 1")
        _require(self.wall_time >= 0, "wall_time", "must be >= 0")


def earliest_argmax(scores: Sequence[float]) -> int:
    """1-based index of the first occurrence of the maximum (first-peak
    tie-breaking)."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best + 1


@dataclass(frozen=True)
class ReconstructionSession:
    """Full history of one reconstruction loop.

    Invariants enforced here: record indices contiguous from 1; ``best_index``
    is the earliest maximal-score record; only the final record may lack a
    report. The relationship between ``status`` and the stopping policy is the
    engine's contract.
    """

    id: str
    source_clip: VideoClip
    first_frame: Frame
    records: tuple[IterationRecord, ...] = ()
    best_index: int = 0
    status: str = STATUS_RUNNING
    failure_reason: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        _require(bool(self.id), "id", "must be non-empty")
        _require(
            self.status in SESSION_STATUSES,
            "status",
            f"must be one of {SESSION_STATUSES}",
        )
        if self.status == STATUS_FAILED:
            _require(bool(self.failure_reason), "failure_reason", "required when failed")
        else:
            _require(
                self.failure_reason is None,
                "failure_reason",
                "only failed sessions carry a reason",
            )
        for pos, rec in enumerate(self.records):
            _require(
                rec.index == pos + 1,
                "records",
                f"indices must be contiguous from 1; found {rec.index} at position {pos}",
            )
            if pos < len(self.records) - 1:
                _require(
                    rec.report is not None,
                    "records",
                    f"record {rec.index} lacks a report but is not the final record",
                )
        if self.records:
            expected = earliest_argmax([r.score.value for r in self.records])
            _require(
                self.best_index == expected,
                "best_index",
                f"must be the earliest maximal-score index {expected}, got {self.best_index}",
            )
        else:
            _require(self.best_index == 0, "best_index", "must be 0 with no records")

    @property
    def score_trace(self) -> "ScoreTrace":
        return ScoreTrace(
            clip_id=self.source_clip.id,
            scores=tuple(r.score.value for r in self.records),
        )

    @property
    def best_prompt(self) -> Prompt:
        if not self.records:
            raise ValidationError("records", "session has no records yet")
        return self.records[self.best_index - 1].prompt


@dataclass(frozen=True)
class ScoreTrace:
    """Per-clip similarity scores, one per iteration."""

    clip_id: str
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        _require(len(self.scores) >= 1, "scores", "must be non-empty")
        for s in self.scores:
            _require(math.isfinite(s), "scores", "must be finite")
            _require(-1.0 <= s <= 1.0, "scores", "must be within [-1, 1]")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str

    def __post_init__(self) -> None:
        _require(self.role in CHAT_ROLES, "role", f"must be one of {CHAT_ROLES}")
        _require(bool(self.text.strip()), "text", "must be non-empty")


@dataclass(frozen=True)
class RewriteVersion:
    """Immutable snapshot taken at generation time; never mutated after
    creation."""

    version_index: int
    prompt_snapshot: Prompt
    first_frame_snapshot: Frame
    clip: VideoClip

    def __post_init__(self) -> None:
        _require(self.version_index >= 1, "version_index", "must be >= 1")


@dataclass(frozen=True)
class RewriteSession:
    """Interactive rewrite state: working prompt/frame, assist chat, and the
    append-only list of generated versions.

    ``frame_history`` holds prior working frames, oldest first, so first-frame
    edits can be undone all the way back to the source clip's frame.
    """

    id: str
    source_clip: VideoClip
    working_prompt: Prompt
    working_first_frame: Frame
    reconstruction_id: Optional[str] = None
    chat: tuple[ChatMessage, ...] = ()
    versions: tuple[RewriteVersion, ...] = ()
    frame_history: tuple[Frame, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "chat", tuple(self.chat))
        object.__setattr__(self, "versions", tuple(self.versions))
        object.__setattr__(self, "frame_history", tuple(self.frame_history))
        _require(bool(self.id), "id", "must be non-empty")
        for pos, v in enumerate(self.versions):
            _require(
                v.version_index == pos + 1,
                "versions",
                f"indices must be contiguous from 1; found {v.version_index} at position {pos}",
            )

    def version(self, index: int) -> RewriteVersion:
        for v in self.versions:
            if v.version_index == index:
                return v
        from .errors import NotFoundError

        raise NotFoundError(f"version {index} does not exist")


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def clip_to_dict(clip: VideoClip) -> dict[str, Any]:
    return {
        "id": clip.id,
        "media_ref": clip.media_ref,
        "duration": clip.duration,
        "native_fps": clip.native_fps,
        "width": clip.width,
        "height": clip.height,
    }


def clip_from_dict(d: dict[str, Any]) -> VideoClip:
    return VideoClip(
        id=d["id"],
        media_ref=d["media_ref"],
        duration=float(d["duration"]),
        native_fps=float(d["native_fps"]),
        width=int(d["width"]),
        height=int(d["height"]),
        max_duration=float(d["duration"]),  # stored clips were validated at ingest
    )


def frame_to_dict(frame: Frame, frames: FrameStore) -> dict[str, Any]:
    return {"timestamp": frame.timestamp, "image_ref": frames.put_frame(frame.pixels)}


def frame_from_dict(d: dict[str, Any], frames: FrameStore) -> Frame:
    return Frame(timestamp=float(d["timestamp"]), pixels=frames.get_frame(d["image_ref"]))


def prompt_to_dict(p: Prompt) -> dict[str, Any]:
    return {
        "text": p.text,
        "provenance": p.provenance,
        "refined_iteration": p.refined_iteration,
        "created_at": p.created_at,
    }


def prompt_from_dict(d: dict[str, Any]) -> Prompt:
    return Prompt(
        text=d["text"],
        provenance=d["provenance"],
        refined_iteration=d.get("refined_iteration"),
        created_at=float(d.get("created_at", 0.0)),
    )


def report_to_dict(r: DifferenceReport) -> dict[str, Any]:
    return {
        "discrepancies": [
            {"category": disc.category, "description": disc.description}
            for disc in r.discrepancies
        ],
        "revised_prompt": prompt_to_dict(r.revised_prompt),
    }


def report_from_dict(d: dict[str, Any]) -> DifferenceReport:
    return DifferenceReport(
        discrepancies=tuple(
            Discrepancy(category=x["category"], description=x["description"])
            for x in d["discrepancies"]
        ),
        revised_prompt=prompt_from_dict(d["revised_prompt"]),
    )


def policy_to_dict(p: StoppingPolicy) -> dict[str, Any]:
    return {
        "max_iterations": p.max_iterations,
        "patience": p.patience,
        "min_delta": p.min_delta,
    }


def policy_from_dict(d: dict[str, Any]) -> StoppingPolicy:
    return StoppingPolicy(
        max_iterations=int(d.get("max_iterations", 10)),
        patience=int(d.get("patience", 2)),
        min_delta=float(d.get("min_delta", 0.0)),
    )


def record_to_dict(r: IterationRecord) -> dict[str, Any]:
    return {
        "index": r.index,
        "prompt": prompt_to_dict(r.prompt),
        "generated_clip": clip_to_dict(r.generated_clip),
        "score": r.score.value,
        "report": report_to_dict(r.report) if r.report is not None else None,
        "wall_time": r.wall_time,
    }


def record_from_dict(d: dict[str, Any]) -> IterationRecord:
    return IterationRecord(
        index=int(d["index"]),
        prompt=prompt_from_dict(d["prompt"]),
        generated_clip=clip_from_dict(d["generated_clip"]),
        score=SimilarityScore(float(d["score"])),
        report=report_from_dict(d["report"]) if d.get("report") is not None else None,
        wall_time=float(d.get("wall_time", 0.0)),
    )


def session_to_dict(s: ReconstructionSession, frames: FrameStore) -> dict[str, Any]:
    return {
        "kind": "reconstruction_session",
        "schema": 1,
        "id": s.id,
        "source_clip": clip_to_dict(s.source_clip),
        "first_frame": frame_to_dict(s.first_frame, frames),
        "records": [record_to_dict(r) for r in s.records],
        "best_index": s.best_index,
        "status": s.status,
        "failure_reason": s.failure_reason,
    }


def session_from_dict(d: dict[str, Any], frames: FrameStore) -> ReconstructionSession:
    _require(
        d.get("kind") == "reconstruction_session",
        "kind",
        "document is not a reconstruction session",
    )
    return ReconstructionSession(
        id=d["id"],
        source_clip=clip_from_dict(d["source_clip"]),
        first_frame=frame_from_dict(d["first_frame"], frames),
        records=tuple(record_from_dict(r) for r in d["records"]),
        best_index=int(d["best_index"]),
        status=d["status"],
        failure_reason=d.get("failure_reason"),
    )


def rewrite_to_dict(s: RewriteSession, frames: FrameStore) -> dict[str, Any]:
    return {
        "kind": "rewrite_session",
        "schema": 1,
        "id": s.id,
        "source_clip": clip_to_dict(s.source_clip),
        "reconstruction_id": s.reconstruction_id,
        "working_prompt": prompt_to_dict(s.working_prompt),
        "working_first_frame": frame_to_dict(s.working_first_frame, frames),
        "chat": [{"role": m.role, "text": m.text} for m in s.chat],
        "versions": [
            {
                "version_index": v.version_index,
                "prompt_snapshot": prompt_to_dict(v.prompt_snapshot),
                "first_frame_snapshot": frame_to_dict(v.first_frame_snapshot, frames),
                "clip": clip_to_dict(v.clip),
            }
            for v in s.versions
        ],
        "frame_history": [frame_to_dict(f, frames) for f in s.frame_history],
    }


def rewrite_from_dict(d: dict[str, Any], frames: FrameStore) -> RewriteSession:
    _require(
        d.get("kind") == "rewrite_session", "kind", "document is not a rewrite session"
    )
    return RewriteSession(
        id=d["id"],
        source_clip=clip_from_dict(d["source_clip"]),
        reconstruction_id=d.get("reconstruction_id"),
        working_prompt=prompt_from_dict(d["working_prompt"]),
        working_first_frame=frame_from_dict(d["working_first_frame"], frames),
        chat=tuple(ChatMessage(role=m["role"], text=m["text"]) for m in d["chat"]),
        versions=tuple(
            RewriteVersion(
                version_index=int(v["version_index"]),
                prompt_snapshot=prompt_from_dict(v["prompt_snapshot"]),
                first_frame_snapshot=frame_from_dict(v["first_frame_snapshot"], frames),
                clip=clip_from_dict(v["clip"]),
            )
            for v in d["versions"]
        ),
        frame_history=tuple(frame_from_dict(f, frames) for f in d["frame_history"]),
    )


__all__ = [
    "DEFAULT_MAX_CLIP_SECONDS",
    "PROV_INITIAL",
    "PROV_REFINED",
    "PROV_USER_EDITED",
    "PROV_ASSISTANT_SUGGESTED",
    "PROVENANCE_KINDS",
    "DISCREPANCY_CATEGORIES",
    "STATUS_RUNNING",
    "STATUS_CONVERGED",
    "STATUS_MAX_REACHED",
    "STATUS_FAILED",
    "SESSION_STATUSES",
    "FrameStore",
    "VideoClip",
    "Frame",
    "Prompt",
    "EmbeddingVector",
    "SimilarityScore",
    "Discrepancy",
    "DifferenceReport",
    "StoppingPolicy",
    "IterationRecord",
    "ReconstructionSession",
    "ScoreTrace",
    "ChatMessage",
    "RewriteVersion",
    "RewriteSession",
    "earliest_argmax",
    "pixel_digest",
    "replace",
]
