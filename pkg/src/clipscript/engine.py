"""The closed reconstruction loop: describe, generate, score, refine, stop.

Each iteration generates a clip from the current prompt (conditioned on the
source's first frame), scores it against the source with frame-aligned
similarity, and — unless this iteration is the last — asks the comparator for
a revised prompt. The session keeps one record per iteration; the best prompt
is the earliest maximal-score record's.

The loop is strictly sequential within a session (each iteration consumes the
previous revised prompt); distinct sessions share no state.
"""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Callable, Optional

from .adapters.base import AdapterSet
from .errors import (
    AdapterError,
    DegenerateEmbeddingError,
    MediaError,
    UnrecoverableSessionError,
    ValidationError,
)
from .model import (
    IterationRecord,
    Prompt,
    ReconstructionSession,
    STATUS_CONVERGED,
    STATUS_FAILED,
    STATUS_MAX_REACHED,
    STATUS_RUNNING,
    StoppingPolicy,
    VideoClip,
    earliest_argmax,
)
from .similarity import DEFAULT_FRAMES_PER_CLIP, frame_aligned_similarity

# Iteration count used when a rewrite session bootstraps itself.
PROBE_ITERATIONS = 6

ProgressSink = Callable[[IterationRecord], None]
Checkpoint = Callable[[ReconstructionSession], None]

_LOOP_FAILURES = (AdapterError, DegenerateEmbeddingError, MediaError)


def _last_improvement(scores: list[float], min_delta: float) -> int:
    """1-based index of the last iteration that raised the best score by more
    than ``min_delta``. The first iteration always counts (it set the bar)."""
    best = scores[0]
    last = 1
    for j in range(1, len(scores)):
        if scores[j] > best + min_delta:
            last = j + 1
        if scores[j] > best:
            best = scores[j]
    return last


def _should_converge(scores: list[float], policy: StoppingPolicy) -> bool:
    if policy.patience <= 0:
        return False
    i = len(scores)
    best_index = earliest_argmax(scores)
    if i - best_index < policy.patience:
        return False
    return i - _last_improvement(scores, policy.min_delta) >= policy.patience


def _finalize(
    session: ReconstructionSession,
    records: list[IterationRecord],
    status: str,
    failure_reason: Optional[str] = None,
) -> ReconstructionSession:
    scores = [r.score.value for r in records]
    return replace(
        session,
        records=tuple(records),
        best_index=earliest_argmax(scores) if scores else 0,
        status=status,
        failure_reason=failure_reason,
    )


def _run_loop(
    session: ReconstructionSession,
    next_prompt: Prompt,
    adapters: AdapterSet,
    policy: StoppingPolicy,
    progress_sink: Optional[ProgressSink],
    frames_per_clip: int,
    clock: Callable[[], float],
    checkpoint: Optional[Checkpoint],
) -> ReconstructionSession:
    records = list(session.records)
    prompt = next_prompt
    while True:
        index = len(records) + 1
        started = clock()
        try:
            generated = adapters.generator.generate(prompt, session.first_frame)
            score = frame_aligned_similarity(
                session.source_clip,
                generated,
                adapters.embedder,
                frames_per_clip,
                media=adapters.media,
            )
        except _LOOP_FAILURES as exc:
            return _finalize(session, records, STATUS_FAILED, str(exc))

        scores = [r.score.value for r in records] + [score.value]
        converged = _should_converge(scores, policy)
        stopping = converged or index >= policy.max_iterations

        report = None
        if not stopping:
            try:
                report = adapters.comparator.compare(
                    session.source_clip, generated, prompt
                )
            except _LOOP_FAILURES as exc:
                records.append(
                    IterationRecord(
                        index=index,
                        prompt=prompt,
                        generated_clip=generated,
                        score=score,
                        report=None,
                        wall_time=clock() - started,
                    )
                )
                return _finalize(session, records, STATUS_FAILED, str(exc))

        record = IterationRecord(
            index=index,
            prompt=prompt,
            generated_clip=generated,
            score=score,
            report=report,
            wall_time=clock() - started,
        )
        records.append(record)
        if progress_sink is not None:
            progress_sink(record)
        if checkpoint is not None:
            checkpoint(_finalize(session, records, STATUS_RUNNING))

        if stopping:
            return _finalize(
                session,
                records,
                STATUS_CONVERGED if converged else STATUS_MAX_REACHED,
            )
        prompt = replace(report.revised_prompt, refined_iteration=index)


def run_reconstruction(
    clip: VideoClip,
    adapters: AdapterSet,
    policy: StoppingPolicy = StoppingPolicy(),
    progress_sink: Optional[ProgressSink] = None,
    *,
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP,
    clock: Callable[[], float] = time.perf_counter,
    session_id: Optional[str] = None,
    checkpoint: Optional[Checkpoint] = None,
) -> ReconstructionSession:
    """Run the full loop on ``clip`` and return the completed session.

    Adapter failures do not raise: the session comes back with status
    ``failed`` and all completed records preserved. ``progress_sink`` fires
    once per completed iteration with the fresh record; ``checkpoint``
    receives a running-session snapshot after each record for persistence.
    """
    if clip.duration > adapters.generator_max_seconds:
        raise ValidationError(
            "duration",
            f"clip is {clip.duration} s but the generator supports at most "
            f"{adapters.generator_max_seconds} s",
        )
    if frames_per_clip < 1:
        raise ValidationError("frames_per_clip", "must be >= 1")

    first_frame = adapters.media.frame_at(clip, 0.0)
    session = ReconstructionSession(
        id=session_id or f"recon-{clip.id[:16]}",
        source_clip=clip,
        first_frame=first_frame,
        records=(),
        best_index=0,
        status=STATUS_RUNNING,
    )
    try:
        prompt = adapters.describer.initial_prompt(clip)
    except _LOOP_FAILURES as exc:
        return _finalize(session, [], STATUS_FAILED, str(exc))
    return _run_loop(
        session, prompt, adapters, policy, progress_sink, frames_per_clip, clock, checkpoint
    )


def resume(
    session: ReconstructionSession,
    adapters: AdapterSet,
    policy: StoppingPolicy = StoppingPolicy(),
    progress_sink: Optional[ProgressSink] = None,
    *,
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP,
    clock: Callable[[], float] = time.perf_counter,
    checkpoint: Optional[Checkpoint] = None,
) -> ReconstructionSession:
    """Continue an interrupted session from its last complete record.

    With deterministic adapters the result is indistinguishable from an
    uninterrupted run. Completed sessions come back unchanged.
    """
    if session.status in (STATUS_CONVERGED, STATUS_MAX_REACHED):
        return session

    if not adapters.media.exists(session.source_clip.media_ref):
        raise UnrecoverableSessionError(
            f"source media {session.source_clip.media_ref} is missing"
        )

    running = replace(session, status=STATUS_RUNNING, failure_reason=None)
    if not session.records:
        return run_reconstruction(
            session.source_clip,
            adapters,
            policy,
            progress_sink,
            frames_per_clip=frames_per_clip,
            clock=clock,
            session_id=session.id,
            checkpoint=checkpoint,
        )

    records = list(running.records)
    last = records[-1]
    if not adapters.media.exists(last.generated_clip.media_ref):
        raise UnrecoverableSessionError(
            f"generated media for record {last.index} is missing"
        )

    # Re-check the stopping rule: the interruption may have landed exactly on
    # a boundary the original process never got to act on.
    scores = [r.score.value for r in records]
    if _should_converge(scores, policy):
        return _finalize(running, records, STATUS_CONVERGED)
    if len(records) >= policy.max_iterations:
        return _finalize(running, records, STATUS_MAX_REACHED)

    if last.report is None:
        # Interrupted between scoring and comparison: redo the comparison
        # (deterministic adapters reproduce it exactly) and complete the record.
        try:
            report = adapters.comparator.compare(
                running.source_clip, last.generated_clip, last.prompt
            )
        except _LOOP_FAILURES as exc:
            return _finalize(running, records, STATUS_FAILED, str(exc))
        records[-1] = replace(last, report=report)
        running = _finalize(running, records, STATUS_RUNNING)

    next_prompt = replace(
        records[-1].report.revised_prompt, refined_iteration=records[-1].index
    )
    return _run_loop(
        running, next_prompt, adapters, policy, progress_sink, frames_per_clip, clock, checkpoint
    )


def fixed_iterations(
    clip: VideoClip,
    adapters: AdapterSet,
    k: int = PROBE_ITERATIONS,
    progress_sink: Optional[ProgressSink] = None,
    *,
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP,
    clock: Callable[[], float] = time.perf_counter,
    session_id: Optional[str] = None,
    checkpoint: Optional[Checkpoint] = None,
) -> ReconstructionSession:
    """Run exactly ``k`` iterations with early stopping disabled."""
    if k < 1:
        raise ValidationError("k", "must be >= 1")
    policy = StoppingPolicy(max_iterations=k, patience=0)
    return run_reconstruction(
        clip,
        adapters,
        policy,
        progress_sink,
        frames_per_clip=frames_per_clip,
        clock=clock,
        session_id=session_id,
        checkpoint=checkpoint,
    )
