"""The rewrite workflow: reverse-engineer, rewrite, generate, compare.

Sessions are immutable values; every operation returns a new session. When an
adapter call fails the exception propagates and the caller keeps the old
session, so failed operations never leave partial state behind.

The generate step never locks or mutates the working prompt/frame —
"returning to rewrite" after a generation is simply continuing to edit.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import replace
from typing import Callable, Optional

from . import prompts
from .adapters.base import AdapterSet
from .engine import PROBE_ITERATIONS, fixed_iterations
from .errors import NotFoundError, ReconstructionFailedError, ValidationError
from .model import (
    ChatMessage,
    PROV_ASSISTANT_SUGGESTED,
    PROV_USER_EDITED,
    Prompt,
    ReconstructionSession,
    RewriteSession,
    RewriteVersion,
    STATUS_FAILED,
    VideoClip,
)
from .similarity import DEFAULT_FRAMES_PER_CLIP

Clock = Callable[[], float]


def start_from_clip(
    clip: VideoClip,
    adapters: AdapterSet,
    *,
    iterations: int = PROBE_ITERATIONS,
    frames_per_clip: int = DEFAULT_FRAMES_PER_CLIP,
    session_id: Optional[str] = None,
    progress_sink=None,
    checkpoint=None,
) -> RewriteSession:
    """Bootstrap a rewrite session by reverse-engineering the clip.

    Runs the reconstruction loop for a fixed number of iterations (six by
    default) and adopts the best prompt and the clip's first frame as the
    working state. The underlying reconstruction is reachable through
    ``reconstruction_id`` when a checkpoint persisted it.
    """
    if clip.duration > adapters.generator_max_seconds:
        raise ValidationError(
            "duration",
            f"clip is {clip.duration} s but the generator supports at most "
            f"{adapters.generator_max_seconds} s",
        )
    recon = fixed_iterations(
        clip,
        adapters,
        iterations,
        progress_sink,
        frames_per_clip=frames_per_clip,
        session_id=f"recon-{session_id}" if session_id else None,
        checkpoint=checkpoint,
    )
    return session_from_reconstruction(recon, session_id)


def session_from_reconstruction(
    recon: ReconstructionSession, session_id: Optional[str] = None
) -> RewriteSession:
    """Adopt a completed reconstruction's best prompt and first frame as the
    working state of a fresh rewrite session."""
    if recon.status == STATUS_FAILED or not recon.records:
        raise ReconstructionFailedError(
            f"reconstruction failed: {recon.failure_reason or 'no records'}"
        )
    return RewriteSession(
        id=session_id or uuid.uuid4().hex,
        source_clip=recon.source_clip,
        reconstruction_id=recon.id,
        working_prompt=recon.best_prompt,
        working_first_frame=recon.first_frame,
        chat=(),
        versions=(),
        frame_history=(),
    )


def edit_prompt(
    session: RewriteSession, new_text: str, *, clock: Clock = time.time
) -> RewriteSession:
    """Replace the working prompt with user-authored text."""
    prompt = Prompt(
        text=new_text, provenance=PROV_USER_EDITED, created_at=clock()
    )
    return replace(session, working_prompt=prompt)


def request_assist(
    session: RewriteSession,
    creative_goal: str,
    adapters: AdapterSet,
    *,
    clock: Clock = time.time,
) -> RewriteSession:
    """Ask the assistant for help rewriting the prompt.

    The first message of a session is the starter scaffold with the goal and
    the current working prompt substituted; later messages send the goal
    verbatim. The working prompt is untouched until the user adopts a
    suggestion.
    """
    if not creative_goal.strip():
        raise ValidationError("creative_goal", "must be non-empty")
    if session.chat:
        outgoing = creative_goal
    else:
        outgoing = prompts.assist_starter(creative_goal, session.working_prompt.text)
    user_msg = ChatMessage(role="user", text=outgoing)
    reply = adapters.chat.assist(list(session.chat) + [user_msg])
    return replace(session, chat=session.chat + (user_msg, reply))


def adopt_suggestion(
    session: RewriteSession, chat_index: int, *, clock: Clock = time.time
) -> RewriteSession:
    """Copy an assistant message into the working prompt."""
    if not 0 <= chat_index < len(session.chat):
        raise NotFoundError(f"chat message {chat_index} does not exist")
    message = session.chat[chat_index]
    if message.role != "assistant":
        raise ValidationError("chat_index", "only assistant messages can be adopted")
    prompt = Prompt(
        text=message.text, provenance=PROV_ASSISTANT_SUGGESTED, created_at=clock()
    )
    return replace(session, working_prompt=prompt)


def request_first_frame(
    session: RewriteSession, creative_goal: str, adapters: AdapterSet
) -> RewriteSession:
    """Replace the working first frame based on a creative goal.

    Sends the first-frame scaffold through the chat backend as a one-off
    exchange (the session's assist chat stays untouched), then applies the
    returned image-editing instruction to the current frame. The prior frame
    goes onto the history stack and remains recoverable.
    """
    if not creative_goal.strip():
        raise ValidationError("creative_goal", "must be non-empty")
    request = ChatMessage(role="user", text=prompts.first_frame_request(creative_goal))
    instruction = adapters.chat.assist([request]).text
    new_frame = adapters.image_editor.edit(session.working_first_frame, instruction)
    return replace(
        session,
        working_first_frame=new_frame,
        frame_history=session.frame_history + (session.working_first_frame,),
    )


def revert_first_frame(session: RewriteSession) -> RewriteSession:
    """Undo the most recent first-frame edit; no-op at the original frame."""
    if not session.frame_history:
        return session
    return replace(
        session,
        working_first_frame=session.frame_history[-1],
        frame_history=session.frame_history[:-1],
    )


def generate_version(session: RewriteSession, adapters: AdapterSet) -> RewriteSession:
    """Generate a clip from the working state and append it as an immutable
    version. The working state itself is unchanged."""
    clip = adapters.generator.generate(
        session.working_prompt, session.working_first_frame
    )
    version = RewriteVersion(
        version_index=len(session.versions) + 1,
        prompt_snapshot=session.working_prompt,
        first_frame_snapshot=session.working_first_frame,
        clip=clip,
    )
    return replace(session, versions=session.versions + (version,))


def compare_versions(
    session: RewriteSession, a: int, b: int
) -> tuple[RewriteVersion, RewriteVersion]:
    """Both versions' snapshots, without mutation."""
    return session.version(a), session.version(b)
