"""Interfaces every model backend implements, plus shared adapter config.

Five model roles (describer, generator, comparator, image editor, embedder)
plus the chat assistant are kept separate even when one hosted model serves
several of them, so backends stay independently swappable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from ..errors import ValidationError
from ..media import MediaService
from ..model import (
    ChatMessage,
    DifferenceReport,
    EmbeddingVector,
    Frame,
    Prompt,
    VideoClip,
)

ADAPTER_KINDS = ("simulation", "remote")


@dataclass(frozen=True)
class AdapterConfig:
    """How to reach (or simulate) a backend.

    Remote configs need an endpoint and the *name* of the environment
    variable holding the credential — never the credential itself.
    Simulation configs need a seed.
    """

    kind: str
    endpoint: Optional[str] = None
    credential_ref: Optional[str] = None
    timeout: float = 30.0
    max_retries: int = 2
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ADAPTER_KINDS:
            raise ValidationError("kind", f"must be one of {ADAPTER_KINDS}")
        if self.timeout <= 0:
            raise ValidationError("timeout", "must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries", "must be >= 0")
        if self.kind == "remote":
            if not self.endpoint:
                raise ValidationError("endpoint", "remote adapters require an endpoint")
            if not self.credential_ref:
                raise ValidationError(
                    "credential_ref", "remote adapters require a credential env var name"
                )
        if self.kind == "simulation" and self.seed is None:
            raise ValidationError("seed", "simulation adapters require a seed")


class Describer(Protocol):
    def initial_prompt(self, clip: VideoClip) -> Prompt:
        """Produce the seed prompt describing ``clip``."""
        ...


class Generator(Protocol):
    def generate(self, prompt: Prompt, first_frame: Frame) -> VideoClip:
        """Synthesize a clip from ``prompt``, conditioned on ``first_frame``."""
        ...


class Comparator(Protocol):
    def compare(
        self, original: VideoClip, generated: VideoClip, current: Prompt
    ) -> DifferenceReport:
        """Diff two clips and propose a revised prompt."""
        ...


class ImageEditor(Protocol):
    def edit(self, base: Frame, instruction: str) -> Frame:
        """Produce a new frame by applying ``instruction`` to ``base``."""
        ...


class Embedder(Protocol):
    def embed(self, frame: Frame) -> EmbeddingVector:
        ...


class ChatAssistant(Protocol):
    def assist(self, transcript: Sequence[ChatMessage]) -> ChatMessage:
        """Answer the transcript's last user message."""
        ...


def validate_transcript(transcript: Sequence[ChatMessage]) -> None:
    """Shared chat precondition: non-empty, user speaks last."""
    if not transcript:
        raise ValidationError("transcript", "must be non-empty")
    if transcript[-1].role != "user":
        raise ValidationError("transcript", "last message must be from the user")


@dataclass
class AdapterSet:
    """Everything the loop engine and the rewrite workflow need to run."""

    describer: Describer
    generator: Generator
    comparator: Comparator
    image_editor: ImageEditor
    embedder: Embedder
    chat: ChatAssistant
    media: MediaService
    generator_max_seconds: float = field(default=8.0)
