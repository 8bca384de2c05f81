"""HTTP adapter family for hosted model backends.

Wire format: one JSON document per call, POSTed to ``{endpoint}/v1/{role}``.
Media never travels inline in the request document — blobs are pre-uploaded
with ``PUT {endpoint}/media/{digest}`` and referenced by digest and slot name.
Responses carry ``text`` for language roles, ``embedding`` for the embedder,
and either ``media_digest`` (fetched back via ``GET {endpoint}/media/...``)
or ``media_b64`` for generative roles.

Credentials are read from the environment variable *named* in the adapter
config, never stored. Transient failures (transport errors, timeouts, 429,
5xx) retry with jittered exponential backoff up to ``max_retries``; every
logical request carries one fresh idempotency key that is reused across its
retries so the backend can deduplicate non-idempotent generation work.
"""

from __future__ import annotations

import base64
import os
import random
import time
import uuid
from typing import Callable, Optional, Sequence

import httpx
import numpy as np

from ..errors import (
    AdapterUnavailableError,
    ContentPolicyError,
    MalformedResponseError,
    ValidationError,
)
from ..media import MediaService
from ..model import (
    ChatMessage,
    DifferenceReport,
    Discrepancy,
    DISCREPANCY_CATEGORIES,
    EmbeddingVector,
    Frame,
    PROV_INITIAL,
    PROV_REFINED,
    Prompt,
    VideoClip,
)
from ..prompts import ANALYSIS_FPS, initial_instruction
from .base import AdapterConfig, AdapterSet, validate_transcript

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}
_BACKOFF_BASE = 0.25
_BACKOFF_CAP = 8.0

ROLES = ("describer", "generator", "comparator", "image_editor", "embedder", "chat")


class RemoteBackendClient:
    """Shared transport for one role: auth, retries, media handles."""

    def __init__(
        self,
        role: str,
        config: AdapterConfig,
        media: MediaService,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        max_inflight: int = 4,
    ) -> None:
        if config.kind != "remote":
            raise ValidationError("kind", "remote client requires a remote config")
        credential = os.environ.get(config.credential_ref or "")
        if not credential:
            raise ValidationError(
                "credential_ref",
                f"environment variable {config.credential_ref} is not set",
            )
        self.role = role
        self.config = config
        self.media = media
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=config.endpoint,
            timeout=config.timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {credential}"},
        )
        import threading

        self._inflight = threading.Semaphore(max_inflight)

    def upload(self, digest: str) -> dict:
        """Ensure the blob is available backend-side; returns its handle."""
        data = self.media.get(digest)
        resp = self._request("PUT", f"/media/{digest}", content=data)
        if resp.status_code >= 400:
            raise AdapterUnavailableError(
                f"{self.role}: media upload failed with status {resp.status_code}"
            )
        return {"digest": digest}

    def invoke(self, body: dict, media_slots: Optional[dict[str, str]] = None) -> dict:
        """POST one call document; uploads referenced media first."""
        refs = []
        for slot, digest in (media_slots or {}).items():
            self.upload(digest)
            refs.append({"slot": slot, "digest": digest})
        document = {"role": self.role, **body}
        if refs:
            document["media"] = refs
        resp = self._request("POST", f"/v1/{self.role}", json=document)
        if resp.status_code == 403 or resp.status_code == 451:
            raise ContentPolicyError(
                f"{self.role}: request rejected by the backend's content policy"
            )
        if resp.status_code >= 400:
            raise MalformedResponseError(
                f"{self.role}: backend answered {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{self.role}: response is not JSON") from exc
        if not isinstance(payload, dict):
            raise MalformedResponseError(f"{self.role}: response is not an object")
        return payload

    def fetch_media(self, digest: str) -> bytes:
        resp = self._request("GET", f"/media/{digest}")
        if resp.status_code >= 400:
            raise MalformedResponseError(
                f"{self.role}: backend media {digest} not retrievable "
                f"(status {resp.status_code})"
            )
        return resp.content

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        # One idempotency key per logical request, reused across its retries.
        headers = dict(kwargs.pop("headers", {}))
        headers["Idempotency-Key"] = uuid.uuid4().hex
        last_error: Optional[Exception] = None
        with self._inflight:
            for attempt in range(self.config.max_retries + 1):
                if attempt > 0:
                    delay = min(_BACKOFF_CAP, _BACKOFF_BASE * (2 ** (attempt - 1)))
                    self._sleep(delay + random.uniform(0, _BACKOFF_BASE))
                try:
                    resp = self._client.request(method, path, headers=headers, **kwargs)
                except httpx.TransportError as exc:
                    last_error = exc
                    continue
                if resp.status_code in _RETRYABLE_STATUS:
                    last_error = AdapterUnavailableError(
                        f"{self.role}: backend answered {resp.status_code}"
                    )
                    continue
                return resp
        raise AdapterUnavailableError(
            f"{self.role}: backend unreachable after "
            f"{self.config.max_retries + 1} attempts: {last_error}"
        )

    def close(self) -> None:
        self._client.close()


def _require_text(payload: dict, role: str) -> str:
    text = payload.get("text")
    if not isinstance(text, str) or not text.strip():
        raise MalformedResponseError(f"{role}: backend reply has no usable text")
    return text


class RemoteDescriber:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def initial_prompt(self, clip: VideoClip) -> Prompt:
        payload = self.client.invoke(
            {
                "instruction": initial_instruction(clip.duration),
                "params": {"analysis_fps": ANALYSIS_FPS},
            },
            media_slots={"video": clip.media_ref},
        )
        return Prompt(text=_require_text(payload, "describer"), provenance=PROV_INITIAL)


class RemoteGenerator:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def generate(self, prompt: Prompt, first_frame: Frame) -> VideoClip:
        frame_ref = self.client.media.put_frame(first_frame.pixels)
        payload = self.client.invoke(
            {"prompt": prompt.text},
            media_slots={"first_frame": frame_ref},
        )
        if "media_digest" in payload:
            data = self.client.fetch_media(str(payload["media_digest"]))
        elif "media_b64" in payload:
            data = base64.b64decode(payload["media_b64"])
        else:
            raise MalformedResponseError("generator: reply carries no media")
        return self.client.media.ingest_clip(data)


class RemoteComparator:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def compare(
        self, original: VideoClip, generated: VideoClip, current: Prompt
    ) -> DifferenceReport:
        payload = self.client.invoke(
            {"prompt": current.text},
            media_slots={"original": original.media_ref, "generated": generated.media_ref},
        )
        revised = payload.get("revised_prompt")
        if not isinstance(revised, str) or not revised.strip():
            raise MalformedResponseError("comparator: reply has no revised prompt")
        discrepancies = []
        for item in payload.get("discrepancies", []):
            if not isinstance(item, dict):
                continue
            category = str(item.get("category", "other")).strip().lower()
            if category not in DISCREPANCY_CATEGORIES:
                category = "other"  # free-text categories map into the closed set
            discrepancies.append(
                Discrepancy(category=category, description=str(item.get("description", "")))
            )
        return DifferenceReport(
            discrepancies=tuple(discrepancies),
            revised_prompt=Prompt(text=revised, provenance=PROV_REFINED),
        )


class RemoteImageEditor:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def edit(self, base: Frame, instruction: str) -> Frame:
        if not instruction.strip():
            raise ValidationError("instruction", "must be non-empty")
        frame_ref = self.client.media.put_frame(base.pixels)
        payload = self.client.invoke(
            {"instruction": instruction},
            media_slots={"base": frame_ref},
        )
        if "media_digest" in payload:
            data = self.client.fetch_media(str(payload["media_digest"]))
        elif "media_b64" in payload:
            data = base64.b64decode(payload["media_b64"])
        else:
            raise MalformedResponseError("image_editor: reply carries no media")
        ref = self.client.media.put(data)
        return Frame(timestamp=0.0, pixels=self.client.media.get_frame(ref))


class RemoteEmbedder:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def embed(self, frame: Frame) -> EmbeddingVector:
        frame_ref = self.client.media.put_frame(frame.pixels)
        payload = self.client.invoke({}, media_slots={"frame": frame_ref})
        vector = payload.get("embedding")
        if not isinstance(vector, list) or not vector:
            raise MalformedResponseError("embedder: reply carries no embedding")
        arr = np.asarray(vector, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or not np.any(arr):
            raise MalformedResponseError("embedder: embedding is degenerate")
        return EmbeddingVector(components=arr, dimension=arr.shape[0])


class RemoteChat:
    def __init__(self, client: RemoteBackendClient) -> None:
        self.client = client

    def assist(self, transcript: Sequence[ChatMessage]) -> ChatMessage:
        validate_transcript(transcript)
        payload = self.client.invoke(
            {"transcript": [{"role": m.role, "text": m.text} for m in transcript]}
        )
        return ChatMessage(role="assistant", text=_require_text(payload, "chat"))


def build_remote_adapters(
    media: MediaService,
    config: AdapterConfig,
    per_role: Optional[dict[str, AdapterConfig]] = None,
    transport: Optional[httpx.BaseTransport] = None,
    sleep: Callable[[float], None] = time.sleep,
    max_inflight: int = 4,
) -> AdapterSet:
    """Wire the six remote roles; ``per_role`` overrides the shared endpoint
    preset for individual roles. ``max_inflight`` bounds concurrent requests
    per role endpoint."""
    per_role = per_role or {}

    def client(role: str) -> RemoteBackendClient:
        return RemoteBackendClient(
            role,
            per_role.get(role, config),
            media,
            transport=transport,
            sleep=sleep,
            max_inflight=max_inflight,
        )

    return AdapterSet(
        describer=RemoteDescriber(client("describer")),
        generator=RemoteGenerator(client("generator")),
        comparator=RemoteComparator(client("comparator")),
        image_editor=RemoteImageEditor(client("image_editor")),
        embedder=RemoteEmbedder(client("embedder")),
        chat=RemoteChat(client("chat")),
        media=media,
    )
