"""Content-addressed media storage and clip decoding.

Two media families are understood:

* **sceneclip** — the synthetic format produced by the simulation world: a
  small canonical JSON header describing a scene; frames are rendered on
  decode, so identical headers are byte-identical media.
* **container video** (mp4 and friends) — probed and decoded through an
  external extractor (ffprobe/ffmpeg) invoked as a subprocess. The extractor
  is optional at construction; deployments that only handle sceneclips never
  need it.

Identity is the SHA-256 of the stored bytes; uploading the same bytes twice
yields the same object. Frames persist as PNG (lossless) in the same store.
"""

from __future__ import annotations

import hashlib
import io
import json
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import scene as scene_mod
from .errors import (
    MediaError,
    MediaTooLargeError,
    NotFoundError,
    UnsupportedMediaError,
    ValidationError,
)
from .model import DEFAULT_MAX_CLIP_SECONDS, Frame, VideoClip

SCENECLIP_FORMAT = "sceneclip.v1"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

DEFAULT_MAX_UPLOAD_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class MediaInfo:
    duration: float
    fps: float
    width: int
    height: int


def encode_scene_clip(
    scn: scene_mod.SyntheticScene,
    duration: float = scene_mod.DEFAULT_DURATION,
    fps: float = scene_mod.DEFAULT_FPS,
    width: int = scene_mod.DEFAULT_WIDTH,
    height: int = scene_mod.DEFAULT_HEIGHT,
) -> bytes:
    """Canonical sceneclip bytes; equal inputs give equal bytes."""
    doc = {
        "format": SCENECLIP_FORMAT,
        "scene": scn.to_mapping(),
        "duration": duration,
        "fps": fps,
        "width": width,
        "height": height,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def parse_scene_clip(data: bytes) -> Optional[dict]:
    """Header dict if the bytes are a sceneclip, else None."""
    if not data or data[:1] != b"{":
        return None
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if isinstance(doc, dict) and doc.get("format") == SCENECLIP_FORMAT:
        return doc
    return None


class SceneClipReader:
    """Render-on-decode reader for sceneclip media."""

    def __init__(self, header: dict) -> None:
        try:
            self.scene = scene_mod.SyntheticScene.from_mapping(header["scene"])
            self.duration = float(header["duration"])
            self.fps = float(header["fps"])
            self.width = int(header["width"])
            self.height = int(header["height"])
        except (KeyError, TypeError, ValidationError) as exc:
            raise UnsupportedMediaError(f"malformed sceneclip header: {exc}") from exc
        if self.duration <= 0 or self.fps <= 0:
            raise UnsupportedMediaError("sceneclip header has non-positive duration/fps")
        self.frame_count = max(1, int(round(self.duration * self.fps)))

    def info(self) -> MediaInfo:
        return MediaInfo(self.duration, self.fps, self.width, self.height)

    def frame_at(self, t: float) -> Frame:
        idx = min(self.frame_count - 1, max(0, int(t * self.fps + 0.5)))
        pixels = scene_mod.render_frame(self.scene, idx, self.width, self.height)
        return Frame(
            timestamp=idx / self.fps,
            pixels=pixels,
            clip_duration=self.duration,
        )


class ExternalFrameExtractor:
    """Subprocess wrapper around ffprobe/ffmpeg for container video."""

    def __init__(
        self,
        ffprobe: str = "ffprobe",
        ffmpeg: str = "ffmpeg",
        timeout: float = 30.0,
    ) -> None:
        self.ffprobe = ffprobe
        self.ffmpeg = ffmpeg
        self.timeout = timeout

    def available(self) -> bool:
        return shutil.which(self.ffprobe) is not None and shutil.which(self.ffmpeg) is not None

    def probe(self, path: Path) -> MediaInfo:
        cmd = [
            self.ffprobe,
            "-v", "error",
            "-print_format", "json",
            "-show_format",
            "-show_streams",
            str(path),
        ]
        out = self._run(cmd)
        try:
            doc = json.loads(out)
            stream = next(
                s for s in doc.get("streams", []) if s.get("codec_type") == "video"
            )
            num, _, den = str(stream.get("r_frame_rate", "0/1")).partition("/")
            fps = float(num) / float(den or 1)
            duration = float(
                stream.get("duration") or doc.get("format", {}).get("duration")
            )
            return MediaInfo(
                duration=duration,
                fps=fps,
                width=int(stream["width"]),
                height=int(stream["height"]),
            )
        except (StopIteration, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise UnsupportedMediaError(f"probe produced no usable video stream: {exc}") from exc

    def frame_at(self, path: Path, t: float, width: int, height: int) -> np.ndarray:
        cmd = [
            self.ffmpeg,
            "-v", "error",
            "-ss", f"{max(0.0, t):.6f}",
            "-i", str(path),
            "-frames:v", "1",
            "-f", "rawvideo",
            "-pix_fmt", "rgb24",
            "pipe:1",
        ]
        raw = self._run(cmd)
        expected = width * height * 3
        if len(raw) < expected:
            raise MediaError(
                f"extractor returned {len(raw)} bytes, expected {expected} for one frame"
            )
        return np.frombuffer(raw[:expected], dtype=np.uint8).reshape(height, width, 3)

    def _run(self, cmd: list[str]) -> bytes:
        try:
            proc = subprocess.run(
                cmd,
                capture_output=True,
                timeout=self.timeout,
                check=False,
            )
        except FileNotFoundError as exc:
            raise MediaError(f"external media tool not found: {cmd[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise MediaError(f"external media tool timed out: {' '.join(cmd)}") from exc
        if proc.returncode != 0:
            raise MediaError(
                f"{cmd[0]} failed (exit {proc.returncode}): "
                f"{proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        return proc.stdout


class ExternalClipReader:
    def __init__(self, path: Path, info: MediaInfo, extractor: ExternalFrameExtractor) -> None:
        self.path = path
        self._info = info
        self.extractor = extractor
        self.duration = info.duration
        self.fps = info.fps
        self.width = info.width
        self.height = info.height

    def info(self) -> MediaInfo:
        return self._info

    def frame_at(self, t: float) -> Frame:
        pixels = self.extractor.frame_at(self.path, t, self.width, self.height)
        snapped = min(self.duration, max(0.0, t))
        return Frame(timestamp=snapped, pixels=pixels, clip_duration=self.duration)


class MediaService:
    """Content-addressed blob store plus clip decoding and ingest checks."""

    def __init__(
        self,
        root: Path | str,
        extractor: Optional[ExternalFrameExtractor] = None,
        max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
        max_clip_seconds: float = DEFAULT_MAX_CLIP_SECONDS,
    ) -> None:
        self.root = Path(root)
        self.clips_dir = self.root / "clips"
        self.clips_dir.mkdir(parents=True, exist_ok=True)
        self.extractor = extractor
        self.max_upload_bytes = max_upload_bytes
        self.max_clip_seconds = max_clip_seconds

    # -- blob store ---------------------------------------------------------

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.clips_dir / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def get(self, digest: str) -> bytes:
        path = self.clips_dir / digest
        if not path.exists():
            raise NotFoundError(f"no media stored under {digest}")
        return path.read_bytes()

    def exists(self, digest: str) -> bool:
        return (self.clips_dir / digest).exists()

    def path(self, digest: str) -> Path:
        return self.clips_dir / digest

    # -- FrameStore protocol -------------------------------------------------

    def put_frame(self, pixels: np.ndarray) -> str:
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
        return self.put(buf.getvalue())

    def get_frame(self, ref: str) -> np.ndarray:
        data = self.get(ref)
        if data[: len(_PNG_MAGIC)] != _PNG_MAGIC:
            raise MediaError(f"stored object {ref} is not a PNG frame")
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)

    # -- clips ----------------------------------------------------------------

    def ingest_clip(self, data: bytes) -> VideoClip:
        """Persist uploaded media and return its clip record.

        Content-addressed: re-uploading identical bytes returns an identical
        clip. Raises UnsupportedMediaError / MediaTooLargeError on bad input.
        """
        if not data:
            raise UnsupportedMediaError("upload is empty")
        if len(data) > self.max_upload_bytes:
            raise MediaTooLargeError(
                f"upload of {len(data)} bytes exceeds limit {self.max_upload_bytes}"
            )
        info = self._probe_bytes(data)
        digest = self.put(data)
        return VideoClip(
            id=digest,
            media_ref=digest,
            duration=info.duration,
            native_fps=info.fps,
            width=info.width,
            height=info.height,
            max_duration=self.max_clip_seconds,
        )

    def _probe_bytes(self, data: bytes) -> MediaInfo:
        header = parse_scene_clip(data)
        if header is not None:
            return SceneClipReader(header).info()
        if self.extractor is None:
            raise UnsupportedMediaError(
                "upload is not a sceneclip and no external extractor is configured"
            )
        digest = self.put(data)
        return self.extractor.probe(self.path(digest))

    def reader(self, clip: VideoClip) -> SceneClipReader | ExternalClipReader:
        data = self.get(clip.media_ref)
        header = parse_scene_clip(data)
        if header is not None:
            return SceneClipReader(header)
        if self.extractor is None:
            raise MediaError(
                f"clip {clip.id} requires the external extractor, which is not configured"
            )
        info = MediaInfo(clip.duration, clip.native_fps, clip.width, clip.height)
        return ExternalClipReader(self.path(clip.media_ref), info, self.extractor)

    def frame_at(self, clip: VideoClip, t: float) -> Frame:
        return self.reader(clip).frame_at(t)

    def first_frame(self, clip: VideoClip) -> Frame:
        return self.frame_at(clip, 0.0)

    def clip_scene(self, clip: VideoClip) -> Optional[scene_mod.SyntheticScene]:
        """Scene encoded in a sceneclip, or None for container video."""
        header = parse_scene_clip(self.get(clip.media_ref))
        if header is None:
            return None
        return SceneClipReader(header).scene

    def put_scene_clip(
        self,
        scn: scene_mod.SyntheticScene,
        duration: float = scene_mod.DEFAULT_DURATION,
        fps: float = scene_mod.DEFAULT_FPS,
        width: int = scene_mod.DEFAULT_WIDTH,
        height: int = scene_mod.DEFAULT_HEIGHT,
    ) -> VideoClip:
        return self.ingest_clip(encode_scene_clip(scn, duration, fps, width, height))
