"""Media store: content addressing, sceneclip codec, external extractor."""

from __future__ import annotations

import json
import stat

import numpy as np
import pytest

from clipscript import scene as world
from clipscript.errors import (
    MediaError,
    MediaTooLargeError,
    NotFoundError,
    UnsupportedMediaError,
)
from clipscript.media import (
    ExternalFrameExtractor,
    MediaService,
    encode_scene_clip,
    parse_scene_clip,
)


class TestContentAddressing:
    def test_same_bytes_same_id(self, media, truth_scene):
        data = encode_scene_clip(truth_scene)
        a = media.ingest_clip(data)
        b = media.ingest_clip(data)
        assert a.id == b.id
        assert a == b

    def test_different_bytes_different_id(self, media, truth_scene):
        a = media.ingest_clip(encode_scene_clip(truth_scene, duration=8.0))
        b = media.ingest_clip(encode_scene_clip(truth_scene, duration=6.0))
        assert a.id != b.id

    def test_get_unknown_digest(self, media):
        with pytest.raises(NotFoundError):
            media.get("0" * 64)

    def test_stored_under_clips_dir(self, media, truth_scene):
        clip = media.ingest_clip(encode_scene_clip(truth_scene))
        assert (media.clips_dir / clip.media_ref).exists()


class TestIngest:
    def test_zero_byte_upload_rejected(self, media):
        with pytest.raises(UnsupportedMediaError):
            media.ingest_clip(b"")

    def test_garbage_without_extractor_rejected(self, media):
        with pytest.raises(UnsupportedMediaError):
            media.ingest_clip(b"\x00\x01\x02 not a clip")

    def test_over_limit_rejected(self, tmp_path, truth_scene):
        small = MediaService(tmp_path / "m", max_upload_bytes=10)
        with pytest.raises(MediaTooLargeError):
            small.ingest_clip(encode_scene_clip(truth_scene))

    def test_probed_geometry_matches_header(self, media, truth_scene):
        clip = media.ingest_clip(
            encode_scene_clip(truth_scene, duration=8.0, fps=16.0, width=32, height=24)
        )
        assert clip.duration == pytest.approx(8.0, abs=0.1)
        assert clip.native_fps == 16.0
        assert (clip.width, clip.height) == (32, 24)

    def test_clip_longer_than_generator_max_rejected(self, media, truth_scene):
        from clipscript.errors import ValidationError

        with pytest.raises(ValidationError):
            media.ingest_clip(encode_scene_clip(truth_scene, duration=9.5))


class TestSceneClipCodec:
    def test_encode_is_canonical(self, truth_scene):
        assert encode_scene_clip(truth_scene) == encode_scene_clip(truth_scene)

    def test_parse_rejects_non_sceneclip(self):
        assert parse_scene_clip(b"{}") is None
        assert parse_scene_clip(b"\x89PNG") is None
        assert parse_scene_clip(json.dumps({"format": "other"}).encode()) is None

    def test_reader_round_trips_scene(self, media, truth_scene):
        clip = media.put_scene_clip(truth_scene)
        assert media.clip_scene(clip) == truth_scene

    def test_frame_at_snaps_to_nearest_frame(self, media, truth_scene):
        clip = media.put_scene_clip(truth_scene)  # 16 fps
        frame = media.frame_at(clip, 1.03)
        assert frame.timestamp == pytest.approx(1.0)
        frame = media.frame_at(clip, 7.99)
        assert frame.timestamp == pytest.approx(8.0 - 1 / 16.0)

    def test_first_frame_is_timestamp_zero(self, media, truth_clip):
        frame = media.first_frame(truth_clip)
        assert frame.timestamp == 0.0
        assert world.decode_frame(frame.pixels) is not None

    def test_frames_render_deterministically(self, media, truth_clip):
        a = media.frame_at(truth_clip, 3.0)
        b = media.frame_at(truth_clip, 3.0)
        assert a == b


class TestFrameStore:
    def test_png_round_trip_is_lossless(self, media):
        pixels = np.random.default_rng(0).integers(0, 256, (20, 30, 3), dtype=np.uint8)
        ref = media.put_frame(pixels)
        assert np.array_equal(media.get_frame(ref), pixels)

    def test_non_png_blob_rejected_as_frame(self, media):
        ref = media.put(b"not a png")
        with pytest.raises(MediaError):
            media.get_frame(ref)


def _write_stub(path, body: str) -> None:
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)


class TestExternalExtractor:
    """The subprocess wrapper, exercised against stub executables."""

    def test_probe_parses_stream_json(self, tmp_path):
        doc = {
            "streams": [
                {
                    "codec_type": "video",
                    "r_frame_rate": "30000/1001",
                    "width": 640,
                    "height": 360,
                    "duration": "8.008000",
                }
            ],
            "format": {"duration": "8.008000"},
        }
        stub = tmp_path / "ffprobe"
        _write_stub(stub, f"cat <<'EOF'\n{json.dumps(doc)}\nEOF\n")
        ext = ExternalFrameExtractor(ffprobe=str(stub), ffmpeg="true")
        info = ext.probe(tmp_path / "whatever.mp4")
        assert info.duration == pytest.approx(8.0, abs=0.1)
        assert info.fps == pytest.approx(29.97, abs=0.01)
        assert (info.width, info.height) == (640, 360)

    def test_probe_without_video_stream_is_unsupported(self, tmp_path):
        stub = tmp_path / "ffprobe"
        _write_stub(stub, "echo '{\"streams\": []}'\n")
        ext = ExternalFrameExtractor(ffprobe=str(stub), ffmpeg="true")
        with pytest.raises(UnsupportedMediaError):
            ext.probe(tmp_path / "x.mp4")

    def test_tool_failure_carries_diagnostic(self, tmp_path):
        stub = tmp_path / "ffprobe"
        _write_stub(stub, "echo 'moov atom not found' >&2\nexit 1\n")
        ext = ExternalFrameExtractor(ffprobe=str(stub), ffmpeg="true")
        with pytest.raises(MediaError, match="moov atom not found"):
            ext.probe(tmp_path / "x.mp4")

    def test_missing_tool_is_a_media_error(self, tmp_path):
        ext = ExternalFrameExtractor(ffprobe=str(tmp_path / "nope"), ffmpeg="true")
        with pytest.raises(MediaError, match="not found"):
            ext.probe(tmp_path / "x.mp4")

    def test_frame_extraction_reads_raw_rgb(self, tmp_path):
        w, h = 4, 3
        stub = tmp_path / "ffmpeg"
        _write_stub(stub, f"head -c {w * h * 3} /dev/zero\n")
        ext = ExternalFrameExtractor(ffprobe="true", ffmpeg=str(stub))
        pixels = ext.frame_at(tmp_path / "x.mp4", 1.0, w, h)
        assert pixels.shape == (h, w, 3)
        assert pixels.dtype == np.uint8
        assert not pixels.any()

    def test_short_frame_payload_is_an_error(self, tmp_path):
        stub = tmp_path / "ffmpeg"
        _write_stub(stub, "head -c 5 /dev/zero\n")
        ext = ExternalFrameExtractor(ffprobe="true", ffmpeg=str(stub))
        with pytest.raises(MediaError, match="expected"):
            ext.frame_at(tmp_path / "x.mp4", 0.0, 4, 4)

    def test_availability_check(self, tmp_path):
        assert not ExternalFrameExtractor(
            ffprobe=str(tmp_path / "missing"), ffmpeg=str(tmp_path / "missing")
        ).available()
