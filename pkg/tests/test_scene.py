"""Synthetic world: grammar, rendering, and pixel-level scene recovery."""

from __future__ import annotations

import numpy as np
import pytest

from clipscript import scene as world
from clipscript.errors import ValidationError


def test_alphabets_cover_all_attributes():
    assert set(world.ALPHABETS) == set(world.ATTRIBUTES)
    assert world.K == 8


def test_scene_rejects_illegal_value():
    mapping = world.random_scene(np.random.default_rng(0)).to_mapping()
    mapping["style"] = "cubist"
    with pytest.raises(ValidationError):
        world.SyntheticScene.from_mapping(mapping)


def test_mismatches_counts_differing_attributes():
    rng = np.random.default_rng(1)
    a = world.random_scene(rng)
    b = a.with_overrides({"subject": [v for v in world.ALPHABETS["subject"] if v != a.to_mapping()["subject"]][0]})
    assert a.mismatches(a) == ()
    assert a.mismatches(b) == ("subject",)


def test_palette_colors_distinct_within_attribute():
    for table in world.palette():
        as_tuples = {tuple(c) for c in table.tolist()}
        assert len(as_tuples) == len(table)


class TestRenderDecode:
    def test_decode_recovers_scene_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            scn = world.random_scene(rng)
            frame = world.render_frame(scn, frame_index=int(rng.integers(0, 128)))
            assert world.decode_frame(frame) == scn

    def test_decode_works_at_small_geometry(self):
        scn = world.random_scene(np.random.default_rng(3))
        frame = world.render_frame(scn, 5, width=16, height=16)
        assert world.decode_frame(frame) == scn

    def test_render_is_deterministic(self):
        scn = world.random_scene(np.random.default_rng(4))
        a = world.render_frame(scn, 7)
        b = world.render_frame(scn, 7)
        assert np.array_equal(a, b)

    def test_render_varies_with_frame_index_and_scene(self):
        rng = np.random.default_rng(5)
        scn = world.random_scene(rng)
        moving = scn.with_overrides({"subject_motion": "running", "camera_motion": "orbit"})
        assert not np.array_equal(
            world.render_frame(moving, 0), world.render_frame(moving, 10)
        )
        other = scn.with_overrides(
            {"camera_angle": [v for v in world.ALPHABETS["camera_angle"] if v != scn.to_mapping()["camera_angle"]][0]}
        )
        assert not np.array_equal(world.render_frame(scn, 0), world.render_frame(other, 0))


class TestGrammar:
    def test_prompt_text_round_trips_scene(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            scn = world.random_scene(rng)
            text = world.scene_to_prompt_text(scn)
            assignments, bad = world.parse_prompt_text(text)
            assert not bad
            assert assignments == scn.to_mapping()

    def test_free_prose_is_ignored(self):
        assignments, bad = world.parse_prompt_text(
            "A dreamy shot of nothing in particular.\nnote: keep it moody\n"
            "style: watercolor"
        )
        assert assignments == {"style": "watercolor"}
        assert bad == []

    def test_illegal_value_reported_not_assigned(self):
        assignments, bad = world.parse_prompt_text("style: cubist\nsubject: fox")
        assert assignments == {"subject": "fox"}
        assert bad == [("style", "cubist")]

    def test_key_normalization_tolerates_spacing(self):
        assignments, _ = world.parse_prompt_text("Subject Color:  violet ")
        assert assignments == {"subject_color": "violet"}

    def test_apply_assignments_patches_in_place(self):
        scn = world.random_scene(np.random.default_rng(7))
        text = "keep this line\n" + world.scene_to_prompt_text(scn)
        out = world.apply_assignments(text, {"lighting": "neon"})
        assert "keep this line" in out
        assignments, _ = world.parse_prompt_text(out)
        assert assignments["lighting"] == "neon"
        # untouched attributes survive
        for name in world.ATTRIBUTES:
            if name != "lighting":
                assert assignments[name] == scn.to_mapping()[name]

    def test_apply_assignments_appends_missing_attribute(self):
        out = world.apply_assignments("just prose", {"style": "anime"})
        assignments, _ = world.parse_prompt_text(out)
        assert assignments == {"style": "anime"}
        assert out.startswith("just prose")

    def test_apply_assignments_empty_changes_is_identity(self):
        text = "style: anime\nfree text"
        assert world.apply_assignments(text, {}) == text


class TestOverrideExtraction:
    def test_extracts_colon_form(self):
        assert world.extract_overrides("please set style: pixel art thanks") == {
            "style": "pixel art"
        }

    def test_extracts_spaced_attribute_names(self):
        got = world.extract_overrides("change the camera angle to low angle")
        assert got == {"camera_angle": "low angle"}

    def test_longer_names_win_over_prefixes(self):
        got = world.extract_overrides("subject color: violet")
        assert got == {"subject_color": "violet"}

    def test_no_override_when_value_missing(self):
        assert world.extract_overrides("make the style nicer") == {}
