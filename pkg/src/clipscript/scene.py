"""Synthetic scene world backing the offline simulation adapters.

A scene is a fixed-length vector of categorical attributes (subject, colors,
camera work, style...). Scenes render to frames through integer-only
arithmetic so rendering is bit-identical across kernel backends, and every
frame carries a machine-readable attribute register strip so downstream
components (embedder, generator conditioning, image editor) can recover the
scene from pixels alone.

Rendering and the register palette are properties of the *media format*, not
of any adapter seed: two parties that never shared a seed still produce and
decode identical frames for the same scene.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from . import kernels
from .errors import ValidationError

ATTRIBUTES = (
    "subject",
    "subject_color",
    "background",
    "lighting",
    "camera_angle",
    "camera_motion",
    "subject_motion",
    "style",
)

ALPHABETS: dict[str, tuple[str, ...]] = {
    "subject": ("fox", "dog", "dancer", "robot", "sailboat", "skateboarder", "heron", "barista"),
    "subject_color": ("red", "orange", "yellow", "green", "blue", "violet", "black", "white"),
    "background": ("forest", "beach", "city street", "desert", "mountain lake", "studio", "rooftop", "meadow"),
    "lighting": ("golden hour", "overcast", "neon", "moonlight", "harsh noon", "candlelit", "foggy dawn", "stage lights"),
    "camera_angle": ("eye level", "low angle", "high angle", "overhead", "dutch tilt", "close-up", "wide shot"),
    "camera_motion": ("static", "slow pan", "tracking", "dolly in", "dolly out", "handheld", "orbit"),
    "subject_motion": ("standing still", "walking", "running", "jumping", "spinning", "waving", "drifting"),
    "style": ("photorealistic", "pixel art", "watercolor", "film noir", "anime", "claymation", "vhs", "oil painting"),
}

K = len(ATTRIBUTES)

# Default geometry of synthetic clips.
DEFAULT_WIDTH = 64
DEFAULT_HEIGHT = 64
DEFAULT_FPS = 16.0
DEFAULT_DURATION = 8.0

# Register palette seed — part of the media format, never configurable.
_PALETTE_SEED = 0x5CE17E


@dataclass(frozen=True)
class SyntheticScene:
    """One point in the synthetic world: a legal value per attribute."""

    values: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.values) != K:
            raise ValidationError("values", f"expected {K} attributes, got {len(self.values)}")
        for name, value in zip(ATTRIBUTES, self.values):
            if value not in ALPHABETS[name]:
                raise ValidationError(name, f"{value!r} is not a legal {name} value")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "SyntheticScene":
        missing = [a for a in ATTRIBUTES if a not in mapping]
        if missing:
            raise ValidationError(missing[0], "attribute missing from scene mapping")
        return cls(tuple(mapping[a] for a in ATTRIBUTES))

    def to_mapping(self) -> dict[str, str]:
        return dict(zip(ATTRIBUTES, self.values))

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(ALPHABETS[a].index(v) for a, v in zip(ATTRIBUTES, self.values))

    def with_overrides(self, overrides: Mapping[str, str]) -> "SyntheticScene":
        merged = self.to_mapping()
        for key, value in overrides.items():
            if key not in ALPHABETS:
                raise ValidationError(key, "unknown scene attribute")
            merged[key] = value
        return SyntheticScene.from_mapping(merged)

    def mismatches(self, other: "SyntheticScene") -> tuple[str, ...]:
        """Attribute names where the two scenes differ."""
        return tuple(
            a for a, mine, theirs in zip(ATTRIBUTES, self.values, other.values)
            if mine != theirs
        )


def random_scene(rng: np.random.Generator) -> SyntheticScene:
    return SyntheticScene(
        tuple(ALPHABETS[a][int(rng.integers(len(ALPHABETS[a])))] for a in ATTRIBUTES)
    )


# --------------------------------------------------------------------------
# Register palette (format constant)
# --------------------------------------------------------------------------


def _build_palette() -> list[np.ndarray]:
    """Per-attribute color tables, pairwise distinct within an attribute."""
    tables = []
    for i, name in enumerate(ATTRIBUTES):
        rng = np.random.default_rng(np.random.SeedSequence([_PALETTE_SEED, i]))
        used: set[tuple[int, int, int]] = set()
        colors = []
        for _ in ALPHABETS[name]:
            while True:
                c = tuple(int(x) for x in rng.integers(16, 240, 3))
                if c not in used:
                    used.add(c)
                    colors.append(c)
                    break
        tables.append(np.array(colors, dtype=np.int64))
    return tables


_PALETTE: Optional[list[np.ndarray]] = None


def palette() -> list[np.ndarray]:
    global _PALETTE
    if _PALETTE is None:
        _PALETTE = _build_palette()
    return _PALETTE


def _register_geometry(width: int, height: int) -> tuple[int, int]:
    if width < K or height < 4:
        raise ValidationError("width", f"frames must be at least {K}x4 to carry registers")
    block_w = width // K
    block_h = max(2, height // 8)
    return block_w, block_h


# Per-index motion tables (integer pixel steps per frame).
_SUBJECT_VX = (0, 1, 2, 0, 1, 0, 1)
_SUBJECT_VY = (0, 0, 0, 2, 1, 1, 1)
_CAMERA_RATE = (0, 1, 2, 3, 4, 5, 6)


def _render_params(scene: SyntheticScene, frame_index: int, width: int, height: int) -> np.ndarray:
    idx = scene.indices
    pal = palette()
    sub, sub_color, bg, light, angle, cam, motion, style = idx
    c0 = pal[2][bg]
    c1 = pal[3][light]
    sc = pal[1][sub_color]
    rate = _CAMERA_RATE[cam % len(_CAMERA_RATE)]
    phase = frame_index * rate + angle * 11 + bg * 3
    vx = _SUBJECT_VX[motion % len(_SUBJECT_VX)]
    vy = _SUBJECT_VY[motion % len(_SUBJECT_VY)]
    cx = (width // 2 + angle * 2 + frame_index * vx) % width
    cy = (height // 2 + sub + frame_index * vy) % height
    radius = max(2, min(width, height) // 6 + (sub % 3))
    noise_mask = (0, 31, 15, 7, 15, 31, 63, 7)[style % 8]
    noise_mul = style + 1
    return np.array(
        [
            1 + 2 * bg,
            2 + light,
            phase,
            c0[0], c0[1], c0[2],
            c1[0], c1[1], c1[2],
            sc[0], sc[1], sc[2],
            cx,
            cy,
            radius * radius,
            noise_mul,
            noise_mask,
        ],
        dtype=np.int64,
    )


def render_frame(
    scene: SyntheticScene,
    frame_index: int,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> np.ndarray:
    """Render one frame: decorative body plus the attribute register strip."""
    params = _render_params(scene, frame_index, width, height)
    out = np.asarray(kernels.render_body(height, width, params))
    block_w, block_h = _register_geometry(width, height)
    pal = palette()
    idx = scene.indices
    for i in range(K):
        color = pal[i][idx[i]].astype(np.uint8)
        out[0:block_h, i * block_w : (i + 1) * block_w, :] = color
    return out


def decode_frame(pixels: np.ndarray) -> SyntheticScene:
    """Recover the scene from a rendered frame's register strip.

    Unknown colors snap to the nearest palette entry, so the result is always
    a legal scene even for buffers this module did not render.
    """
    height, width = pixels.shape[0], pixels.shape[1]
    block_w, block_h = _register_geometry(width, height)
    pal = palette()
    values = []
    for i, name in enumerate(ATTRIBUTES):
        sample = pixels[block_h // 2, i * block_w + block_w // 2, :].astype(np.int64)
        dists = np.sum((pal[i] - sample) ** 2, axis=1)
        values.append(ALPHABETS[name][int(np.argmin(dists))])
    return SyntheticScene(tuple(values))


# --------------------------------------------------------------------------
# Prompt grammar
# --------------------------------------------------------------------------

_LEAD_TEMPLATE = (
    "A {subject_color} {subject} {subject_motion} against a {background} backdrop "
    "in {lighting} light; {camera_angle} framing with a {camera_motion} camera, "
    "rendered in a {style} style."
)


def scene_to_prompt_text(scene: SyntheticScene) -> str:
    """Canonical prompt text: a descriptive lead sentence plus one
    ``attribute: value`` line per attribute."""
    mapping = scene.to_mapping()
    lines = [_LEAD_TEMPLATE.format(**{k: v for k, v in mapping.items()})]
    lines.append("")
    lines.extend(f"{name}: {mapping[name]}" for name in ATTRIBUTES)
    return "\n".join(lines)


def _normalize_key(raw: str) -> str:
    return raw.strip().lower().replace("-", "_").replace(" ", "_")


def _normalize_value(raw: str) -> str:
    return " ".join(raw.strip().lower().split())


def parse_prompt_text(text: str) -> tuple[dict[str, str], list[tuple[str, str]]]:
    """Extract ``attribute: value`` assignments from prompt text.

    Forgiving by design: lines that are not assignments, or that name unknown
    attributes, are treated as free prose and ignored. A known attribute with
    an illegal value produces no assignment and is returned as an
    ``(attribute, raw_value)`` pair in the second element so callers can apply
    their own fallback. Later assignments win.
    """
    assignments: dict[str, str] = {}
    unparseable: list[tuple[str, str]] = []
    for line in text.splitlines():
        if ":" not in line:
            continue
        raw_key, _, raw_value = line.partition(":")
        key = _normalize_key(raw_key)
        if key not in ALPHABETS:
            continue
        value = _normalize_value(raw_value)
        if value in ALPHABETS[key]:
            assignments[key] = value
        else:
            unparseable.append((key, raw_value.strip()))
    return assignments, unparseable


def apply_assignments(text: str, changes: Mapping[str, str]) -> str:
    """Rewrite ``attribute: value`` lines in-place, appending lines for
    attributes the text does not mention. Free prose is preserved."""
    remaining = dict(changes)
    out_lines = []
    for line in text.splitlines():
        if ":" in line:
            key = _normalize_key(line.partition(":")[0])
            if key in remaining:
                out_lines.append(f"{key}: {remaining.pop(key)}")
                continue
        out_lines.append(line)
    for key in (a for a in ATTRIBUTES if a in remaining):
        out_lines.append(f"{key}: {remaining.pop(key)}")
    return "\n".join(out_lines)


def scene_from_prompt(
    text: str,
    fallback: SyntheticScene,
) -> tuple[SyntheticScene, list[str]]:
    """Scene encoded by prompt text, with ``fallback`` supplying any
    attribute the text does not assign or assigns an illegal value."""
    assignments, unparseable = parse_prompt_text(text)
    diagnostics = [f"{key}: unrecognized value {raw!r}" for key, raw in unparseable]
    return fallback.with_overrides(assignments), diagnostics


def extract_overrides(text: str) -> dict[str, str]:
    """Best-effort attribute overrides from free-form goal text.

    Looks for an attribute name followed (within a short window) by one of
    its legal values, e.g. "make the style: pixel art" or "camera angle low
    angle". Longer attribute names are matched first so ``subject_color``
    never shadows ``subject``. Intended for conversational goals, not for
    canonical prompt text.
    """
    normalized = text.lower().replace("-", " ").replace("_", " ")
    overrides: dict[str, str] = {}
    consumed: list[tuple[int, int]] = []
    for name in sorted(ATTRIBUTES, key=len, reverse=True):
        label = name.replace("_", " ")
        for m in re.finditer(re.escape(label), normalized):
            if any(s <= m.start() < e for s, e in consumed):
                continue
            window = normalized[m.end() : m.end() + 64]
            hit: tuple[int, str] | None = None
            for value in ALPHABETS[name]:
                pos = window.find(value.replace("-", " "))
                if pos >= 0 and (hit is None or pos < hit[0]):
                    hit = (pos, value)
            if hit is not None:
                overrides[name] = hit[1]
                consumed.append((m.start(), m.end() + hit[0] + len(hit[1])))
                break
    return overrides


def iter_attribute_values(name: str) -> Iterable[str]:
    return iter(ALPHABETS[name])
