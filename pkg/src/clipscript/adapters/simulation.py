"""Deterministic offline backend over the synthetic scene world.

Every stochastic choice (initial prompt corruption, which mistakes a
comparison fixes, the drift coin, fallback values for unparseable tokens) is
drawn from a generator seeded by the adapter seed *and* a digest of the call
inputs. Randomness is therefore a pure function of (seed, inputs): repeated
calls, resumed runs, and concurrent sessions all see identical behavior.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import scene as world
from ..errors import MediaError, ValidationError
from ..media import MediaService
from ..model import (
    ChatMessage,
    DifferenceReport,
    Discrepancy,
    EmbeddingVector,
    Frame,
    PROV_INITIAL,
    PROV_REFINED,
    Prompt,
    VideoClip,
)
from .base import AdapterSet, validate_transcript

# Category each scene attribute's discrepancy is filed under.
_ATTR_CATEGORY = {
    "subject": "object",
    "subject_color": "color",
    "background": "composition",
    "lighting": "lighting",
    "camera_angle": "composition",
    "camera_motion": "motion",
    "subject_motion": "motion",
    "pacing": "pacing",
    "style": "other",
}


@dataclass(frozen=True)
class SimulationParams:
    """Behavioral knobs of the simulated model stack.

    Defaults make an untuned reconstruction peak around iteration 3: the
    initial prompt gets ``init_errors`` attributes wrong and each comparison
    corrects up to ``fix_per_iter`` of them. ``p_drift`` is the probability
    that a comparison of an already-perfect generation perturbs one attribute
    anyway (over-refinement); 0 disables drift.
    """

    seed: int = 0
    init_errors: int = 3
    fix_per_iter: int = 2
    p_drift: float = 0.0
    embed_dim: int = 512
    jitter: float = 1e-3
    clip_duration: float = world.DEFAULT_DURATION
    clip_fps: float = world.DEFAULT_FPS
    frame_width: int = world.DEFAULT_WIDTH
    frame_height: int = world.DEFAULT_HEIGHT

    def __post_init__(self) -> None:
        if not 0 <= self.init_errors <= world.K:
            raise ValidationError("init_errors", f"must be within [0, {world.K}]")
        if self.fix_per_iter < 0:
            raise ValidationError("fix_per_iter", "must be >= 0")
        if not 0.0 <= self.p_drift <= 1.0:
            raise ValidationError("p_drift", "must be within [0, 1]")
        total_features = sum(len(world.ALPHABETS[a]) for a in world.ATTRIBUTES)
        if self.embed_dim < total_features:
            raise ValidationError(
                "embed_dim", f"must be >= {total_features} to carry scene features"
            )
        if self.jitter < 0:
            raise ValidationError("jitter", "must be >= 0")


def _derived_rng(seed: int, *parts: object) -> np.random.Generator:
    """Generator keyed by the adapter seed and a digest of the call inputs."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    entropy = int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([seed, entropy]))


def _require_scene(media: MediaService, clip: VideoClip, role: str) -> world.SyntheticScene:
    scn = media.clip_scene(clip)
    if scn is None:
        raise MediaError(
            f"simulation {role} can only handle sceneclip media, got clip {clip.id}"
        )
    return scn


class SimulationDescriber:
    def __init__(self, params: SimulationParams, media: MediaService) -> None:
        self.params = params
        self.media = media

    def initial_prompt(self, clip: VideoClip) -> Prompt:
        """Prompt encoding the clip's true scene with exactly ``init_errors``
        attributes corrupted."""
        truth = _require_scene(self.media, clip, "describer")
        rng = _derived_rng(self.params.seed, "describe", clip.media_ref)
        mapping = truth.to_mapping()
        wrong = rng.choice(world.K, size=self.params.init_errors, replace=False)
        for attr_idx in sorted(int(i) for i in wrong):
            name = world.ATTRIBUTES[attr_idx]
            others = [v for v in world.ALPHABETS[name] if v != mapping[name]]
            mapping[name] = others[int(rng.integers(len(others)))]
        corrupted = world.SyntheticScene.from_mapping(mapping)
        return Prompt(text=world.scene_to_prompt_text(corrupted), provenance=PROV_INITIAL)


class SimulationGenerator:
    """Renders the scene a prompt describes, conditioned on the first frame.

    Attributes the prompt does not mention inherit from the conditioning
    frame's decoded scene (that is what first-frame conditioning is for);
    attribute tokens with illegal values fall back to a seeded default and
    are surfaced in ``last_diagnostics``.
    """

    def __init__(self, params: SimulationParams, media: MediaService) -> None:
        self.params = params
        self.media = media
        self.last_diagnostics: list[str] = []

    def _fallback_value(self, attr: str) -> str:
        rng = _derived_rng(self.params.seed, "fallback", attr)
        alphabet = world.ALPHABETS[attr]
        return alphabet[int(rng.integers(len(alphabet)))]

    def generate(self, prompt: Prompt, first_frame: Frame) -> VideoClip:
        conditioning = world.decode_frame(first_frame.pixels)
        assignments, unparseable = world.parse_prompt_text(prompt.text)
        mapping = conditioning.to_mapping()
        mapping.update(assignments)
        diagnostics = []
        for attr, raw in unparseable:
            mapping[attr] = self._fallback_value(attr)
            diagnostics.append(
                f"{attr}: could not parse {raw!r}, fell back to {mapping[attr]!r}"
            )
        self.last_diagnostics = diagnostics
        scn = world.SyntheticScene.from_mapping(mapping)
        return self.media.put_scene_clip(
            scn,
            duration=self.params.clip_duration,
            fps=self.params.clip_fps,
            width=self.params.frame_width,
            height=self.params.frame_height,
        )


class SimulationComparator:
    """Attribute diff between the truth scene and the generated scene.

    Corrects up to ``fix_per_iter`` wrong attributes in the revised prompt.
    When the generation already matches the truth exactly, the drift coin
    (probability ``p_drift``) may perturb one attribute anyway — emulating
    over-refinement after convergence.
    """

    def __init__(self, params: SimulationParams, media: MediaService) -> None:
        self.params = params
        self.media = media

    def compare(
        self, original: VideoClip, generated: VideoClip, current: Prompt
    ) -> DifferenceReport:
        truth = _require_scene(self.media, original, "comparator")
        observed = _require_scene(self.media, generated, "comparator")
        rng = _derived_rng(
            self.params.seed,
            "compare",
            original.media_ref,
            generated.media_ref,
            current.text,
        )
        truth_map = truth.to_mapping()
        observed_map = observed.to_mapping()
        wrong = list(truth.mismatches(observed))

        discrepancies = tuple(
            Discrepancy(
                category=_ATTR_CATEGORY.get(attr, "other"),
                description=(
                    f"{attr}: generated shows {observed_map[attr]!r},"
                    f" original shows {truth_map[attr]!r}"
                ),
            )
            for attr in wrong
        )

        changes: dict[str, str] = {}
        if wrong:
            n_fix = min(self.params.fix_per_iter, len(wrong))
            picked = rng.choice(len(wrong), size=n_fix, replace=False)
            for i in sorted(int(x) for x in picked):
                changes[wrong[i]] = truth_map[wrong[i]]
        elif self.params.p_drift > 0 and rng.random() < self.params.p_drift:
            attr = world.ATTRIBUTES[int(rng.integers(world.K))]
            others = [v for v in world.ALPHABETS[attr] if v != observed_map[attr]]
            changes[attr] = others[int(rng.integers(len(others)))]

        revised_text = (
            world.apply_assignments(current.text, changes) if changes else current.text
        )
        return DifferenceReport(
            discrepancies=discrepancies,
            revised_prompt=Prompt(text=revised_text, provenance=PROV_REFINED),
        )


class SimulationImageEditor:
    def __init__(self, params: SimulationParams, media: MediaService) -> None:
        self.params = params
        self.media = media
        self.last_diagnostics: list[str] = []

    def edit(self, base: Frame, instruction: str) -> Frame:
        """Apply the instruction's parsed attribute overrides to the base
        frame's scene and re-render. No overrides means the base frame comes
        back untouched."""
        if not instruction.strip():
            raise ValidationError("instruction", "must be non-empty")
        assignments, unparseable = world.parse_prompt_text(instruction)
        if not assignments:
            assignments = world.extract_overrides(instruction)
        self.last_diagnostics = [
            f"{attr}: could not parse {raw!r}" for attr, raw in unparseable
        ]
        if not assignments:
            return Frame(timestamp=base.timestamp, pixels=base.pixels)
        scn = world.decode_frame(base.pixels).with_overrides(assignments)
        pixels = world.render_frame(
            scn, 0, base.pixels.shape[1], base.pixels.shape[0]
        )
        return Frame(timestamp=0.0, pixels=pixels)


class SimulationEmbedder:
    """Scene features through a seeded fixed orthonormal projection.

    Each frame's decoded attributes become a one-hot block vector; projecting
    through a semi-orthogonal matrix preserves inner products, so the cosine
    of two frames is exactly (K - mismatches) / K up to the per-frame jitter
    (magnitude <= ``params.jitter``, keyed by the frame timestamp).
    """

    def __init__(self, params: SimulationParams) -> None:
        self.params = params
        self._offsets: list[int] = []
        off = 0
        for name in world.ATTRIBUTES:
            self._offsets.append(off)
            off += len(world.ALPHABETS[name])
        self._feature_dim = off
        self._projection: np.ndarray | None = None

    def _matrix(self) -> np.ndarray:
        if self._projection is None:
            rng = _derived_rng(self.params.seed, "projection")
            gauss = rng.standard_normal((self.params.embed_dim, self._feature_dim))
            q, _ = np.linalg.qr(gauss)
            self._projection = q
        return self._projection

    def embed(self, frame: Frame) -> EmbeddingVector:
        scn = world.decode_frame(frame.pixels)
        features = np.zeros(self._feature_dim, dtype=np.float64)
        for off, idx in zip(self._offsets, scn.indices):
            features[off + idx] = 1.0
        base = self._matrix() @ features
        base /= np.linalg.norm(base)
        if self.params.jitter > 0:
            rng = _derived_rng(self.params.seed, "jitter", repr(float(frame.timestamp)))
            noise = rng.standard_normal(self.params.embed_dim)
            base = base + noise * (self.params.jitter / np.linalg.norm(noise))
            base /= np.linalg.norm(base)
        return EmbeddingVector(components=base, dimension=self.params.embed_dim)


class SimulationChat:
    """Stateless assistant that rewrites prompts toward parsed overrides.

    If the last user message embeds a prompt via the assist scaffold, the
    reply is that prompt with the goal's attribute overrides applied — the
    reply text is itself a complete prompt, ready to copy into the editor.
    Otherwise the reply is just the override assignments (which doubles as an
    image-editing instruction for first-frame requests).
    """

    _PROMPT_MARKER = "Here is the text-to-video prompt of my original video: "
    _PROMPT_SUFFIX = ". Help me rewrite the prompt"

    def __init__(self, params: SimulationParams) -> None:
        self.params = params

    def assist(self, transcript: Sequence[ChatMessage]) -> ChatMessage:
        validate_transcript(transcript)
        text = transcript[-1].text
        base_prompt = ""
        goal_segment = text
        if self._PROMPT_MARKER in text:
            head, _, rest = text.partition(self._PROMPT_MARKER)
            base_prompt = rest.rsplit(self._PROMPT_SUFFIX, 1)[0]
            goal_segment = head
        overrides = world.extract_overrides(goal_segment)
        if not overrides:
            assignments, _ = world.parse_prompt_text(goal_segment)
            overrides = assignments
        if base_prompt and overrides:
            reply = world.apply_assignments(base_prompt, overrides)
        elif overrides:
            reply = "\n".join(
                f"{name}: {overrides[name]}"
                for name in world.ATTRIBUTES
                if name in overrides
            )
        elif base_prompt:
            reply = base_prompt
        else:
            reply = (
                "I could not find a concrete attribute to change; try naming "
                "one, for example 'style: pixel art' or 'camera_angle: low angle'."
            )
        return ChatMessage(role="assistant", text=reply)


def build_simulation_adapters(
    media: MediaService, params: SimulationParams | None = None, seed: int | None = None
) -> AdapterSet:
    """Assemble the full simulated backend; ``seed`` is a shorthand for
    ``SimulationParams(seed=...)``."""
    if params is None:
        params = SimulationParams(seed=0 if seed is None else seed)
    return AdapterSet(
        describer=SimulationDescriber(params, media),
        generator=SimulationGenerator(params, media),
        comparator=SimulationComparator(params, media),
        image_editor=SimulationImageEditor(params, media),
        embedder=SimulationEmbedder(params),
        chat=SimulationChat(params),
        media=media,
        generator_max_seconds=params.clip_duration,
    )
