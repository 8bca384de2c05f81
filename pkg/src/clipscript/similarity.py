"""Frame-aligned embedding similarity and corpus-level convergence analysis.

The primary metric is the mean cosine similarity between embeddings of
time-paired frames sampled from two clips. On top of per-clip score traces
this module computes the two corpus curves (uniform per-iteration mean and
the best-so-far mean, i.e. each clip frozen at its first peak) and summary
statistics of a reconstruction experiment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateEmbeddingError, ValidationError
from .model import Frame, ScoreTrace, SimilarityScore, VideoClip, earliest_argmax

if TYPE_CHECKING:  # pragma: no cover
    from .adapters.base import Embedder
    from .media import MediaService

# Frames sampled per clip for alignment: 2 samples/second on 8-second clips.
DEFAULT_FRAMES_PER_CLIP = 16


@dataclass(frozen=True)
class AggregateCurves:
    """Corpus mean curves over a fixed number of iterations."""

    per_iteration_mean: tuple[float, ...]
    best_so_far_mean: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_iteration_mean", tuple(self.per_iteration_mean))
        object.__setattr__(self, "best_so_far_mean", tuple(self.best_so_far_mean))
        if len(self.per_iteration_mean) != len(self.best_so_far_mean):
            raise ValidationError("best_so_far_mean", "curve lengths must match")
        if not self.per_iteration_mean:
            raise ValidationError("per_iteration_mean", "must be non-empty")


@dataclass(frozen=True)
class CorpusStats:
    """Summary statistics across a corpus of score traces."""

    n_clips: int
    improved_fraction: float
    mean_initial: float
    mean_peak: float
    mean_improvement: float
    mean_best_iteration: float
    final_iteration_mean: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.improved_fraction <= 1.0):
            raise ValidationError("improved_fraction", "must be within [0, 1]")
        if abs(self.mean_improvement - (self.mean_peak - self.mean_initial)) > 1e-12:
            raise ValidationError(
                "mean_improvement", "must equal mean_peak - mean_initial"
            )


def sample_frames(clip: VideoClip, n: int, *, media: "MediaService") -> list[Frame]:
    """``n`` frames at the midpoints of equal subdivisions of the clip.

    Target timestamps are t_i = (i + 0.5) * duration / n; each returned frame
    is the decoded frame nearest its target.
    """
    if n < 1:
        raise ValidationError("n", "must be >= 1")
    reader = media.reader(clip)
    return [reader.frame_at((i + 0.5) * clip.duration / n) for i in range(n)]


def cosine(u, v) -> SimilarityScore:
    """Cosine similarity of two embedding vectors, clamped into [-1, 1]
    against floating-point overshoot."""
    a = np.asarray(getattr(u, "components", u), dtype=np.float64)
    b = np.asarray(getattr(v, "components", v), dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(
            "dimension", f"vectors disagree: {a.shape[0]} vs {b.shape[0]}"
        )
    # A vector whose squared norm underflows is as unusable as a literal zero.
    if float(np.dot(a, a)) == 0.0 or float(np.dot(b, b)) == 0.0:
        raise DegenerateEmbeddingError("cosine undefined for a zero-norm vector")
    value = kernels.cosine_raw(a, b)
    return SimilarityScore(min(1.0, max(-1.0, float(value))))


def frame_aligned_similarity(
    a: VideoClip,
    b: VideoClip,
    embedder: "Embedder",
    n: int = DEFAULT_FRAMES_PER_CLIP,
    *,
    media: "MediaService",
) -> SimilarityScore:
    """Mean cosine between embeddings of index-paired frames of two clips."""
    if n < 1:
        raise ValidationError("n", "must be >= 1")
    frames_a = sample_frames(a, n, media=media)
    frames_b = sample_frames(b, n, media=media)
    mat_a = np.stack([embedder.embed(f).components for f in frames_a])
    mat_b = np.stack([embedder.embed(f).components for f in frames_b])
    if mat_a.shape[1] != mat_b.shape[1]:
        raise ValidationError(
            "dimension", f"embeddings disagree: {mat_a.shape[1]} vs {mat_b.shape[1]}"
        )
    norms_a = np.linalg.norm(mat_a, axis=1)
    norms_b = np.linalg.norm(mat_b, axis=1)
    if not (np.all(norms_a > 0) and np.all(norms_b > 0)):
        raise DegenerateEmbeddingError("a sampled frame produced a zero embedding")
    value = kernels.paired_mean_cosine(mat_a, mat_b)
    return SimilarityScore(min(1.0, max(-1.0, float(value))))


def best_so_far(trace: ScoreTrace) -> list[float]:
    """Prefix maximum of a trace: the score if the clip had stopped the first
    time it reached its running peak."""
    arr = np.asarray(trace.scores, dtype=np.float64)
    return [float(x) for x in kernels.prefix_max(arr)]


def _trace_matrix(traces: Sequence[ScoreTrace]) -> np.ndarray:
    if not traces:
        raise ValidationError("traces", "must contain at least one trace")
    length = len(traces[0].scores)
    for t in traces:
        if len(t.scores) != length:
            raise ValidationError(
                "traces",
                f"trace {t.clip_id} has length {len(t.scores)}, expected {length}",
            )
    return np.array([t.scores for t in traces], dtype=np.float64)


def aggregate_curves(traces: Sequence[ScoreTrace]) -> AggregateCurves:
    """Fig-style corpus curves: uniform-iteration mean vs. best-so-far mean."""
    m = _trace_matrix(traces)
    per_iteration = m.mean(axis=0)
    best = np.asarray(kernels.prefix_max_rows(m)).mean(axis=0)
    return AggregateCurves(
        per_iteration_mean=tuple(float(x) for x in per_iteration),
        best_so_far_mean=tuple(float(x) for x in best),
    )


def corpus_stats(traces: Sequence[ScoreTrace]) -> CorpusStats:
    m = _trace_matrix(traces)
    initial = m[:, 0]
    peaks = m.max(axis=1)
    best_iters = np.array(
        [earliest_argmax(list(row)) for row in m], dtype=np.float64
    )
    mean_initial = float(initial.mean())
    mean_peak = float(peaks.mean())
    return CorpusStats(
        n_clips=m.shape[0],
        improved_fraction=float(np.mean(peaks > initial)),
        mean_initial=mean_initial,
        mean_peak=mean_peak,
        mean_improvement=mean_peak - mean_initial,
        mean_best_iteration=float(best_iters.mean()),
        final_iteration_mean=float(m[:, -1].mean()),
    )


def drift_amount(trace: ScoreTrace) -> float:
    """Peak-minus-final decline of one trace; 0 when the peak is last."""
    return max(trace.scores) - trace.scores[-1]


def curves_table(curves: AggregateCurves) -> str:
    """Tab-separated curve export with a fixed header, one row per
    iteration (1-based)."""
    lines = ["iteration\tper_iteration_mean\tbest_so_far_mean"]
    for i, (p, b) in enumerate(
        zip(curves.per_iteration_mean, curves.best_so_far_mean), start=1
    ):
        lines.append(f"{i}\t{p!r}\t{b!r}")
    return "\n".join(lines) + "\n"
