"""clipscript: reverse-engineer video clips into editable text prompts,
rewrite them, and regenerate new videos against pluggable model backends."""

__version__ = "0.1.0"

from .model import (
    DifferenceReport,
    EmbeddingVector,
    Frame,
    IterationRecord,
    Prompt,
    ReconstructionSession,
    RewriteSession,
    ScoreTrace,
    SimilarityScore,
    StoppingPolicy,
    VideoClip,
)

__all__ = [
    "__version__",
    "DifferenceReport",
    "EmbeddingVector",
    "Frame",
    "IterationRecord",
    "Prompt",
    "ReconstructionSession",
    "RewriteSession",
    "ScoreTrace",
    "SimilarityScore",
    "StoppingPolicy",
    "VideoClip",
]
