"""Pluggable model backends: interfaces, the deterministic simulation family,
and the remote-HTTP family."""

from .base import (
    AdapterConfig,
    AdapterSet,
    ChatAssistant,
    Comparator,
    Describer,
    Embedder,
    Generator,
    ImageEditor,
    validate_transcript,
)
from .simulation import SimulationParams, build_simulation_adapters

__all__ = [
    "AdapterConfig",
    "AdapterSet",
    "ChatAssistant",
    "Comparator",
    "Describer",
    "Embedder",
    "Generator",
    "ImageEditor",
    "SimulationParams",
    "build_simulation_adapters",
    "validate_transcript",
]
