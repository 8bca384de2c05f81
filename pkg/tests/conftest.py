from __future__ import annotations

import numpy as np
import pytest

from clipscript import scene as world
from clipscript.adapters.simulation import SimulationParams, build_simulation_adapters
from clipscript.media import MediaService
from clipscript.model import pixel_digest


class DictFrameStore:
    """In-memory FrameStore for serialization tests."""

    def __init__(self) -> None:
        self.blobs: dict[str, np.ndarray] = {}

    def put_frame(self, pixels: np.ndarray) -> str:
        digest = pixel_digest(pixels)
        self.blobs[digest] = np.array(pixels, copy=True)
        return digest

    def get_frame(self, ref: str) -> np.ndarray:
        return self.blobs[ref]


@pytest.fixture()
def frame_store() -> DictFrameStore:
    return DictFrameStore()


@pytest.fixture()
def media(tmp_path) -> MediaService:
    return MediaService(tmp_path / "data")


@pytest.fixture()
def sim_params() -> SimulationParams:
    return SimulationParams(seed=42)


@pytest.fixture()
def adapters(media, sim_params):
    return build_simulation_adapters(media, sim_params)


@pytest.fixture()
def truth_scene() -> world.SyntheticScene:
    return world.random_scene(np.random.default_rng(7))


@pytest.fixture()
def truth_clip(media, truth_scene):
    return media.put_scene_clip(truth_scene)
