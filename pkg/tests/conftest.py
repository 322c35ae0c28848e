from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image

from handmend.backends import (
    BackendSet,
    FixtureDetector,
    FixturePoseEstimator,
    HashPatternInpainter,
    MockInstructionEditor,
)
from handmend.templates import TemplateRegistry


@pytest.fixture
def registry() -> TemplateRegistry:
    return TemplateRegistry.built_in()


@pytest.fixture
def mock_backends() -> BackendSet:
    return BackendSet(
        detector=FixtureDetector(),
        pose_estimator=FixturePoseEstimator(),
        control_inpainter=HashPatternInpainter(),
        instruction_inpainter=MockInstructionEditor(),
    )


def make_image(width: int = 320, height: int = 240, value: int = 190) -> np.ndarray:
    return np.full((height, width, 3), value, dtype=np.uint8)


def png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture
def canonical_image() -> np.ndarray:
    return make_image()
