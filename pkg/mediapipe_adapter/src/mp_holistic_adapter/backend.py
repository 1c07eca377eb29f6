"""MediaPipe Holistic backend.

Holistic runs in static image mode, always: each image is processed
independently, which is what makes repeated requests on the same image
deterministic. The backend maps Holistic's four landmark lists onto the
protocol's group kinds without touching the coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from mp_holistic_adapter.protocol import keypoint

GROUP_ATTRS = (
    ("body_pose", "pose_landmarks"),
    ("face", "face_landmarks"),
    ("left_hand", "left_hand_landmarks"),
    ("right_hand", "right_hand_landmarks"),
)


@dataclass(frozen=True)
class HolisticConfig:
    model_complexity: int = 1
    min_detection_confidence: float = 0.5
    # Static image mode is not configurable: the harness sends independent
    # images, and tracking mode would make responses order-dependent.
    static_image_mode: bool = True

    def __post_init__(self):
        if self.model_complexity not in (0, 1, 2):
            raise ValueError("model complexity must be 0, 1 or 2")
        if not self.static_image_mode:
            raise ValueError("static image mode cannot be disabled")


def load_rgb(image_path: str) -> np.ndarray:
    with Image.open(image_path) as img:
        return np.asarray(img.convert("RGB"))


class HolisticBackend:
    """Wraps one mediapipe Holistic instance; detect() returns subject dicts."""

    def __init__(self, config: HolisticConfig):
        import mediapipe as mp

        self._holistic = mp.solutions.holistic.Holistic(
            static_image_mode=config.static_image_mode,
            model_complexity=config.model_complexity,
            min_detection_confidence=config.min_detection_confidence,
        )

    def detect(self, image_path: str) -> list[dict]:
        rgb = load_rgb(image_path)
        results = self._holistic.process(rgb)
        groups: dict[str, list[dict]] = {}
        for kind, attr in GROUP_ATTRS:
            landmark_list = getattr(results, attr)
            if landmark_list is None:
                continue
            groups[kind] = [
                keypoint(index, lm.x, lm.y, getattr(lm, "z", None))
                for index, lm in enumerate(landmark_list.landmark)
            ]
        # Holistic is single-subject: no detection at all means no subjects.
        return [{"groups": groups}] if groups else []

    def close(self) -> None:
        self._holistic.close()
