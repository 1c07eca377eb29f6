"""Canonical keypoint data model and coordinate conventions.

Coordinate convention used throughout the harness:

- Keypoints are stored in normalized coordinates: x is a fraction of image
  width, y a fraction of image height, both nominally in [0, 1].
- Origin is the top-left corner and y increases downward, matching the output
  convention of common pose estimators.
- Expected keypoints produced by geometric relations may leave [0, 1]; they
  are flagged out-of-frame but retained.
- z is carried through untouched; no metric in this package reads it.

All values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from posemt.errors import (
    AbsentKeypointError,
    DegenerateNormalizationError,
    InvalidDimensionsError,
    InvalidSwapMapError,
)

GROUP_KINDS = ("body_pose", "face", "left_hand", "right_hand")


@dataclass(frozen=True)
class Keypoint:
    landmark_id: int
    x: float
    y: float
    z: float | None = None
    name: str = ""
    present: bool = True

    def is_out_of_frame(self) -> bool:
        return self.present and not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0)


@dataclass(frozen=True)
class NormalizationSpec:
    """Pair of landmark ids whose distance is the normalization denominator."""

    reference_pair: tuple[int, int]

    def __post_init__(self):
        a, b = self.reference_pair
        if a == b:
            raise ValueError("normalization reference pair must be two distinct ids")


@dataclass(frozen=True)
class LandmarkGroup:
    kind: str
    landmark_count: int
    normalization: NormalizationSpec

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.landmark_count < 1:
            raise ValueError("landmark_count must be positive")
        a, b = self.normalization.reference_pair
        if not (0 <= a < self.landmark_count and 0 <= b < self.landmark_count):
            raise ValueError("normalization reference ids out of range for group")


@dataclass(frozen=True)
class SubjectPose:
    """Keypoints of one detected subject, keyed by landmark-group kind."""

    groups: dict[str, tuple[Keypoint, ...]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "groups",
            {k: tuple(v) for k, v in self.groups.items()},
        )
        for kind in self.groups:
            if kind not in GROUP_KINDS:
                raise ValueError(f"unknown group kind {kind!r}")


@dataclass(frozen=True)
class PoseOutput:
    """Everything a SUT returned for one image; an empty subject list is valid."""

    subjects: tuple[SubjectPose, ...]
    image_id: str = ""
    image_width: int = 0
    image_height: int = 0

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))

    @property
    def empty(self) -> bool:
        return len(self.subjects) == 0


@dataclass(frozen=True)
class SwapMap:
    """Landmark-identity swaps applied by the mirror relation.

    ``pairs`` maps a group kind to id pairs exchanged within that group;
    ``swap_hand_groups`` exchanges the left_hand and right_hand groups
    wholesale.  Applying a SwapMap twice is the identity.
    """

    pairs: dict[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)
    swap_hand_groups: bool = False

    def __post_init__(self):
        object.__setattr__(
            self,
            "pairs",
            {k: tuple(tuple(p) for p in v) for k, v in self.pairs.items()},
        )


# MediaPipe Holistic topology: 33 body landmarks, 468 face, 21 per hand.
HOLISTIC_BODY_COUNT = 33
HOLISTIC_FACE_COUNT = 468
HOLISTIC_HAND_COUNT = 21

# Normalization denominators: shoulder span for the body, outer eye corners
# for the face (closest stable stand-in for the irises on the 468 topology),
# wrist to middle-finger first joint for each hand.
HOLISTIC_GROUPS: dict[str, LandmarkGroup] = {
    "body_pose": LandmarkGroup("body_pose", HOLISTIC_BODY_COUNT, NormalizationSpec((11, 12))),
    "face": LandmarkGroup("face", HOLISTIC_FACE_COUNT, NormalizationSpec((33, 263))),
    "left_hand": LandmarkGroup("left_hand", HOLISTIC_HAND_COUNT, NormalizationSpec((0, 9))),
    "right_hand": LandmarkGroup("right_hand", HOLISTIC_HAND_COUNT, NormalizationSpec((0, 9))),
}

# Left/right landmark pairs of the 33-point body topology.
HOLISTIC_BODY_SWAP_PAIRS: tuple[tuple[int, int], ...] = (
    (1, 4), (2, 5), (3, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16),
    (17, 18), (19, 20), (21, 22), (23, 24), (25, 26), (27, 28), (29, 30),
    (31, 32),
)

DEFAULT_SWAP_MAP = SwapMap(
    pairs={"body_pose": HOLISTIC_BODY_SWAP_PAIRS},
    swap_hand_groups=True,
)

NO_SWAP = SwapMap()


def to_pixel(kp: Keypoint, width: int, height: int) -> tuple[float, float]:
    """Normalized coordinates -> pixel coordinates (top-left origin, y down)."""
    if width <= 0 or height <= 0:
        raise InvalidDimensionsError(f"invalid dimensions {width}x{height}")
    if not kp.present:
        raise AbsentKeypointError(f"landmark {kp.landmark_id} is absent")
    return kp.x * width, kp.y * height


def to_relative(px: float, py: float, width: int, height: int) -> tuple[float, float]:
    """Pixel coordinates -> normalized coordinates; inverse of :func:`to_pixel`."""
    if width <= 0 or height <= 0:
        raise InvalidDimensionsError(f"invalid dimensions {width}x{height}")
    return px / width, py / height


def normalization_factor(pose: SubjectPose, group: LandmarkGroup) -> float:
    """Distance between the group's reference landmarks in normalized coordinates.

    Raises DegenerateNormalizationError when a reference landmark is missing
    or the pair is coincident; the caller marks the record unevaluable.
    Infinity is reserved for detection asymmetry, never for this case.
    """
    keypoints = pose.groups.get(group.kind)
    a_id, b_id = group.normalization.reference_pair
    if keypoints is None:
        raise DegenerateNormalizationError(f"pose has no {group.kind} group")
    by_id = {kp.landmark_id: kp for kp in keypoints}
    a = by_id.get(a_id)
    b = by_id.get(b_id)
    if a is None or b is None or not a.present or not b.present:
        raise DegenerateNormalizationError(
            f"reference landmarks {a_id},{b_id} not both present in {group.kind}"
        )
    dist = math.hypot(a.x - b.x, a.y - b.y)
    if dist == 0.0:
        raise DegenerateNormalizationError(
            f"reference landmarks {a_id},{b_id} coincide in {group.kind}"
        )
    return dist


def apply_swap(pose: SubjectPose, swap: SwapMap) -> SubjectPose:
    """Exchange landmark identities; coordinates are untouched.

    An involution: applying the same SwapMap twice returns the input exactly.
    """
    groups: dict[str, tuple[Keypoint, ...]] = dict(pose.groups)

    for kind, pairs in swap.pairs.items():
        if kind not in groups:
            continue
        keypoints = groups[kind]
        known = {kp.landmark_id for kp in keypoints}
        mapping: dict[int, int] = {}
        for a, b in pairs:
            if a not in known or b not in known:
                raise InvalidSwapMapError(
                    f"swap pair ({a},{b}) references unknown landmark in {kind}"
                )
            mapping[a] = b
            mapping[b] = a
        groups[kind] = tuple(
            replace(kp, landmark_id=mapping.get(kp.landmark_id, kp.landmark_id))
            for kp in keypoints
        )

    if swap.swap_hand_groups:
        left = groups.pop("left_hand", None)
        right = groups.pop("right_hand", None)
        if right is not None:
            groups["left_hand"] = right
        if left is not None:
            groups["right_hand"] = left

    return SubjectPose(groups=groups)
