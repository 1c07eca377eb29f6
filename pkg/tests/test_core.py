import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from posemt.core import (
    DEFAULT_SWAP_MAP,
    HOLISTIC_GROUPS,
    NO_SWAP,
    Keypoint,
    LandmarkGroup,
    NormalizationSpec,
    PoseOutput,
    SubjectPose,
    SwapMap,
    apply_swap,
    normalization_factor,
    to_pixel,
    to_relative,
)
from posemt.errors import (
    AbsentKeypointError,
    DegenerateNormalizationError,
    InvalidDimensionsError,
    InvalidSwapMapError,
)

coords = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
dims = st.integers(min_value=1, max_value=10_000)


def make_pose(points, kind="body_pose"):
    kps = tuple(Keypoint(landmark_id=i, x=x, y=y) for i, (x, y) in enumerate(points))
    return SubjectPose(groups={kind: kps})


class TestKeypoint:
    def test_in_frame(self):
        assert not Keypoint(0, 0.5, 0.5).is_out_of_frame()
        assert not Keypoint(0, 0.0, 1.0).is_out_of_frame()

    def test_out_of_frame(self):
        assert Keypoint(0, 1.2, 0.5).is_out_of_frame()
        assert Keypoint(0, 0.5, -0.01).is_out_of_frame()

    def test_absent_is_never_out_of_frame(self):
        assert not Keypoint(0, 5.0, 5.0, present=False).is_out_of_frame()


class TestCoordinateConversion:
    @given(coords, coords, dims, dims)
    def test_roundtrip(self, x, y, w, h):
        kp = Keypoint(0, x, y)
        px, py = to_pixel(kp, w, h)
        rx, ry = to_relative(px, py, w, h)
        assert math.isclose(rx, x, abs_tol=1e-12)
        assert math.isclose(ry, y, abs_tol=1e-12)

    def test_known_values(self):
        assert to_pixel(Keypoint(0, 0.5, 0.25), 400, 320) == (200.0, 80.0)

    @pytest.mark.parametrize("w,h", [(0, 10), (10, 0), (-1, 5)])
    def test_invalid_dims(self, w, h):
        with pytest.raises(InvalidDimensionsError):
            to_pixel(Keypoint(0, 0.5, 0.5), w, h)
        with pytest.raises(InvalidDimensionsError):
            to_relative(1.0, 1.0, w, h)

    def test_absent_keypoint_rejected(self):
        with pytest.raises(AbsentKeypointError):
            to_pixel(Keypoint(0, 0.5, 0.5, present=False), 10, 10)


class TestNormalizationFactor:
    group = LandmarkGroup("body_pose", 3, NormalizationSpec((0, 1)))

    def test_known_distance(self):
        pose = make_pose([(0.0, 0.0), (0.3, 0.4), (0.9, 0.9)])
        assert math.isclose(normalization_factor(pose, self.group), 0.5)

    @given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
    def test_translation_invariance(self, dx, dy):
        base = [(0.2, 0.3), (0.6, 0.7), (0.5, 0.5)]
        shifted = [(x + dx, y + dy) for x, y in base]
        assert math.isclose(
            normalization_factor(make_pose(base), self.group),
            normalization_factor(make_pose(shifted), self.group),
            abs_tol=1e-12,
        )

    def test_coincident_pair_degenerate(self):
        pose = make_pose([(0.5, 0.5), (0.5, 0.5), (0.1, 0.1)])
        with pytest.raises(DegenerateNormalizationError):
            normalization_factor(pose, self.group)

    def test_missing_reference_degenerate(self):
        pose = SubjectPose(groups={"body_pose": (Keypoint(0, 0.1, 0.1),)})
        with pytest.raises(DegenerateNormalizationError):
            normalization_factor(pose, self.group)

    def test_absent_reference_degenerate(self):
        pose = SubjectPose(groups={"body_pose": (
            Keypoint(0, 0.1, 0.1), Keypoint(1, 0.2, 0.2, present=False),
        )})
        with pytest.raises(DegenerateNormalizationError):
            normalization_factor(pose, self.group)

    def test_missing_group_degenerate(self):
        pose = SubjectPose(groups={})
        with pytest.raises(DegenerateNormalizationError):
            normalization_factor(pose, self.group)


class TestApplySwap:
    def test_involution(self):
        pose = make_pose([(0.1 * i, 0.05 * i) for i in range(33)])
        once = apply_swap(pose, DEFAULT_SWAP_MAP)
        twice = apply_swap(once, DEFAULT_SWAP_MAP)
        assert twice == pose

    def test_preserves_coordinate_multiset(self):
        pose = make_pose([(0.1 * i, 0.05 * i) for i in range(33)])
        swapped = apply_swap(pose, DEFAULT_SWAP_MAP)
        original = sorted((kp.x, kp.y) for kp in pose.groups["body_pose"])
        result = sorted((kp.x, kp.y) for kp in swapped.groups["body_pose"])
        assert original == result

    def test_swaps_identities(self):
        pose = make_pose([(0.1 * i, 0.0) for i in range(33)])
        swapped = apply_swap(pose, DEFAULT_SWAP_MAP)
        by_id = {kp.landmark_id: kp for kp in swapped.groups["body_pose"]}
        # Landmark 11's coordinates now carry id 12 and vice versa.
        assert by_id[12].x == pytest.approx(1.1)
        assert by_id[11].x == pytest.approx(1.2)

    def test_hand_groups_exchanged(self):
        left = (Keypoint(0, 0.1, 0.1),)
        right = (Keypoint(0, 0.9, 0.9),)
        pose = SubjectPose(groups={"left_hand": left, "right_hand": right})
        swapped = apply_swap(pose, DEFAULT_SWAP_MAP)
        assert swapped.groups["left_hand"] == right
        assert swapped.groups["right_hand"] == left

    def test_single_hand_moves_sides(self):
        pose = SubjectPose(groups={"left_hand": (Keypoint(0, 0.1, 0.1),)})
        swapped = apply_swap(pose, DEFAULT_SWAP_MAP)
        assert "left_hand" not in swapped.groups
        assert swapped.groups["right_hand"] == (Keypoint(0, 0.1, 0.1),)

    def test_no_swap_is_identity(self):
        pose = make_pose([(0.2, 0.3), (0.4, 0.5)])
        assert apply_swap(pose, NO_SWAP) == pose

    def test_unknown_landmark_rejected(self):
        pose = make_pose([(0.2, 0.3)])
        bad = SwapMap(pairs={"body_pose": ((0, 7),)})
        with pytest.raises(InvalidSwapMapError):
            apply_swap(pose, bad)


class TestTopology:
    def test_holistic_group_counts(self):
        assert HOLISTIC_GROUPS["body_pose"].landmark_count == 33
        assert HOLISTIC_GROUPS["face"].landmark_count == 468
        assert HOLISTIC_GROUPS["left_hand"].landmark_count == 21
        assert HOLISTIC_GROUPS["right_hand"].landmark_count == 21

    def test_normalization_pairs(self):
        assert HOLISTIC_GROUPS["body_pose"].normalization.reference_pair == (11, 12)
        assert HOLISTIC_GROUPS["left_hand"].normalization.reference_pair == (0, 9)

    def test_group_validation(self):
        with pytest.raises(ValueError):
            LandmarkGroup("torso", 10, NormalizationSpec((0, 1)))
        with pytest.raises(ValueError):
            LandmarkGroup("body_pose", 0, NormalizationSpec((0, 1)))
        with pytest.raises(ValueError):
            LandmarkGroup("body_pose", 5, NormalizationSpec((0, 9)))
        with pytest.raises(ValueError):
            NormalizationSpec((3, 3))

    def test_pose_output_empty(self):
        assert PoseOutput(subjects=()).empty
        assert not PoseOutput(subjects=(make_pose([(0.1, 0.1)]),)).empty

    def test_subject_rejects_unknown_group(self):
        with pytest.raises(ValueError):
            SubjectPose(groups={"tail": ()})
