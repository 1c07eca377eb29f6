"""Metamorphic-testing harness for black-box pose estimation systems.

The harness applies rule-defined image transformations, computes the keypoints
each rule's relation predicts for the modified image, queries a pose estimator
on both images, scores violations with a normalized median-distance metric and
aggregates the results into threshold sweeps, subsumption matrices and
ground-truth comparisons.
"""

from posemt.core import (
    Keypoint,
    LandmarkGroup,
    NormalizationSpec,
    PoseOutput,
    SubjectPose,
    SwapMap,
)
from posemt.rules import MetamorphicRule, RuleSet, build_ruleset, expected_output
from posemt.metrics import ErrorValue, ThresholdSet, assess, err_lmks, l2_mp

__version__ = "0.1.0"

__all__ = [
    "Keypoint",
    "LandmarkGroup",
    "NormalizationSpec",
    "SubjectPose",
    "PoseOutput",
    "SwapMap",
    "MetamorphicRule",
    "RuleSet",
    "build_ruleset",
    "expected_output",
    "ErrorValue",
    "ThresholdSet",
    "l2_mp",
    "err_lmks",
    "assess",
]
