"""Violation severity scoring.

The severity of a rule violation on one image is a piecewise value:

- the pose estimator detected subjects on exactly one of the two images:
  infinity (the worst possible violation — the transformations never change
  which landmarks should be detectable);
- it detected subjects on neither image: 0 (coherent behaviour, no violation);
- otherwise: an aggregate (median by default) of per-landmark normalized
  Euclidean distances between expected and actual keypoints.

Distances are normalized by a group-specific reference span (shoulder width
for the body, eye span for the face, wrist-to-first-middle-finger-joint for a
hand) computed on the expected pose, so detection quality on the original
image fixes the scale for the pair.

Median conventions (fixed so reports are bit-reproducible): infinities sort
above every finite value; the median of an even-length list is the arithmetic
mean of the two middle values, except when the list contains infinities, in
which case it is the lower-middle element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from posemt.core import (
    Keypoint,
    LandmarkGroup,
    PoseOutput,
    SubjectPose,
    normalization_factor,
)
from posemt.errors import DegenerateNormalizationError

AGGREGATIONS = ("median", "mean", "min", "max")

DEFAULT_THRESHOLDS = (0.01, 0.05, 0.1, 0.2, 0.3, 0.7, 1.0, 2.0, 5.0, 20.0, math.inf)


@dataclass(frozen=True)
class DistanceRecord:
    landmark_id: int
    normalized_distance: float

    def __post_init__(self):
        if not (self.normalized_distance >= 0):
            raise ValueError("normalized distance must be non-negative")


@dataclass(frozen=True)
class ErrorValue:
    """A severity value: a finite non-negative real, infinity, or unevaluable."""

    value: float | None

    @classmethod
    def unevaluable(cls) -> "ErrorValue":
        return cls(value=None)

    @property
    def is_unevaluable(self) -> bool:
        return self.value is None

    @property
    def is_infinite(self) -> bool:
        return self.value is not None and math.isinf(self.value)


@dataclass(frozen=True)
class ThresholdSet:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        ts = tuple(self.thresholds)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", ts)

    def labels(self) -> tuple[str, ...]:
        return tuple("inf" if math.isinf(t) else format(t, "g") for t in self.thresholds)


def l2_mp(expected: Keypoint | None, actual: Keypoint | None,
          norm: float) -> DistanceRecord | None:
    """Normalized Euclidean distance between two keypoints in (x, y) only.

    A landmark present in exactly one of the two outputs scores infinity;
    absent in both, the record is omitted (returns None).
    """
    if norm <= 0:
        raise DegenerateNormalizationError(f"normalization factor {norm} not positive")
    exp_present = expected is not None and expected.present
    act_present = actual is not None and actual.present
    if not exp_present and not act_present:
        return None
    landmark_id = expected.landmark_id if exp_present else actual.landmark_id
    if exp_present != act_present:
        return DistanceRecord(landmark_id, math.inf)
    dist = math.hypot(expected.x - actual.x, expected.y - actual.y)
    return DistanceRecord(landmark_id, dist / norm)


def median_distance(values: Sequence[float]) -> float:
    """Median with the module's infinity and even-length conventions."""
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        raise ValueError("median of an empty list")
    if n % 2 == 1:
        return ordered[n // 2]
    lower, upper = ordered[n // 2 - 1], ordered[n // 2]
    if any(math.isinf(v) for v in ordered):
        return lower
    return (lower + upper) / 2.0


def aggregate(values: Sequence[float], how: str) -> float:
    if how == "median":
        return median_distance(values)
    if how == "mean":
        return sum(values) / len(values)
    if how == "min":
        return min(values)
    if how == "max":
        return max(values)
    raise ValueError(f"unknown aggregation {how!r}")


def _keypoints_by_id(subject: SubjectPose, kind: str) -> dict[int, Keypoint]:
    return {kp.landmark_id: kp for kp in subject.groups.get(kind, ())}


def _mean_pair_distance(a: SubjectPose, b: SubjectPose) -> float:
    total, count = 0.0, 0
    for kind in a.groups:
        kps_b = _keypoints_by_id(b, kind)
        for kp in a.groups[kind]:
            other = kps_b.get(kp.landmark_id)
            if kp.present and other is not None and other.present:
                total += math.hypot(kp.x - other.x, kp.y - other.y)
                count += 1
    return total / count if count else math.inf


def match_subjects(expected: PoseOutput, actual: PoseOutput) -> list[tuple[SubjectPose | None, SubjectPose | None]]:
    """Pair up subjects between the two outputs.

    Single-subject outputs (the common case) match by index.  With multiple
    subjects, pairs are matched greedily by minimal mean keypoint distance;
    unmatched subjects pair with None and score as absent-vs-present.
    """
    if len(expected.subjects) <= 1 and len(actual.subjects) <= 1:
        pairs: list[tuple[SubjectPose | None, SubjectPose | None]] = []
        for i in range(max(len(expected.subjects), len(actual.subjects))):
            exp = expected.subjects[i] if i < len(expected.subjects) else None
            act = actual.subjects[i] if i < len(actual.subjects) else None
            pairs.append((exp, act))
        return pairs

    remaining = list(range(len(actual.subjects)))
    scored = []
    for i, exp in enumerate(expected.subjects):
        for j, act in enumerate(actual.subjects):
            scored.append((_mean_pair_distance(exp, act), i, j))
    scored.sort()
    used_exp: set[int] = set()
    used_act: set[int] = set()
    pairs = []
    for _, i, j in scored:
        if i in used_exp or j in used_act:
            continue
        used_exp.add(i)
        used_act.add(j)
        pairs.append((expected.subjects[i], actual.subjects[j]))
    for i, exp in enumerate(expected.subjects):
        if i not in used_exp:
            pairs.append((exp, None))
    for j in remaining:
        if j not in used_act:
            pairs.append((None, actual.subjects[j]))
    return pairs


def err_lmks(expected: PoseOutput, actual: PoseOutput, group: LandmarkGroup,
             aggregation: str = "median") -> ErrorValue:
    """Piecewise severity of a rule violation for one landmark group.

    Raises nothing: a degenerate normalization yields an unevaluable value so
    the caller can report the record in diagnostics instead of rates.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if expected.empty != actual.empty:
        return ErrorValue(math.inf)
    if expected.empty and actual.empty:
        return ErrorValue(0.0)

    distances: list[float] = []
    try:
        for exp_subj, act_subj in match_subjects(expected, actual):
            if exp_subj is None and act_subj is None:
                continue
            exp_kps = _keypoints_by_id(exp_subj, group.kind) if exp_subj else {}
            act_kps = _keypoints_by_id(act_subj, group.kind) if act_subj else {}
            if not exp_kps and not act_kps:
                continue
            reference = exp_subj if exp_subj is not None else act_subj
            norm = normalization_factor(reference, group)
            for landmark_id in sorted(set(exp_kps) | set(act_kps)):
                record = l2_mp(exp_kps.get(landmark_id), act_kps.get(landmark_id), norm)
                if record is not None:
                    distances.append(record.normalized_distance)
    except DegenerateNormalizationError:
        return ErrorValue.unevaluable()

    if not distances:
        # Neither output carries this group: coherent behaviour, no violation.
        return ErrorValue(0.0)
    return ErrorValue(aggregate(distances, aggregation))


def assess(err: ErrorValue, t: float) -> str:
    """Verdict at one threshold: 'pass', 'violation' or 'unevaluable'.

    A test passes iff the error is strictly below the threshold, so an error
    exactly at the threshold is a violation, and an infinite error is a
    violation at every threshold including infinity.
    """
    if err.is_unevaluable:
        return "unevaluable"
    if err.value < t:
        return "pass"
    return "violation"


def assess_all(err: ErrorValue, thresholds: ThresholdSet) -> tuple[str, ...]:
    return tuple(assess(err, t) for t in thresholds.thresholds)
