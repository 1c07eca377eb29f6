"""Metamorphic-rule registry.

A rule binds an image transformation (with a concrete parameter vector, and
optionally a mask zone restricting it) to the relation predicting the
keypoints of the modified image:

- quality and colour transforms expect identical keypoints;
- stretch and resolution changes also expect identical keypoints, because
  coordinates are stored relative to the image dimensions;
- mirror expects reflected coordinates with left/right landmark identities
  swapped (swap configurable);
- rotation expects coordinates rotated in pixel space, with the same angular
  convention as imaging.rotate; points may leave the frame and are kept,
  flagged out-of-frame.

Two built-in presets are provided: ``AllRels``, the full 122-configuration
catalog, and ``SubRels``, its restricted 19-rule subset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from posemt import imaging
from posemt.core import (
    DEFAULT_SWAP_MAP,
    Keypoint,
    PoseOutput,
    SubjectPose,
    SwapMap,
    apply_swap,
)
from posemt.errors import ConfigError

IDENTITY_KEYPOINTS = "identity_keypoints"
MIRRORED_KEYPOINTS = "mirrored_keypoints"
ROTATED_KEYPOINTS = "rotated_keypoints"

TRANSFORM_KINDS = (
    "id", "stretch", "mirror", "rotation", "resolution", "gamma",
    "brightness", "bilateral", "motion", "grey", "colour_wheel",
    "colour_channels", "colour_fill",
)

# Transforms that operate per pixel and therefore may be zone-masked.
PIXELWISE_KINDS = ("gamma", "brightness", "grey", "colour_wheel",
                   "colour_channels", "colour_fill")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, "g")
    if isinstance(value, (list, tuple)):
        return "(" + ",".join(_fmt(v) for v in value) + ")"
    return str(value)


@dataclass(frozen=True)
class MetamorphicRule:
    transform_kind: str
    params: tuple
    relation_kind: str
    masked_zone: str | None = None

    def __post_init__(self):
        if self.transform_kind not in TRANSFORM_KINDS:
            raise ConfigError(f"unknown transform kind {self.transform_kind!r}")
        expected_rel = {
            "mirror": MIRRORED_KEYPOINTS,
            "rotation": ROTATED_KEYPOINTS,
        }.get(self.transform_kind, IDENTITY_KEYPOINTS)
        if self.relation_kind != expected_rel:
            raise ConfigError(
                f"{self.transform_kind} forces relation {expected_rel}, "
                f"got {self.relation_kind}"
            )
        if self.masked_zone is not None and self.transform_kind not in PIXELWISE_KINDS:
            raise ConfigError(f"{self.transform_kind} cannot be zone-masked")
        object.__setattr__(self, "params", tuple(
            tuple(p) if isinstance(p, list) else p for p in self.params
        ))

    @property
    def rule_id(self) -> str:
        names = {
            "id": "Id", "stretch": "Stretch", "mirror": "Mirr",
            "rotation": "Rot", "resolution": "Res", "gamma": "Gamma",
            "brightness": "Bright", "bilateral": "Bilat", "motion": "Motion",
            "grey": "Grey", "colour_wheel": "Wheel",
            "colour_channels": "Chan", "colour_fill": "Fill",
        }
        parts = [_fmt(p) for p in self.params]
        if self.masked_zone is not None:
            parts.append(self.masked_zone)
        body = "(" + ",".join(parts) + ")" if parts else ""
        return names[self.transform_kind] + body

    @property
    def needs_mask(self) -> bool:
        return self.masked_zone is not None

    @property
    def is_geometric(self) -> bool:
        return self.transform_kind in ("stretch", "mirror", "rotation", "resolution")


def make_rule(kind: str, params=(), zone: str | None = None) -> MetamorphicRule:
    relation = {
        "mirror": MIRRORED_KEYPOINTS,
        "rotation": ROTATED_KEYPOINTS,
    }.get(kind, IDENTITY_KEYPOINTS)
    return MetamorphicRule(kind, tuple(params), relation, zone)


@dataclass(frozen=True)
class RuleSet:
    name: str
    rules: tuple[MetamorphicRule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        ids = [r.rule_id for r in self.rules]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ConfigError(f"duplicate rule ids in set {self.name!r}: {sorted(dupes)}")

    def __len__(self) -> int:
        return len(self.rules)

    def rule_ids(self) -> tuple[str, ...]:
        return tuple(r.rule_id for r in self.rules)


# The full catalog.  Table-driven so the presets remain auditable: the motion
# configuration list includes (11, 40), present in the published subsumption
# data though dropped from the settings table, bringing the total to 122.
_STRETCH = [(0.6, 1), (0.8, 1), (0.9, 1.1), (0.95, 1.05), (1, 1.4), (1, 1.25),
            (1, 0.8), (1, 0.6), (1.05, 0.95), (1.1, 0.9), (1.25, 1), (1.4, 1)]
_MIRROR = ["h", "v", "both"]
_ROTATION = [(5, (0.5, 0.5)), (10, (0.5, 0.5)), (15, (0.5, 0.5)), (25, (0.5, 0.5))]
_RESOLUTION = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98]
_GAMMA = [0.25, 0.5, 0.85, 0.95, 1.05, 1.15, 1.5, 1.75]
_BRIGHTNESS = [(-20, 0.8), (-20, 1.6), (0, 1.05), (0, 1.15), (20, 0.4),
               (20, 0.8), (20, 1.2), (20, 1.6), (30, 1.15)]
_BILATERAL = [(s, k) for s in (10, 30, 50, 80, 125, 150, 180) for k in (3, 5, 7, 9)]
_MOTION = [(5, 0), (5, 40), (5, 70), (5, 100), (7, 0), (7, 40), (7, 70),
           (7, 100), (9, 0), (9, 40), (9, 70), (9, 100), (11, 0), (11, 40),
           (11, 70), (11, 100)]
_WHEEL = [(10, "skin"), (30, "skin"), (90, "skin"), (-45, "skin"),
          (10, "clothes"), (30, "clothes"), (90, "clothes"), (-45, "clothes"),
          (90, "hair"), (90, "background")]
_CHANNELS = [([0.9, 1.1, 1.1], "RGB"), ([1.1, 1.1, 0.9], "RGB"),
             ([0.8, 1.3, 1.3], "RGB"), ([1.3, 1.3, 0.8], "RGB"),
             ([0.6, 1.4, 1], "RGB"), ([1.4, 1, 0.6], "RGB"),
             ([0.45, 1, 1.2], "RGB"), ([1.2, 1, 0.45], "RGB"),
             ([1, 1, 1], "BGR"), ([1, 1, 1], "XYZ")]
_FILL = [([0, 0, 255], "background"), ([255, 180, 120], "background"),
         ([33, 28, 27], "background"), ([0, 0, 255], "skin"),
         ([255, 180, 120], "skin"), ([33, 28, 27], "skin"),
         ([0, 0, 255], "clothes"), ([255, 180, 120], "clothes"),
         ([33, 28, 27], "clothes")]


def _all_rules() -> list[MetamorphicRule]:
    rules = [make_rule("id")]
    rules += [make_rule("stretch", cfg) for cfg in _STRETCH]
    rules += [make_rule("mirror", (axis,)) for axis in _MIRROR]
    rules += [make_rule("rotation", cfg) for cfg in _ROTATION]
    rules += [make_rule("resolution", (f,)) for f in _RESOLUTION]
    rules += [make_rule("gamma", (g,)) for g in _GAMMA]
    rules += [make_rule("brightness", cfg) for cfg in _BRIGHTNESS]
    rules += [make_rule("bilateral", cfg) for cfg in _BILATERAL]
    rules += [make_rule("motion", cfg) for cfg in _MOTION]
    rules.append(make_rule("grey"))
    rules += [make_rule("colour_wheel", (theta,), zone) for theta, zone in _WHEEL]
    rules += [make_rule("colour_channels", (factors, enc), "skin")
              for factors, enc in _CHANNELS]
    rules += [make_rule("colour_fill", (colour,), zone) for colour, zone in _FILL]
    return rules


def _sub_rules() -> list[MetamorphicRule]:
    return [
        make_rule("id"),
        make_rule("stretch", (1, 0.8)),
        make_rule("stretch", (1, 0.6)),
        make_rule("stretch", (1.25, 1)),
        make_rule("mirror", ("h",)),
        make_rule("rotation", (5, (0.5, 0.5))),
        make_rule("rotation", (10, (0.5, 0.5))),
        make_rule("resolution", (0.2,)),
        make_rule("resolution", (0.7,)),
        make_rule("gamma", (0.5,)),
        make_rule("brightness", (20, 0.8)),
        make_rule("bilateral", (10, 3)),
        make_rule("bilateral", (80, 7)),
        make_rule("bilateral", (125, 5)),
        make_rule("motion", (11, 0)),
        make_rule("motion", (11, 100)),
        make_rule("grey"),
        make_rule("colour_wheel", (90,), "hair"),
        make_rule("colour_wheel", (90,), "background"),
    ]


def build_ruleset(preset_or_config) -> RuleSet:
    """Instantiate a rule set from a preset name, a config path, or records.

    Records are a list of ``{"kind": ..., "params": [...], "zone": ...}``
    mappings; a config file holds the same list as JSON.
    """
    if isinstance(preset_or_config, str) and preset_or_config in ("AllRels", "SubRels"):
        if preset_or_config == "AllRels":
            return RuleSet("AllRels", _all_rules())
        return RuleSet("SubRels", _sub_rules())

    if isinstance(preset_or_config, str):
        try:
            with open(preset_or_config) as fh:
                records = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read rule config {preset_or_config}: {exc}")
        return build_ruleset(records)

    records = preset_or_config
    if not isinstance(records, list):
        raise ConfigError("rule config must be a list of records")
    rules = []
    for index, record in enumerate(records):
        try:
            rules.append(make_rule(
                record["kind"],
                tuple(record.get("params", ())),
                record.get("zone"),
            ))
        except (ConfigError, KeyError, TypeError) as exc:
            raise ConfigError(f"rule {index}: {exc}")
    return RuleSet("custom", rules)


def transformed_dims(rule: MetamorphicRule, width: int, height: int) -> tuple[int, int]:
    """Output dimensions of the rule's transformation for a given input size."""
    if rule.transform_kind == "stretch":
        h_factor, w_factor = rule.params
        return max(1, round(width * w_factor)), max(1, round(height * h_factor))
    if rule.transform_kind == "resolution":
        (factor,) = rule.params
        return max(1, round(width * factor)), max(1, round(height * factor))
    return width, height


def apply_transform(rule: MetamorphicRule, img: np.ndarray,
                    mask: np.ndarray | None = None) -> np.ndarray:
    """Produce the modified image for one rule.

    Masked rules require this image's zone map; the caller is responsible for
    reporting a missing mask as an unevaluable record.
    """
    kind = rule.transform_kind
    params = rule.params

    pixelwise = {
        "gamma": lambda im: imaging.gamma_correct(im, *params),
        "brightness": lambda im: imaging.brightness_scale(im, *params),
        "grey": imaging.greyscale,
        "colour_wheel": lambda im: imaging.hue_rotate(im, *params),
        "colour_channels": lambda im: imaging.channel_scale(im, *params),
    }

    if rule.masked_zone is not None:
        if mask is None:
            raise ConfigError(f"rule {rule.rule_id} requires a zone mask")
        if kind == "colour_fill":
            (colour,) = params
            return imaging.colour_fill_region(img, colour, mask, rule.masked_zone)
        return imaging.apply_masked(img, pixelwise[kind], mask, rule.masked_zone)

    if kind == "id":
        return img.copy()
    if kind == "stretch":
        new_w, new_h = transformed_dims(rule, img.shape[1], img.shape[0])
        return imaging.resample(img, new_w, new_h)
    if kind == "resolution":
        new_w, new_h = transformed_dims(rule, img.shape[1], img.shape[0])
        return imaging.resample(img, new_w, new_h)
    if kind == "mirror":
        return imaging.mirror(img, *params)
    if kind == "rotation":
        omega, center = params
        return imaging.rotate(img, omega, center)
    if kind == "bilateral":
        return imaging.bilateral_filter(img, *params)
    if kind == "motion":
        return imaging.motion_blur(img, *params)
    if kind in pixelwise:
        return pixelwise[kind](img)
    raise ConfigError(f"unhandled transform kind {kind!r}")


def _mirror_keypoint(kp: Keypoint, axis: str) -> Keypoint:
    x, y = kp.x, kp.y
    if axis in ("h", "both"):
        x = 1.0 - x
    if axis in ("v", "both"):
        y = 1.0 - y
    return replace(kp, x=x, y=y)


def _rotate_keypoint(kp: Keypoint, omega: float, center: tuple[float, float],
                     width: int, height: int) -> Keypoint:
    px, py = kp.x * width, kp.y * height
    qx, qy = imaging.rotate_point(px, py, omega, center[0] * width, center[1] * height)
    return replace(kp, x=qx / width, y=qy / height)


def _map_subject(subject: SubjectPose, fn) -> SubjectPose:
    return SubjectPose(groups={
        kind: tuple(fn(kp) if kp.present else kp for kp in kps)
        for kind, kps in subject.groups.items()
    })


def expected_output(rule: MetamorphicRule, orig: PoseOutput,
                    orig_dims: tuple[int, int] | None = None,
                    mod_dims: tuple[int, int] | None = None,
                    swap_map: SwapMap = DEFAULT_SWAP_MAP) -> PoseOutput:
    """Keypoints the relation predicts for the modified image.

    ``orig_dims``/``mod_dims`` are (width, height); only the rotation relation
    needs them (pixel-space math stays correct on non-square images, where a
    relative-space rotation would shear).  An empty original output predicts
    an empty output.
    """
    if orig.empty:
        return orig

    if rule.relation_kind == IDENTITY_KEYPOINTS:
        return orig

    if rule.relation_kind == MIRRORED_KEYPOINTS:
        (axis,) = rule.params
        subjects = tuple(
            apply_swap(_map_subject(s, partial(_mirror_keypoint, axis=axis)), swap_map)
            for s in orig.subjects
        )
        return replace(orig, subjects=subjects)

    # Rotation: same canvas, so mod_dims equals orig_dims.
    omega, center = rule.params
    width = orig_dims[0] if orig_dims else orig.image_width
    height = orig_dims[1] if orig_dims else orig.image_height
    if width <= 0 or height <= 0:
        raise ConfigError("rotation relation needs positive image dimensions")
    fn = partial(_rotate_keypoint, omega=omega, center=center,
                 width=width, height=height)
    subjects = tuple(_map_subject(s, fn) for s in orig.subjects)
    return replace(orig, subjects=subjects)
