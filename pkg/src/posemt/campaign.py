"""Campaign orchestration: transform, detect, score, report.

A campaign takes an image corpus, a rule set and an adapter, and produces one
violation record per (image, rule, landmark group).  Records are appended to
``records.jsonl`` as they complete, so an interrupted campaign resumes where
it stopped; the final table is sorted by (image_id, rule_id, group) so its
bytes are independent of execution order and parallelism degree.

Also hosts the synthetic fixture generator: seeded images of grey 15x15
markers on a black canvas, one unique grey level per body landmark, together
with exact ground truth (in the replay/ground-truth JSON format) and a zone
mask per image.  The fixture corpus closes the loop with the synthetic
detector at near-zero error, which is what makes desk-scale end-to-end
verification possible.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from posemt import __version__, imaging
from posemt.adapters import AdapterHandle, build_adapter, make_grey_palette
from posemt.analysis import (
    ViolationRecord,
    ViolationTable,
    classic_partition,
    subsumption_matrix,
    threshold_sweep,
    violation_count_histogram,
    write_summary,
    write_table_csv,
)
from posemt.core import (
    DEFAULT_SWAP_MAP,
    HOLISTIC_GROUPS,
    LandmarkGroup,
    PoseOutput,
    SwapMap,
)
from posemt.errors import AdapterFailure, ConfigError
from posemt.metrics import ErrorValue, ThresholdSet, err_lmks
from posemt.rules import RuleSet, apply_transform, expected_output

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

# Fixture geometry: marker blocks large enough to keep a pure core under an
# 11-tap motion blur and a 0.2x downscale, at grid positions that survive a
# 10-degree rotation without leaving the frame.
FIXTURE_WIDTH = 400
FIXTURE_HEIGHT = 320
MARKER_SIZE = 15
FIXTURE_MARGIN = 48
GRID_STEP = 40


@dataclass(frozen=True)
class CampaignConfig:
    image_dir: str
    ruleset: RuleSet
    adapter: AdapterHandle
    out_dir: str
    groups: tuple[str, ...] = ("body_pose",)
    topology: dict[str, LandmarkGroup] = field(default_factory=lambda: dict(HOLISTIC_GROUPS))
    thresholds: ThresholdSet = field(default_factory=ThresholdSet)
    aggregation: str = "median"
    gt_path: str | None = None
    mask_dir: str | None = None
    cache_dir: str | None = None
    jobs: int = 1
    save_modified: bool = False
    swap_map: SwapMap = DEFAULT_SWAP_MAP

    def __post_init__(self):
        if len(self.ruleset) == 0:
            raise ConfigError("refusing to run with an empty rule set")
        if not self.groups:
            raise ConfigError("at least one landmark group must be evaluated")
        for group in self.groups:
            if group not in self.topology:
                raise ConfigError(f"group {group!r} not in topology")
        if not Path(self.image_dir).is_dir():
            raise ConfigError(f"image directory {self.image_dir} does not exist")
        if self.gt_path and not Path(self.gt_path).is_file():
            raise ConfigError(f"ground-truth file {self.gt_path} does not exist")
        if self.mask_dir and not Path(self.mask_dir).is_dir():
            raise ConfigError(f"mask directory {self.mask_dir} does not exist")

    def fingerprint(self) -> str:
        payload = json.dumps({
            "rules": list(self.ruleset.rule_ids()),
            "adapter": self.adapter.fingerprint,
            "groups": list(self.groups),
            "thresholds": self.thresholds.labels(),
            "aggregation": self.aggregation,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class CampaignResult:
    table: ViolationTable
    diagnostics: list[dict]
    gt_errors: dict[str, dict[str, ErrorValue]]
    manifest: dict


def load_ground_truth(path) -> dict[str, PoseOutput]:
    """Ground-truth file: JSON mapping image_id to a wire-format response body."""
    from posemt.adapters import parse_response

    with open(path) as fh:
        data = json.load(fh)
    poses = {}
    for image_id, body in data.items():
        payload = dict(body)
        payload["request_id"] = image_id
        poses[image_id] = parse_response(json.dumps(payload), image_id)
    return poses


def _list_images(image_dir) -> list[Path]:
    return sorted(
        p for p in Path(image_dir).iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES and not p.stem.endswith("_mask")
    )


def _error_to_json(error: ErrorValue) -> str | float | None:
    if error.is_unevaluable:
        return None
    if error.is_infinite:
        return "inf"
    return error.value


def _error_from_json(value) -> ErrorValue:
    if value is None:
        return ErrorValue.unevaluable()
    if value == "inf":
        return ErrorValue(math.inf)
    return ErrorValue(float(value))


def _score_pair(config: CampaignConfig, rule, orig_pose: PoseOutput,
                mod_pose: PoseOutput, orig_dims, mod_dims,
                image_id: str) -> list[ViolationRecord]:
    expected = expected_output(rule, orig_pose, orig_dims, mod_dims,
                               swap_map=config.swap_map)
    records = []
    for group_name in config.groups:
        group = config.topology[group_name]
        error = err_lmks(expected, mod_pose, group, config.aggregation)
        reason = "degenerate-normalization" if error.is_unevaluable else ""
        records.append(ViolationRecord(image_id, rule.rule_id, group_name,
                                       error, reason))
    return records


def _unevaluable_records(config: CampaignConfig, rule, image_id: str,
                         reason: str) -> list[ViolationRecord]:
    return [
        ViolationRecord(image_id, rule.rule_id, group, ErrorValue.unevaluable(), reason)
        for group in config.groups
    ]


def run_campaign(config: CampaignConfig) -> CampaignResult:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"

    done: dict[tuple[str, str, str], ViolationRecord] = {}
    if records_path.exists():
        for line in records_path.read_text().splitlines():
            raw = json.loads(line)
            record = ViolationRecord(raw["image_id"], raw["rule_id"], raw["group"],
                                     _error_from_json(raw["error"]),
                                     raw.get("reason", ""))
            done[record.sort_key] = record

    adapter = build_adapter(config.adapter, cache_dir=config.cache_dir)
    parallel_ok = config.adapter.kind != "external_process" or config.adapter.parallel_safe
    jobs = config.jobs if parallel_ok else 1

    images = _list_images(config.image_dir)
    diagnostics: list[dict] = []
    masks: dict[str, np.ndarray] = {}

    gt_poses = load_ground_truth(config.gt_path) if config.gt_path else {}
    gt_errors: dict[str, dict[str, ErrorValue]] = {g: {} for g in config.groups}

    if config.save_modified:
        (out_dir / "modified").mkdir(exist_ok=True)

    new_records: list[ViolationRecord] = []

    def mask_for(image_id: str) -> np.ndarray | None:
        if config.mask_dir is None:
            return None
        if image_id not in masks:
            path = Path(config.mask_dir) / f"{image_id}.png"
            masks[image_id] = imaging.load_mask(path) if path.exists() else None
        return masks[image_id]

    def process_image(path: Path) -> list[ViolationRecord]:
        image_id = path.stem
        try:
            img = imaging.load_image(path)
        except Exception as exc:
            diagnostics.append({"image_id": image_id, "event": "unreadable-image",
                                "detail": str(exc)})
            return []
        orig_dims = (img.shape[1], img.shape[0])
        try:
            orig_pose = adapter.detect(img, image_id)
        except AdapterFailure as exc:
            diagnostics.append({"image_id": image_id, "event": "adapter-failure",
                                "detail": str(exc)})
            return [
                record
                for rule in config.ruleset.rules
                for record in _unevaluable_records(config, rule, image_id,
                                                   "adapter-failure-original")
                if record.sort_key not in done
            ]

        if image_id in gt_poses:
            for group_name in config.groups:
                gt_errors[group_name][image_id] = err_lmks(
                    gt_poses[image_id], orig_pose,
                    config.topology[group_name], config.aggregation,
                )

        records: list[ViolationRecord] = []
        for rule in config.ruleset.rules:
            if all((image_id, rule.rule_id, g) in done for g in config.groups):
                continue
            mask = mask_for(image_id) if rule.needs_mask else None
            if rule.needs_mask and mask is None:
                records.extend(_unevaluable_records(config, rule, image_id,
                                                    "missing-mask"))
                continue
            modified = apply_transform(rule, img, mask)
            mod_dims = (modified.shape[1], modified.shape[0])
            if config.save_modified:
                imaging.save_image(
                    modified, out_dir / "modified" / f"{image_id}__{rule.rule_id}.png"
                )
            try:
                mod_pose = adapter.detect(modified, f"{image_id}:{rule.rule_id}")
            except AdapterFailure as exc:
                records.extend(_unevaluable_records(
                    config, rule, image_id, f"adapter-failure: {exc}"))
                continue
            records.extend(_score_pair(config, rule, orig_pose, mod_pose,
                                       orig_dims, mod_dims, image_id))
        return records

    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(process_image, images):
                    new_records.extend(result)
        else:
            for path in images:
                new_records.extend(process_image(path))
    finally:
        adapter.close()

    with open(records_path, "a") as fh:
        for record in new_records:
            fh.write(json.dumps({
                "image_id": record.image_id,
                "rule_id": record.rule_id,
                "group": record.group,
                "error": _error_to_json(record.error),
                "reason": record.reason,
            }) + "\n")
            done[record.sort_key] = record

    table = ViolationTable(list(done.values())).sorted()
    manifest = {
        "tool_version": __version__,
        "config_fingerprint": config.fingerprint(),
        "rules": list(config.ruleset.rule_ids()),
        "groups": list(config.groups),
        "images": [p.stem for p in images],
        "aggregation": config.aggregation,
        "thresholds": list(config.thresholds.labels()),
    }
    result = CampaignResult(table, diagnostics, gt_errors, manifest)
    write_table_csv(table, config.thresholds, out_dir / "table.csv")
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result


def write_report(result: CampaignResult, out_dir, analyses: tuple[str, ...] = (),
                 thresholds: ThresholdSet | None = None, group: str | None = None,
                 partition_threshold: float = 0.2) -> dict:
    """Emit the table CSV plus the requested analyses; returns the summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    thresholds = thresholds or ThresholdSet()
    group = group or result.manifest["groups"][0]
    table = result.table.for_group(group)

    write_table_csv(result.table, thresholds, out / "table.csv")

    kwargs: dict = {"diagnostics": {
        "events": result.diagnostics,
        "unevaluable_records": len(result.table.unevaluable()),
    }}
    if "sweep" in analyses:
        kwargs["sweep"] = dict(zip(thresholds.labels(), threshold_sweep(table, thresholds)))
    if "subsumption" in analyses:
        kwargs["subsumption"] = subsumption_matrix(table, partition_threshold)
    if "histogram" in analyses:
        kwargs["histogram"] = violation_count_histogram(table, thresholds)
    if "classic" in analyses:
        gt = result.gt_errors.get(group, {})
        kwargs["partition"] = classic_partition(table, gt, partition_threshold)
    write_summary(out / "summary.json", **kwargs)
    with open(out / "summary.json") as fh:
        return json.load(fh)


def generate_synthetic_dataset(n: int, seed: int, out_dir) -> list[str]:
    """Write n fixture images with exact ground truth and zone masks.

    Fully reproducible from the seed.  The body normalization pair (landmarks
    11 and 12) is placed at the most distant pair of occupied grid cells so
    the normalization denominator never degenerates.
    """
    if n < 1:
        raise ConfigError("need at least one fixture")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    palette = make_grey_palette()
    half = MARKER_SIZE // 2

    cols = (FIXTURE_WIDTH - 2 * FIXTURE_MARGIN) // GRID_STEP
    rows = (FIXTURE_HEIGHT - 2 * FIXTURE_MARGIN) // GRID_STEP
    cells = [(cx, cy) for cy in range(rows) for cx in range(cols)]

    gt: dict[str, dict] = {}
    image_ids = []
    for index in range(n):
        image_id = f"fixture_{index:04d}"
        image_ids.append(image_id)
        chosen = [cells[i] for i in rng.permutation(len(cells))[:len(palette)]]

        def cell_center(cell):
            return (
                FIXTURE_MARGIN + cell[0] * GRID_STEP + GRID_STEP // 2,
                FIXTURE_MARGIN + cell[1] * GRID_STEP + GRID_STEP // 2,
            )

        # Most distant occupied cell pair hosts the normalization landmarks.
        best = max(
            ((a, b) for i, a in enumerate(chosen) for b in chosen[i + 1:]),
            key=lambda pair: (pair[0][0] - pair[1][0]) ** 2 + (pair[0][1] - pair[1][1]) ** 2,
        )
        remaining = [c for c in chosen if c not in best]
        assignment: dict[int, tuple[int, int]] = {11: best[0], 12: best[1]}
        other_ids = [lid for lid in palette if lid not in assignment]
        for lid, cell in zip(other_ids, remaining):
            assignment[lid] = cell

        img = np.zeros((FIXTURE_HEIGHT, FIXTURE_WIDTH, 3), dtype=np.uint8)
        mask = np.zeros((FIXTURE_HEIGHT, FIXTURE_WIDTH), dtype=np.uint8)
        # Zone stripes along the bottom margin, clear of every marker.
        band = slice(FIXTURE_HEIGHT - 30, FIXTURE_HEIGHT - 10)
        mask[band, 20:120] = imaging.ZONE_INDEX["skin"]
        mask[band, 140:240] = imaging.ZONE_INDEX["clothes"]
        mask[band, 260:360] = imaging.ZONE_INDEX["hair"]

        keypoints = []
        for lid in sorted(assignment):
            base_x, base_y = cell_center(assignment[lid])
            cx = base_x + int(rng.integers(-2, 3))
            cy = base_y + int(rng.integers(-2, 3))
            img[cy - half:cy + half + 1, cx - half:cx + half + 1] = palette[lid]
            mask[cy - half:cy + half + 1, cx - half:cx + half + 1] = \
                imaging.ZONE_INDEX["other"]
            keypoints.append({
                "landmark_id": lid,
                "x": (cx + 0.5) / FIXTURE_WIDTH,
                "y": (cy + 0.5) / FIXTURE_HEIGHT,
                "z": None,
                "present": True,
            })

        imaging.save_image(img, out / "images" / f"{image_id}.png")
        imaging.save_mask(mask, out / "masks" / f"{image_id}.png")
        gt[image_id] = {
            "subjects": [{"groups": {"body_pose": keypoints}}],
            "image_width": FIXTURE_WIDTH,
            "image_height": FIXTURE_HEIGHT,
        }

    with open(out / "ground_truth.json", "w") as fh:
        json.dump(gt, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return image_ids
