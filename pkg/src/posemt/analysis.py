"""Aggregations over a completed violation table.

Four result artifacts are produced:

- threshold sweep: percentage of images with at least one violated rule, per
  threshold (non-increasing in the threshold);
- classic-vs-metamorphic partition: how rule violations overlap with classic
  ground-truth test failures at one threshold;
- subsumption matrix: SubRate(M1, M2) = 1 when M1 is never violated, else
  |images violating both| / |images violating M1|;
- failure-count histogram: how many images violate exactly k rules, banded.

An image "violates at threshold t" when at least one rule is violated for the
selected landmark group; the group is an analysis parameter.  Records marked
unevaluable (adapter failure, degenerate normalization) are excluded from all
denominators and surfaced separately in diagnostics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from posemt.errors import EmptyAnalysisError
from posemt.metrics import ErrorValue, ThresholdSet, assess

HISTOGRAM_BANDS = ("0", "1", "2", "3", "4", "5-30", "31-61", "62-91",
                   "92-121", "122")


@dataclass(frozen=True)
class ViolationRecord:
    image_id: str
    rule_id: str
    group: str
    error: ErrorValue
    reason: str = ""

    @property
    def sort_key(self):
        return (self.image_id, self.rule_id, self.group)


@dataclass
class ViolationTable:
    records: list[ViolationRecord] = field(default_factory=list)

    def add(self, record: ViolationRecord) -> None:
        self.records.append(record)

    def sorted(self) -> "ViolationTable":
        return ViolationTable(sorted(self.records, key=lambda r: r.sort_key))

    def for_group(self, group: str) -> "ViolationTable":
        return ViolationTable([r for r in self.records if r.group == group])

    def evaluable(self) -> list[ViolationRecord]:
        return [r for r in self.records if not r.error.is_unevaluable]

    def unevaluable(self) -> list[ViolationRecord]:
        return [r for r in self.records if r.error.is_unevaluable]

    def image_ids(self) -> list[str]:
        return sorted({r.image_id for r in self.evaluable()})

    def rule_ids(self) -> list[str]:
        seen: list[str] = []
        for r in self.records:
            if r.rule_id not in seen:
                seen.append(r.rule_id)
        return seen

    def violating_images(self, rule_id: str, t: float) -> set[str]:
        return {
            r.image_id
            for r in self.evaluable()
            if r.rule_id == rule_id and assess(r.error, t) == "violation"
        }


def threshold_sweep(table: ViolationTable, thresholds: ThresholdSet) -> list[float]:
    """Percentage of evaluated images with >= 1 violated rule, per threshold."""
    evaluable = table.evaluable()
    if not evaluable:
        raise EmptyAnalysisError("no evaluable records to sweep")
    images = table.image_ids()
    result = []
    for t in thresholds.thresholds:
        violating = {
            r.image_id for r in evaluable if assess(r.error, t) == "violation"
        }
        result.append(100.0 * len(violating) / len(images))
    return result


def classic_partition(table: ViolationTable, gt_errors: dict[str, ErrorValue],
                      t: float) -> dict:
    """Partition images by (rule violation?, classic ground-truth failure?).

    A classic failure is the same metric computed between ground truth and the
    original-image output, assessed at the same threshold.  Images without
    ground truth (or with unevaluable ground-truth error) are excluded and
    counted separately.  The four percentages sum to 100.
    """
    evaluable = table.evaluable()
    if not evaluable:
        raise EmptyAnalysisError("no evaluable records to partition")
    excluded = []
    counts = {"both": 0, "only_metamorphic": 0, "only_classic": 0, "neither": 0}
    mt_violating = {
        r.image_id for r in evaluable if assess(r.error, t) == "violation"
    }
    considered = 0
    for image_id in table.image_ids():
        gt = gt_errors.get(image_id)
        if gt is None or gt.is_unevaluable:
            excluded.append(image_id)
            continue
        considered += 1
        mt_fail = image_id in mt_violating
        classic_fail = assess(gt, t) == "violation"
        if mt_fail and classic_fail:
            counts["both"] += 1
        elif mt_fail:
            counts["only_metamorphic"] += 1
        elif classic_fail:
            counts["only_classic"] += 1
        else:
            counts["neither"] += 1
    if considered == 0:
        raise EmptyAnalysisError("no images with ground truth to partition")
    percentages = {k: 100.0 * v / considered for k, v in counts.items()}
    percentages["excluded_missing_gt"] = len(excluded)
    return percentages


@dataclass(frozen=True)
class SubsumptionMatrix:
    rule_ids: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]

    def rate(self, rule_a: str, rule_b: str) -> float:
        i = self.rule_ids.index(rule_a)
        j = self.rule_ids.index(rule_b)
        return self.entries[i][j]


def subsumption_matrix(table: ViolationTable, t: float,
                       prose_variant: bool = False) -> SubsumptionMatrix:
    """SubRate for every ordered rule pair at threshold t.

    The default implements the published formula verbatim: the denominator is
    the row rule's violation count.  ``prose_variant`` divides by the column
    rule's count instead (the reading suggested by the accompanying prose);
    the two differ and both are exposed rather than silently reconciled.
    """
    rule_ids = tuple(table.rule_ids())
    violations = {rid: table.violating_images(rid, t) for rid in rule_ids}
    rows = []
    for r1 in rule_ids:
        row = []
        for r2 in rule_ids:
            denominator = violations[r2] if prose_variant else violations[r1]
            if not denominator:
                row.append(1.0)
            else:
                row.append(len(violations[r1] & violations[r2]) / len(denominator))
        rows.append(tuple(row))
    return SubsumptionMatrix(rule_ids, tuple(rows))


def _band_for(count: int) -> str:
    if count <= 4:
        return str(count)
    if count <= 30:
        return "5-30"
    if count <= 61:
        return "31-61"
    if count <= 91:
        return "62-91"
    if count <= 121:
        return "92-121"
    return "122"


def violation_count_histogram(table: ViolationTable,
                              thresholds: ThresholdSet) -> dict[str, dict[str, int]]:
    """Per threshold: images violating exactly k rules, in the standard bands.

    Band boundaries follow the 122-rule catalog (quartile bands above k=4);
    they are kept fixed for smaller rule sets so reports stay comparable.
    """
    evaluable = table.evaluable()
    images = table.image_ids()
    out: dict[str, dict[str, int]] = {}
    for t, label in zip(thresholds.thresholds, thresholds.labels()):
        per_image = {image_id: 0 for image_id in images}
        for r in evaluable:
            if assess(r.error, t) == "violation":
                per_image[r.image_id] += 1
        bands = {band: 0 for band in HISTOGRAM_BANDS}
        for count in per_image.values():
            bands[_band_for(count)] += 1
        out[label] = bands
    return out


def _error_repr(error: ErrorValue) -> str:
    if error.is_unevaluable:
        return "unevaluable"
    if error.is_infinite:
        return "inf"
    return repr(error.value)


def write_table_csv(table: ViolationTable, thresholds: ThresholdSet, path) -> None:
    """Long-format CSV: one row per record, one verdict column per threshold."""
    labels = thresholds.labels()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "rule_id", "group", "error", "reason"]
                        + [f"verdict@{label}" for label in labels])
        for record in table.sorted().records:
            verdicts = [assess(record.error, t) for t in thresholds.thresholds]
            writer.writerow([record.image_id, record.rule_id, record.group,
                             _error_repr(record.error), record.reason] + verdicts)


def read_table_csv(path) -> tuple[ViolationTable, ThresholdSet]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        labels = [col.removeprefix("verdict@") for col in header[5:]]
        thresholds = ThresholdSet(tuple(
            math.inf if label == "inf" else float(label) for label in labels
        ))
        table = ViolationTable()
        for row in reader:
            image_id, rule_id, group, error_text, reason = row[:5]
            if error_text == "unevaluable":
                error = ErrorValue.unevaluable()
            elif error_text == "inf":
                error = ErrorValue(math.inf)
            else:
                error = ErrorValue(float(error_text))
            table.add(ViolationRecord(image_id, rule_id, group, error, reason))
    return table, thresholds


def write_summary(path, *, sweep=None, partition=None, subsumption=None,
                  histogram=None, diagnostics=None) -> None:
    """Structured summary of the requested analyses as JSON."""
    summary: dict = {}
    if sweep is not None:
        summary["threshold_sweep"] = sweep
    if partition is not None:
        summary["classic_partition"] = partition
    if subsumption is not None:
        summary["subsumption"] = {
            "rule_ids": list(subsumption.rule_ids),
            "entries": [list(row) for row in subsumption.entries],
        }
    if histogram is not None:
        summary["violation_count_histogram"] = histogram
    if diagnostics is not None:
        summary["diagnostics"] = diagnostics
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
