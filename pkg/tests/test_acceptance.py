"""End-to-end acceptance checks.

Each test exercises one release criterion at its stated tolerance and prints a
single PASS/FAIL line so the run log doubles as an acceptance report.  The
campaign-level criteria share one 50-fixture corpus and one SubRels campaign
run (module-scoped) to stay inside the runtime budgets.
"""

import json
import math
import time

import numpy as np
import pytest

from _references import ref_bilateral, ref_bilinear_resample, ref_median, ref_motion_blur
from posemt import imaging
from posemt.adapters import AdapterHandle
from posemt.analysis import (
    ViolationRecord,
    ViolationTable,
    classic_partition,
    subsumption_matrix,
    threshold_sweep,
    violation_count_histogram,
)
from posemt.campaign import CampaignConfig, run_campaign
from posemt.core import NO_SWAP
from posemt.metrics import ErrorValue, ThresholdSet, aggregate, assess, assess_all, err_lmks
from posemt.rules import build_ruleset

from posemt.core import PoseOutput
from test_metrics import GROUP, reference_pose
from test_rules import ALLRELS_FAMILY_SIZES, SUBRELS_IDS


def report(label: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE [{status}] {label}" + (f" ({detail})" if detail else ""))
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def subrels_campaign(large_corpus, tmp_path_factory):
    """One SubRels campaign over the 50-fixture corpus, shared by the
    geometric-consistency, determinism and identity-soundness criteria."""
    base = tmp_path_factory.mktemp("acceptance")
    config = CampaignConfig(
        image_dir=str(large_corpus / "images"),
        ruleset=build_ruleset("SubRels"),
        adapter=AdapterHandle(kind="synthetic"),
        out_dir=str(base / "run_serial"),
        gt_path=str(large_corpus / "ground_truth.json"),
        mask_dir=str(large_corpus / "masks"),
        cache_dir=str(base / "cache"),
        swap_map=NO_SWAP,
    )
    start = time.monotonic()
    result = run_campaign(config)
    elapsed = time.monotonic() - start
    return {"base": base, "config": config, "result": result, "elapsed": elapsed,
            "corpus": large_corpus}


def test_transform_oracles_match_brute_force_references(rng):
    start = time.monotonic()
    worst = 0
    for _ in range(20):
        img = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
        w = int(rng.integers(3, 25))
        h = int(rng.integers(3, 25))
        got = imaging.resample(img, w, h).astype(int)
        want = ref_bilinear_resample(img, w, h).astype(int)
        worst = max(worst, int(np.abs(got - want).max()))
    for _ in range(20):
        img = rng.integers(0, 256, size=(8, 9, 3), dtype=np.uint8)
        strength = float(rng.choice([10, 50, 125, 180]))
        size = int(rng.choice([3, 5]))
        got = imaging.bilateral_filter(img, strength, size).astype(int)
        want = ref_bilateral(img, strength, size).astype(int)
        worst = max(worst, int(np.abs(got - want).max()))
    for _ in range(20):
        img = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
        length = int(rng.choice([5, 7, 9, 11]))
        angle = float(rng.choice([0, 40, 70, 100]))
        got = imaging.motion_blur(img, length, angle).astype(int)
        want = ref_motion_blur(img, length, angle).astype(int)
        worst = max(worst, int(np.abs(got - want).max()))
    elapsed = time.monotonic() - start
    report("transform oracles (resample/bilateral/motion, 20 images each, ±1 level)",
           worst <= 1 and elapsed < 30,
           f"max deviation {worst} levels, {elapsed:.1f}s")


def test_transform_identities_and_involutions_are_exact(rng):
    start = time.monotonic()
    ok = True
    for _ in range(10):
        img = rng.integers(0, 256, size=(14, 17, 3), dtype=np.uint8)
        ok &= np.array_equal(imaging.gamma_correct(img, 1.0), img)
        ok &= np.array_equal(imaging.brightness_scale(img, 0, 1.0), img)
        ok &= np.array_equal(imaging.hue_rotate(img, 0), img)
        ok &= np.array_equal(imaging.channel_scale(img, (1, 1, 1), "RGB"), img)
        ok &= np.array_equal(imaging.resample(img, 17, 14), img)
        ok &= np.array_equal(imaging.mirror(imaging.mirror(img, "h"), "h"), img)
        ok &= np.array_equal(imaging.mirror(imaging.mirror(img, "v"), "v"), img)
        ok &= np.array_equal(imaging.mirror(img, "both"),
                             imaging.mirror(imaging.mirror(img, "h"), "v"))
    elapsed = time.monotonic() - start
    report("pixel identities and mirror involutions (exact equality)",
           ok and elapsed < 10, f"{elapsed:.1f}s")


def test_geometric_and_quality_rules_close_the_loop_on_fixtures(subrels_campaign):
    table = subrels_campaign["result"].table
    worst: dict[str, float] = {}
    for record in table.records:
        assert not record.error.is_unevaluable, record
        worst[record.rule_id] = max(worst.get(record.rule_id, 0.0), record.error.value)
    bad = {rule: err for rule, err in worst.items() if err > 0.02}
    elapsed = subrels_campaign["elapsed"]
    report("closed-loop consistency: every SubRels rule ≤ 0.02 median error "
           "on 50 fixtures, campaign < 2 min",
           not bad and len(worst) == 19 and elapsed < 120,
           f"worst {max(worst.values()):.4f}, campaign {elapsed:.1f}s"
           + (f", over budget: {bad}" if bad else ""))


def test_error_metric_matches_sort_based_median_oracle(rng):
    ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 469))
        values = list(rng.random(n) * 3)
        n_inf = int(rng.integers(0, 4))
        values[:n_inf] = [math.inf] * min(n_inf, n)
        ok &= aggregate(values, "median") == ref_median(values)

    detected = reference_pose(extra=((0, (0.2, 0.2)),))
    empty = PoseOutput(subjects=())
    xor_inf = err_lmks(detected, empty, GROUP).value == math.inf \
        and err_lmks(empty, detected, GROUP).value == math.inf
    both_zero = err_lmks(empty, empty, GROUP).value == 0.0
    agg_zero = err_lmks(detected, detected, GROUP).value == 0.0
    report("error metric: median oracle on 1000 random lists, "
           "piecewise XOR-empty/both-empty/aggregate cases",
           ok and xor_inf and both_zero and agg_zero)


def test_threshold_verdicts_monotone_boundary_and_infinity(rng):
    thresholds = ThresholdSet()
    order = {"pass": 0, "violation": 1}
    monotone = True
    for _ in range(10_000):
        draw = rng.random()
        if draw < 0.05:
            err = ErrorValue(math.inf)
        elif draw < 0.1:
            err = ErrorValue(float(rng.choice(thresholds.thresholds[:-1])))
        else:
            err = ErrorValue(float(rng.random() * 30))
        verdicts = assess_all(err, thresholds)
        ranks = [order[v] for v in verdicts]
        monotone &= all(a >= b for a, b in zip(ranks, ranks[1:]))
    boundary = assess(ErrorValue(0.2), 0.2) == "violation"
    inf_at_inf = assess(ErrorValue(math.inf), math.inf) == "violation"
    report("threshold semantics: monotone verdicts over 10,000 records, "
           "boundary counts as violation, ∞ violates at t=∞",
           monotone and boundary and inf_at_inf)


def test_analysis_formulas_are_exact():
    thresholds = ThresholdSet((0.1, 0.3, math.inf))
    records = [
        ViolationRecord("img_a", "R1", "body_pose", ErrorValue(0.5)),
        ViolationRecord("img_a", "R2", "body_pose", ErrorValue(0.0)),
        ViolationRecord("img_b", "R1", "body_pose", ErrorValue(0.2)),
        ViolationRecord("img_b", "R2", "body_pose", ErrorValue(0.0)),
        ViolationRecord("img_c", "R1", "body_pose", ErrorValue(0.0)),
        ViolationRecord("img_c", "R2", "body_pose", ErrorValue(0.0)),
    ]
    table = ViolationTable(records)

    matrix = subsumption_matrix(table, 0.1)
    never_violated_row_of_ones = all(
        matrix.rate("R2", other) == 1.0 for other in ("R1", "R2"))
    asymmetry = matrix.rate("R1", "R2") == 0.0 and matrix.rate("R2", "R1") == 1.0

    gt = {"img_a": ErrorValue(0.5), "img_b": ErrorValue(0.0), "img_c": ErrorValue(0.0)}
    partition = classic_partition(table, gt, 0.3)
    partition_sum = sum(v for k, v in partition.items() if k != "excluded_missing_gt")

    histogram = violation_count_histogram(table, thresholds)
    first_band = histogram[thresholds.labels()[0]]
    bands_sum = sum(first_band.values()) == len(table.image_ids())
    sweep = threshold_sweep(table, thresholds)
    zero_share = first_band["0"] / len(table.image_ids()) * 100
    complement = zero_share == pytest.approx(100.0 - sweep[0])

    report("analysis formulas: subsumption never-violated row of ones, "
           "asymmetric pair, partition sums to 100, histogram complements sweep",
           never_violated_row_of_ones and asymmetry
           and partition_sum == pytest.approx(100.0, abs=1e-9)
           and bands_sum and complement)


def test_rule_registry_manifests():
    all_ids = build_ruleset("AllRels").rule_ids()
    families = {}
    for rule_id in all_ids:
        families[rule_id.split("(")[0]] = families.get(rule_id.split("(")[0], 0) + 1
    sub_ids = build_ruleset("SubRels").rule_ids()
    report("rule registry: AllRels enumerates 122 rules by family manifest, "
           "SubRels the fixed 19",
           len(all_ids) == 122 and len(set(all_ids)) == 122
           and families == ALLRELS_FAMILY_SIZES and sub_ids == SUBRELS_IDS,
           f"AllRels={len(all_ids)}, SubRels={len(sub_ids)}")


def test_campaign_bytes_stable_across_parallelism_and_resume(subrels_campaign):
    base = subrels_campaign["base"]
    corpus = subrels_campaign["corpus"]
    serial_bytes = (base / "run_serial" / "table.csv").read_bytes()

    def config_for(out_dir):
        return CampaignConfig(
            image_dir=str(corpus / "images"),
            ruleset=build_ruleset("SubRels"),
            adapter=AdapterHandle(kind="synthetic"),
            out_dir=str(out_dir),
            gt_path=str(corpus / "ground_truth.json"),
            mask_dir=str(corpus / "masks"),
            cache_dir=str(base / "cache"),
            jobs=8,
            swap_map=NO_SWAP,
        )

    run_campaign(config_for(base / "run_parallel"))
    parallel_bytes = (base / "run_parallel" / "table.csv").read_bytes()

    # Interrupted run: a records log cut off mid-campaign, then resumed.
    lines = (base / "run_parallel" / "records.jsonl").read_text().splitlines()
    resumed = base / "run_resumed"
    resumed.mkdir()
    (resumed / "records.jsonl").write_text("\n".join(lines[:len(lines) // 3]) + "\n")
    run_campaign(config_for(resumed))
    resumed_bytes = (resumed / "table.csv").read_bytes()

    report("determinism: table bytes identical for 1 vs 8 jobs and after "
           "interrupt-resume on the 50-fixture corpus",
           serial_bytes == parallel_bytes == resumed_bytes,
           f"{len(serial_bytes)} bytes")


def test_identity_rule_never_violates(subrels_campaign):
    table = subrels_campaign["result"].table
    id_records = [r for r in table.records if r.rule_id == "Id"]
    thresholds = list(ThresholdSet().thresholds) + [1e-9]
    sound = all(
        assess(record.error, t) == "pass"
        for record in id_records for t in thresholds
    )
    report("identity-rule soundness: zero violations at every finite t>0 and t=∞",
           len(id_records) == 50 and sound,
           f"{len(id_records)} images")


def test_acceptance_report_footer(subrels_campaign):
    manifest = json.loads(
        (subrels_campaign["base"] / "run_serial" / "manifest.json").read_text())
    report("campaign manifest records rules, images and config fingerprint",
           len(manifest["images"]) == 50 and len(manifest["rules"]) == 19
           and bool(manifest["config_fingerprint"]))
