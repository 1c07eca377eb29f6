"""Command-line entry point.

Subcommands:

- ``run``: execute a campaign (transform each image per rule, query the SUT,
  score, write the violation table);
- ``analyze``: derive sweep/subsumption/partition/histogram analyses from a
  previously written table;
- ``gen-synthetic``: generate the seeded fixture corpus.

Any flag of ``run`` may instead come from a JSON config file (--config);
explicit flags override file values.  Exit codes: 0 ran, 1 configuration
error, 2 violations found while --fail-on-violation is set.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from posemt import campaign as campaign_mod
from posemt.adapters import AdapterHandle
from posemt.analysis import (
    classic_partition,
    read_table_csv,
    subsumption_matrix,
    threshold_sweep,
    violation_count_histogram,
    write_summary,
)
from posemt.core import DEFAULT_SWAP_MAP, NO_SWAP
from posemt.errors import ConfigError, PosemtError
from posemt.metrics import DEFAULT_THRESHOLDS, ThresholdSet
from posemt.rules import build_ruleset


def _parse_adapter(spec: str) -> AdapterHandle:
    """Adapter spec: 'synthetic', 'replay:<path>' or 'exec:<command line>'."""
    if spec == "synthetic":
        return AdapterHandle(kind="synthetic")
    if spec.startswith("replay:"):
        return AdapterHandle(kind="replay", replay_path=spec[len("replay:"):])
    if spec.startswith("exec:"):
        return AdapterHandle(kind="external_process",
                             command=tuple(spec[len("exec:"):].split()))
    raise ConfigError(f"unknown adapter spec {spec!r}")


def _parse_thresholds(text: str | None) -> ThresholdSet:
    if not text:
        return ThresholdSet()
    values = tuple(
        math.inf if item.strip() in ("inf", "Inf") else float(item)
        for item in text.split(",")
    )
    return ThresholdSet(values)


@click.group()
def main():
    """Metamorphic-testing harness for pose estimation systems."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON file supplying any of the flags below.")
@click.option("--images", type=click.Path(), help="Directory of input images.")
@click.option("--rules", "rules_spec", help="Preset name (AllRels, SubRels) or rule config file.")
@click.option("--sut", "adapter_spec", help="synthetic | replay:<path> | exec:<command>.")
@click.option("--groups", default=None, help="Comma-separated landmark groups.")
@click.option("--thresholds", default=None, help="Comma-separated thresholds (inf allowed).")
@click.option("--aggregation", default=None,
              type=click.Choice(["median", "mean", "min", "max"]))
@click.option("--masks", type=click.Path(), default=None, help="Zone-mask directory.")
@click.option("--gt", type=click.Path(), default=None, help="Ground-truth JSON file.")
@click.option("--cache", type=click.Path(), default=None, help="Detection cache directory.")
@click.option("--out", type=click.Path(), default=None, help="Output directory.")
@click.option("--jobs", type=int, default=None, help="Parallelism degree.")
@click.option("--save-modified", is_flag=True, default=None,
              help="Write every modified image to disk.")
@click.option("--no-mirror-swap", is_flag=True, default=None,
              help="Do not swap left/right landmark identities in the mirror relation.")
@click.option("--fail-on-violation", is_flag=True, default=False)
@click.option("--violation-threshold", type=float, default=0.2,
              help="Threshold used by --fail-on-violation.")
def run(config_path, images, rules_spec, adapter_spec, groups, thresholds,
        aggregation, masks, gt, cache, out, jobs, save_modified,
        no_mirror_swap, fail_on_violation, violation_threshold):
    """Run a metamorphic-testing campaign."""
    file_values = {}
    if config_path:
        file_values = json.loads(Path(config_path).read_text())

    def pick(flag_value, key, default=None):
        if flag_value is not None:
            return flag_value
        return file_values.get(key, default)

    try:
        images = pick(images, "images")
        rules_spec = pick(rules_spec, "rules")
        adapter_spec = pick(adapter_spec, "sut")
        out = pick(out, "out")
        if not all([images, rules_spec, adapter_spec, out]):
            raise ConfigError("--images, --rules, --sut and --out are required")
        group_names = pick(groups, "groups", "body_pose")
        if isinstance(group_names, str):
            group_names = tuple(g.strip() for g in group_names.split(","))
        swap = NO_SWAP if pick(no_mirror_swap, "no_mirror_swap", False) else DEFAULT_SWAP_MAP
        config = campaign_mod.CampaignConfig(
            image_dir=images,
            ruleset=build_ruleset(rules_spec),
            adapter=_parse_adapter(adapter_spec),
            out_dir=out,
            groups=tuple(group_names),
            thresholds=_parse_thresholds(pick(thresholds, "thresholds")),
            aggregation=pick(aggregation, "aggregation", "median"),
            gt_path=pick(gt, "gt"),
            mask_dir=pick(masks, "masks"),
            cache_dir=pick(cache, "cache"),
            jobs=int(pick(jobs, "jobs", 1)),
            save_modified=bool(pick(save_modified, "save_modified", False)),
            swap_map=swap,
        )
    except (ConfigError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)

    try:
        result = campaign_mod.run_campaign(config)
    except PosemtError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    evaluable = result.table.evaluable()
    click.echo(f"wrote {len(result.table.records)} records "
               f"({len(result.table.unevaluable())} unevaluable) to {out}")
    if fail_on_violation:
        from posemt.metrics import assess
        if any(assess(r.error, violation_threshold) == "violation" for r in evaluable):
            sys.exit(2)


@main.command("analyze")
@click.option("--table", "table_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Summary output path (default: alongside the table).")
@click.option("--group", default="body_pose")
@click.option("--sweep", is_flag=True)
@click.option("--subsumption", "want_subsumption", is_flag=True)
@click.option("--classic", "gt_errors_path", type=click.Path(exists=True), default=None,
              help="JSON of per-image classic errors for the partition analysis.")
@click.option("--histogram", is_flag=True)
@click.option("--threshold", type=float, default=0.2,
              help="Threshold for subsumption and partition analyses.")
def analyze(table_path, out, group, sweep, want_subsumption, gt_errors_path,
            histogram, threshold):
    """Compute analyses over an existing violation table CSV."""
    from posemt.campaign import _error_from_json

    table, thresholds = read_table_csv(table_path)
    table = table.for_group(group)
    out = out or str(Path(table_path).with_name("summary.json"))
    kwargs = {}
    try:
        if sweep:
            kwargs["sweep"] = dict(zip(thresholds.labels(),
                                       threshold_sweep(table, thresholds)))
        if want_subsumption:
            kwargs["subsumption"] = subsumption_matrix(table, threshold)
        if histogram:
            kwargs["histogram"] = violation_count_histogram(table, thresholds)
        if gt_errors_path:
            raw = json.loads(Path(gt_errors_path).read_text())
            gt_errors = {k: _error_from_json(v) for k, v in raw.items()}
            kwargs["partition"] = classic_partition(table, gt_errors, threshold)
    except PosemtError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    write_summary(out, **kwargs)
    click.echo(f"wrote {out}")


@main.command("gen-synthetic")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def gen_synthetic(n, seed, out):
    """Generate the seeded synthetic fixture corpus."""
    try:
        ids = campaign_mod.generate_synthetic_dataset(n, seed, out)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(ids)} fixtures to {out}")


if __name__ == "__main__":
    main()
