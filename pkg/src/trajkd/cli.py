"""Batch command line: generate, ingest, replay, stats, compare, serve.

Exit codes: 0 success, 2 input error (missing/unparseable files), 3
validation error (invalid data or parameters), 4 replay step failure
under --strict. All randomness flows from explicit seeds in configs and
records; nothing is time-seeded.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .benchmark import BenchmarkConfig, default_config, describe, generate
from .data import export_table, ingest_table, validate
from .errors import IngestError, PipelineError, StepSkipped, TrajkdError
from .evaluation import compare_kdbs, group_stats
from .example_pipeline import build_example_record
from .features import FeatureSpec
from .pipeline import KnowledgeDatabase, PipelineRecord, replay
from .service import ServiceConfig, serve

EXIT_INPUT = 2
EXIT_VALIDATION = 3
EXIT_REPLAY = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(EXIT_INPUT, f"cannot read {path}: {exc}")


def _load_kdb(path: str) -> KnowledgeDatabase:
    text = _read_text(path)
    try:
        if text.lstrip().startswith("{"):
            return KnowledgeDatabase.from_json(text)
        if text.lstrip().startswith("object_id,group_path"):
            # the generator's ground-truth table: every object grouped
            assignments = {}
            for line in text.strip().splitlines()[1:]:
                oid, group_path = line.split(",", 1)
                assignments[oid] = tuple(group_path.split("/"))
            return KnowledgeDatabase(
                source_db_id="", assignments=assignments,
                provenance={oid: "generator" for oid in assignments},
                excluded={}, unassigned=frozenset(), pipeline_hash="")
        return KnowledgeDatabase.from_csv(text)
    except (TrajkdError, json.JSONDecodeError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot parse knowledge database {path}: {exc}")


def _load_db(path: str, db_id: str = "db"):
    text = _read_text(path)
    try:
        result = ingest_table(text, db_id=db_id)
    except TrajkdError as exc:
        _fail(EXIT_VALIDATION, f"ingest failed: {exc}")
    return result


def _parse_feature(spec: str) -> FeatureSpec:
    try:
        if spec.lstrip().startswith("{"):
            return FeatureSpec.from_dict(json.loads(spec))
        return FeatureSpec(kind=spec)
    except (TrajkdError, json.JSONDecodeError, TypeError) as exc:
        _fail(EXIT_VALIDATION, f"bad feature spec {spec!r}: {exc}")


@click.group()
def main():
    """Knowledge discovery for spatio-temporal trajectory databases."""


@main.command(name="generate")
@click.option("--config", "config_path", type=str, default=None,
              help="Benchmark config JSON (defaults to the bundled scenario).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--noise", type=float, default=None,
              help="Override every population's noise sigma.")
@click.option("--out", "out_dir", type=str, required=True,
              help="Output directory for benchmark.csv, ground_truth.csv, config.json.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def generate_cmd(config_path, seed, noise, out_dir, as_json):
    """Generate a ground-truth-labeled benchmark database."""
    if config_path is not None:
        try:
            cfg = BenchmarkConfig.from_json(_read_text(config_path))
        except (TrajkdError, json.JSONDecodeError, TypeError) as exc:
            _fail(EXIT_VALIDATION, f"bad config: {exc}")
    else:
        cfg = default_config()
    if seed is not None or noise is not None:
        base = cfg.to_dict()
        if seed is not None:
            base["seed"] = seed
        if noise is not None:
            for g in base["groups"]:
                g["noise_sigma"] = noise
        cfg = BenchmarkConfig.from_dict(base)

    db, truth = generate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_table(db, str(out / "benchmark.csv"))
    truth_lines = ["object_id,group_path"]
    truth_lines += [f"{oid},{'/'.join(path)}"
                    for oid, path in sorted(truth.assignments.items())]
    (out / "ground_truth.csv").write_text("\n".join(truth_lines) + "\n",
                                          encoding="utf-8")
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    if as_json:
        click.echo(json.dumps({
            "db_id": db.db_id, "n_objects": len(db),
            "frame_range": list(db.frame_range),
            "out_dir": str(out), "config_digest": cfg.digest(),
        }))
    else:
        click.echo(describe(cfg))
        click.echo(f"wrote {out / 'benchmark.csv'}")


@main.command()
@click.argument("csv_path", type=str)
@click.option("--json", "as_json", is_flag=True)
def ingest(csv_path, as_json):
    """Validate a trajectory CSV and report its contents."""
    result = _load_db(csv_path)
    db = result.database
    report = validate(db)
    payload = {
        "db_id": db.db_id,
        "n_objects": len(db),
        "frame_range": list(db.frame_range),
        "n_rows": result.report.n_rows,
        "rejected_rows": [{"line": l, "reason": r}
                          for l, r in result.report.rejected_rows],
        "excluded_objects": [{"object_id": o, "reason": r}
                             for o, r in result.report.excluded_objects],
        "violations": [{"code": v.code, "object_id": v.object_id,
                        "detail": v.detail} for v in report.violations],
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(f"{len(db)} objects, frames {db.frame_range[0]}..{db.frame_range[1]}")
        for line, reason in result.report.rejected_rows:
            click.echo(f"  rejected line {line}: {reason}")
        for oid, reason in result.report.excluded_objects:
            click.echo(f"  excluded {oid}: {reason}")
        for v in report.violations:
            click.echo(f"  violation {v.code} ({v.object_id}): {v.detail}")
    if report.violations:
        sys.exit(EXIT_VALIDATION)


def _parse_overrides(pairs) -> dict:
    overrides: dict = {}
    for raw in pairs:
        try:
            step_id, rest = raw.split("=", 1)
            dotted, value = rest.split(":", 1)
        except ValueError:
            _fail(EXIT_VALIDATION,
                  f"override {raw!r} must look like step=param.path:value")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        overrides.setdefault(step_id, {})[dotted] = parsed
    return overrides


@main.command(name="replay")
@click.option("--pipeline", "pipeline_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--override", "override_pairs", multiple=True,
              help="step=param.path:value (repeatable).")
@click.option("--manual-policy", type=click.Choice(["by-id", "pending"]),
              default="by-id")
@click.option("--strict", is_flag=True,
              help="Fail (exit 4) if any step cannot be applied.")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--json", "as_json", is_flag=True)
def replay_cmd(pipeline_path, data_path, override_pairs, manual_policy,
               strict, out_dir, as_json):
    """Apply a recorded pipeline to a database and export the result."""
    try:
        record = PipelineRecord.from_json(_read_text(pipeline_path))
    except (TrajkdError, json.JSONDecodeError) as exc:
        _fail(EXIT_INPUT, f"cannot parse pipeline {pipeline_path}: {exc}")
    db = _load_db(data_path, db_id=record.source_db_id or "db").database
    overrides = _parse_overrides(override_pairs)
    try:
        kdb, report = replay(record, db, overrides=overrides or None,
                             manual_policy=manual_policy, strict=strict)
    except StepSkipped as exc:
        _fail(EXIT_REPLAY, f"replay step failed: {exc}")
    except TrajkdError as exc:
        _fail(EXIT_VALIDATION, f"replay failed: {exc}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "knowledge_db.csv").write_bytes(kdb.to_csv_bytes())
    (out / "knowledge_db.json").write_bytes(kdb.to_json_bytes())
    (out / "replay_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    leaves = {"/".join(p): len(ids) for p, ids in sorted(kdb.leaf_groups().items())}
    if as_json:
        click.echo(json.dumps({
            "leaves": leaves,
            "excluded": len(kdb.excluded),
            "unassigned": len(kdb.unassigned),
            "pipeline_hash": kdb.pipeline_hash,
            "skipped_steps": [s.step_id for s in report.skipped],
            "out_dir": str(out),
        }))
    else:
        for step in report.steps:
            line = f"  {step.step_id} [{step.kind}] {step.status}"
            if step.status == "applied":
                line += f" in={step.input_size} out={step.outputs}"
            elif step.reason:
                line += f" ({step.reason})"
            click.echo(line)
        click.echo(f"leaf groups: {leaves}")
        click.echo(f"unassigned: {len(kdb.unassigned)}, excluded: {len(kdb.excluded)}")
        click.echo(f"wrote {out / 'knowledge_db.csv'}")


@main.command()
@click.option("--data", "data_path", type=str, required=True)
@click.option("--kdb", "kdb_path", type=str, required=True)
@click.option("--feature", "feature_spec", type=str, required=True,
              help='Feature kind or JSON spec, e.g. mean_curvilinear_speed '
                   'or {"kind": "plane_angle", "plane_normal": [0,1,0]}.')
@click.option("--bins", type=int, default=10)
@click.option("--json", "as_json", is_flag=True)
def stats(data_path, kdb_path, feature_spec, bins, as_json):
    """Per-group statistics of a feature over a knowledge database."""
    db = _load_db(data_path).database
    kdb = _load_kdb(kdb_path)
    # CSV exports do not carry the source id; bind the kdb to the given data
    kdb = KnowledgeDatabase.from_dict({**kdb.to_dict(), "source_db_id": db.db_id})
    feature = _parse_feature(feature_spec)
    try:
        result = group_stats(db, kdb, feature, bins=bins)
    except TrajkdError as exc:
        _fail(EXIT_VALIDATION, f"stats failed: {exc}")
    if as_json:
        click.echo(json.dumps(result.to_dict()))
        return
    click.echo(f"{feature.kind} per group:")
    for g in result.groups:
        if g.count == 0:
            click.echo(f"  {g.group}: empty")
        else:
            click.echo(f"  {g.group}: n={g.count} mean={g.mean:.6g} "
                       f"std={g.std:.6g} min={g.min:.6g} max={g.max:.6g} "
                       f"median={g.median:.6g}")


@main.command()
@click.argument("kdb_a", type=str)
@click.argument("kdb_b", type=str)
@click.option("--depth", type=int, default=None,
              help="Compare group paths truncated to this depth.")
@click.option("--json", "as_json", is_flag=True)
def compare(kdb_a, kdb_b, depth, as_json):
    """Compare two knowledge databases (agreement, ARI, contingency)."""
    a = _load_kdb(kdb_a)
    b = _load_kdb(kdb_b)
    try:
        result = compare_kdbs(a, b, depth=depth)
    except TrajkdError as exc:
        _fail(EXIT_VALIDATION, f"comparison failed: {exc}")
    if as_json:
        click.echo(json.dumps(result.to_dict()))
        return
    click.echo(f"common objects: {result.common_ids} "
               f"(only in a: {result.only_in_a}, only in b: {result.only_in_b})")
    click.echo(f"pairwise agreement: {result.agreement:.6f}")
    click.echo(f"adjusted Rand index: {result.ari:.6f}")
    for m in result.matches:
        click.echo(f"  {m.group} (n={m.size}) best match {m.best_match} "
                   f"overlap {m.overlap} size delta {m.size_delta:+d}")


@main.command(name="serve")
@click.option("--config", "config_path", type=str, default=None,
              help="Service config JSON; TRAJKD_* env vars override.")
def serve_cmd(config_path):
    """Run the HTTP service."""
    try:
        config = ServiceConfig.load(config_path)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot load config: {exc}")
    serve(config)


@main.command(name="export-example-pipeline")
@click.option("--out", "out_path", type=str, default="example_pipeline.json")
@click.option("--seed", type=int, default=None,
              help="Benchmark seed the stored manual labels are built for.")
@click.option("--noise", type=float, default=None)
@click.option("--objects", "n_objects", type=int, default=None)
@click.option("--frames", "n_frames", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
def export_example_pipeline(out_path, seed, noise, n_objects, n_frames, as_json):
    """Write the bundled four-step discovery pipeline record."""
    kwargs = {}
    if seed is not None:
        kwargs["seed"] = seed
    if noise is not None:
        kwargs["noise_sigma"] = noise
    if n_objects is not None:
        kwargs["n_objects"] = n_objects
    if n_frames is not None:
        kwargs["n_frames"] = n_frames
    record = build_example_record(default_config(**kwargs))
    Path(out_path).write_text(record.to_json(indent=2) + "\n", encoding="utf-8")
    if as_json:
        click.echo(json.dumps({"out": out_path, "pipeline_hash": record.digest(),
                               "n_steps": len(record.steps)}))
    else:
        click.echo(f"wrote {out_path} ({len(record.steps)} steps, "
                   f"hash {record.digest()[:12]})")


if __name__ == "__main__":
    main()
