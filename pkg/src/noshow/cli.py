"""Command-line interface: generate, train, evaluate, score, explain,
tune, and serve.

Every command that writes files also writes a run manifest next to its
primary output (inputs and outputs with sha256 hashes, arguments, seed,
versions), so any run can be replayed and checked. Exit codes: 0 ok,
1 validation error, 2 runtime error; errors are emitted as JSON on
stderr.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, synth
from .dataset import SERVICES, RecordSet, ingest_csv, write_csv
from .errors import NoShowError, ValidationError
from .evaluation import tune_cutoffs
from .persistence import (json_safe, load_artifact, read_json, save_artifact,
                          sha256_file, write_json)
from .pipeline import KINDS, explanation_heatmap, intervention_report, \
    train_on_records
from .registry import Registry


def _echo(payload: dict) -> None:
    click.echo(json.dumps(json_safe(payload), indent=2))


def _write_report(payload: dict, path) -> None:
    write_json(json_safe(payload), path)


def _parse_fractions(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(
            f"--fractions wants three comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"bad fractions {text!r}") from None


def _write_manifest(command: str, arguments: dict, inputs: list,
                    outputs: list, seed: int | None) -> Path:
    primary = Path(outputs[0])
    manifest = {
        "command": command,
        "arguments": json_safe(arguments),
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "versions": {"noshow": __version__,
                     "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    path = primary.with_name(primary.name + ".manifest.json")
    write_json(manifest, path)
    return path


@click.group()
@click.version_option(version=__version__, prog_name="noshow")
def cli():
    """Appointment no-show scoring, explanation, and intervention tuning."""


@cli.command()
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False), help="CSV to write.")
@click.option("--preset",
              type=click.Choice(["population", "null", "service",
                                 "interaction", "recovery"]),
              default="population", show_default=True)
@click.option("--service", type=click.Choice(SERVICES), default=None,
              help="Service for --preset service.")
@click.option("--n", "n_rows", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--spec", "spec_path", type=click.Path(exists=True),
              default=None, help="GeneratorSpec JSON; overrides --preset.")
@click.option("--calendar-effects", is_flag=True,
              help="Add month/weekday effects to calibrated presets.")
def generate(out_path, preset, service, n_rows, seed, spec_path,
             calendar_effects):
    """Write a synthetic appointment cohort as CSV."""
    inputs = []
    if spec_path:
        spec = synth.GeneratorSpec.from_dict(read_json(spec_path))
        records = synth.generate(spec)
        inputs.append(spec_path)
    elif preset == "population":
        records = synth.generate_population(
            n_rows, seed, include_calendar_effects=calendar_effects)
    elif preset == "service":
        if service is None:
            raise ValidationError("--preset service needs --service")
        records = synth.generate(synth.reference_service_spec(
            service, n_rows, seed,
            include_calendar_effects=calendar_effects))
    elif preset == "null":
        records = synth.generate(synth.null_spec(n_rows, seed))
    elif preset == "interaction":
        records = synth.generate(synth.interaction_demo_spec(n_rows, seed))
    else:
        records = synth.generate(synth.recovery_spec(n_rows, seed))
    write_csv(records, out_path)
    manifest = _write_manifest(
        "generate",
        {"preset": preset, "service": service, "n": n_rows,
         "spec": spec_path, "calendar_effects": calendar_effects},
        inputs, [out_path], seed)
    _echo({"out": out_path, "n": len(records),
           "no_show_rate": float(records.labels.mean()),
           "manifest": str(manifest)})


@cli.command()
@click.option("--model", "kind", type=click.Choice(KINDS), required=True)
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--service", type=click.Choice(SERVICES + ("all",)),
              default="all", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--grid", type=click.Choice(["fast", "full"]), default="fast",
              show_default=True, help="Hyperparameter grid size.")
@click.option("--fractions", default="0.3,0.4,0.3", show_default=True)
def train(kind, in_path, out_path, service, seed, folds, reps, grid,
          fractions):
    """Train one model kind and write its artifact (model + schema)."""
    records = ingest_csv(in_path)
    result = train_on_records(records, kind, seed=seed, service=service,
                              grid=grid, folds=folds, reps=reps,
                              fractions=_parse_fractions(fractions))
    save_artifact(result.artifact, out_path)
    manifest = _write_manifest(
        "train",
        {"model": kind, "service": service, "folds": folds, "reps": reps,
         "grid": grid, "fractions": fractions},
        [in_path], [out_path], seed)
    report = result.artifact.cv_report
    _echo({"out": out_path, "kind": kind, "service": service,
           "selection": result.selection,
           "cv": {"mean_auroc": report.mean_auroc,
                  "std_auroc": report.std_auroc,
                  "n_folds": report.n_folds, "n_reps": report.n_reps},
           "test": result.test_metrics,
           "manifest": str(manifest)})


@cli.command()
@click.option("--model-file", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--fractions", default="0.3,0.4,0.3", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Also write the report as JSON.")
def evaluate(model_path, in_path, fractions, out_path):
    """Report AUROC, coverage, and risk of an artifact on a labeled CSV.

    When the artifact was trained on a single service, the input is
    filtered to that service first.
    """
    artifact = load_artifact(model_path)
    records = ingest_csv(in_path)
    if artifact.service != "all":
        records = records.filter_service(artifact.service)
    report = intervention_report(artifact, records,
                                 _parse_fractions(fractions))
    report["service"] = artifact.service
    if artifact.cv_report is not None:
        report["cv"] = {"mean_auroc": artifact.cv_report.mean_auroc,
                        "std_auroc": artifact.cv_report.std_auroc}
    if out_path:
        _write_report(report, out_path)
        report["manifest"] = str(_write_manifest(
            "evaluate", {"fractions": fractions},
            [model_path, in_path], [out_path], None))
    _echo(report)


@cli.command()
@click.option("--model-file", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
def score(model_path, in_path, out_path):
    """Write no-show probabilities as CSV (record_id, score)."""
    artifact = load_artifact(model_path)
    records = ingest_csv(in_path)
    probabilities = artifact.predict_proba_records(records)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("record_id", "score"))
        for record_id, p in zip(records.record_ids, probabilities):
            writer.writerow((int(record_id), repr(float(p))))
    manifest = _write_manifest("score", {}, [model_path, in_path],
                               [out_path], None)
    _echo({"out": out_path, "n": len(records), "manifest": str(manifest)})


@cli.command()
@click.option("--model-file", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False),
              help="Heatmap table; .json for maps + table, else CSV.")
@click.option("--ids", "ids_text", default=None,
              help="Comma-separated record ids (default: whole file).")
def explain(model_path, in_path, out_path, ids_text):
    """Per-patient relevance decomposition of an mlp artifact's logits."""
    artifact = load_artifact(model_path)
    records = ingest_csv(in_path)
    if ids_text:
        wanted = {int(part) for part in ids_text.split(",")}
        subset = tuple(r for r in records if r.record_id in wanted)
        missing = wanted - {r.record_id for r in subset}
        if missing:
            raise ValidationError(f"record ids not in input: {sorted(missing)}")
        records = RecordSet(records=subset)
    maps, table = explanation_heatmap(artifact, records)
    if out_path.endswith(".json"):
        _write_report({"heatmap": table.to_dict(),
                       "maps": [m.to_dict() for m in maps]}, out_path)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
    manifest = _write_manifest("explain", {"ids": ids_text},
                               [model_path, in_path], [out_path], None)
    _echo({"out": out_path, "n": len(records), "manifest": str(manifest)})


@cli.command()
@click.option("--scores", "scores_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV with record_id,score columns (see `score`).")
@click.option("--fractions", default="0.3,0.4,0.3", show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
def tune(scores_path, fractions, out_path):
    """Tune two cut-off thresholds realizing the group fractions."""
    record_ids, scores = _read_scores(scores_path)
    policy = tune_cutoffs(scores, record_ids, _parse_fractions(fractions))
    payload = policy.to_dict()
    payload["n"] = len(scores)
    _write_report(payload, out_path)
    manifest = _write_manifest("tune", {"fractions": fractions},
                               [scores_path], [out_path], None)
    _echo({**json_safe(payload), "out": out_path, "manifest": str(manifest)})


def _read_scores(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["record_id", "score"]:
            raise ValidationError(
                f"scores file must have header record_id,score, got {header}")
        ids, scores = [], []
        for line_number, row in enumerate(reader, start=2):
            try:
                ids.append(int(row[0]))
                scores.append(float(row[1]))
            except (IndexError, ValueError):
                raise ValidationError(
                    f"bad scores row at line {line_number}: {row}") from None
    if not ids:
        raise ValidationError("scores file has no rows")
    return np.array(ids), np.array(scores)


@cli.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", "data_dir", type=click.Path(file_okay=False),
              default=None, help="Registry root (default: NOSHOW_DATA_DIR).")
def serve(port, host, data_dir):
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app
    app = create_app(Registry(data_dir))
    uvicorn.run(app, host=host, port=port)


def _emit_error(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"code": code, "message": message}) + "\n")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as status:
        return status.exit_code
    except click.ClickException as err:
        _emit_error("usage", err.format_message())
        return 1
    except NoShowError as err:
        _emit_error(type(err).__name__, str(err))
        return 1
    except click.exceptions.Abort:
        _emit_error("aborted", "interrupted")
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        _emit_error(type(err).__name__, str(err))
        return 2


if __name__ == "__main__":
    sys.exit(main())
