"""HTTP JSON API over the registry: upload cohorts, train models, score,
preview and commit targeting policies, and fetch per-patient explanations.

The API is a thin shell: every numeric result is produced by the same
library calls a direct caller would make, so responses carry full float
precision and match in-process results exactly. Policy preview is
stateless; only ``PUT /policy`` writes anything. Training requests
serialize on a semaphore so no request can observe a partially written
model.
"""

from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .dataset import AppointmentRecord, RecordSet
from .errors import (DimensionError, EncodingError, NoShowError,
                     PersistenceError, SchemaError, UnknownIdError,
                     ValidationError)
from .evaluation import assign_groups, tune_cutoffs
from .persistence import json_safe
from .pipeline import intervention_report, train_on_records
from .registry import Registry

DEFAULT_FRACTIONS = (0.3, 0.4, 0.3)

# Client-side problems: bad parameters, undefined metrics, empty cohorts.
_BAD_REQUEST = (ValidationError, SchemaError)
# The model's feature schema cannot encode the submitted records.
_CONFLICT = (EncodingError, DimensionError)


class TrainRequest(BaseModel):
    kind: str
    dataset_id: str
    seed: int = 0
    service: str = "all"
    folds: int = 5
    reps: int = 2
    grid: str = "fast"
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS


class ScoreRequest(BaseModel):
    records: list[dict]


class PolicyRequest(BaseModel):
    model_id: str
    dataset_id: str
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS


_RECORD_DEFAULTS = {"outcome": "show", "zone_id": "z-0"}
_INT_FIELDS = ("record_id", "age_years", "lead_time_days", "month")


def _record_from_payload(payload: dict, position: int) -> AppointmentRecord:
    fields = {}
    for name in AppointmentRecord.__dataclass_fields__:
        value = payload.get(name, _RECORD_DEFAULTS.get(name))
        if value is None and name == "record_id":
            value = position
        if value is None:
            raise ValidationError(
                f"record at position {position} is missing {name!r}")
        if name in _INT_FIELDS:
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise ValidationError(
                    f"record at position {position}: {name} must be an "
                    f"integer, got {value!r}") from None
        fields[name] = value
    return AppointmentRecord(**fields)


def create_app(registry: Registry | None = None,
               max_training: int = 1) -> FastAPI:
    registry = registry if registry is not None else Registry()
    app = FastAPI(title="noshow", version="1")
    training_slots = threading.BoundedSemaphore(max_training)

    def _error(status: int, code: str, message: str, detail=None):
        return JSONResponse(status_code=status, content={
            "code": code, "message": message, "detail": detail})

    @app.exception_handler(RequestValidationError)
    async def _on_body_error(request: Request, exc: RequestValidationError):
        return _error(400, "validation", "request body is invalid",
                      json_safe(exc.errors()))

    @app.exception_handler(NoShowError)
    async def _on_domain_error(request: Request, exc: NoShowError):
        code = type(exc).__name__
        if isinstance(exc, UnknownIdError):
            return _error(404, code, str(exc))
        if isinstance(exc, _CONFLICT):
            return _error(409, code, str(exc))
        if isinstance(exc, _BAD_REQUEST) or not isinstance(
                exc, PersistenceError):
            return _error(400, code, str(exc))
        return _error(500, code, str(exc))

    @app.exception_handler(Exception)
    async def _on_crash(request: Request, exc: Exception):
        return _error(500, type(exc).__name__, str(exc))

    # -- datasets ------------------------------------------------------

    @app.post("/datasets")
    def upload_dataset(file: UploadFile):
        try:
            text = file.file.read().decode("utf-8")
        except UnicodeDecodeError as err:
            raise SchemaError(f"dataset is not UTF-8 text: {err}") from None
        dataset_id = registry.add_dataset(text)
        try:
            records = registry.load_dataset(dataset_id)
        except NoShowError:
            registry.dataset_path(dataset_id).unlink()
            raise
        return {"dataset_id": dataset_id, "n": len(records),
                "no_show_rate": float(records.labels.mean())}

    @app.get("/datasets")
    def list_datasets():
        return {"datasets": registry.list_datasets()}

    # -- models --------------------------------------------------------

    @app.post("/models")
    def train_model(body: TrainRequest):
        records = registry.load_dataset(body.dataset_id)
        with training_slots:
            result = train_on_records(
                records, body.kind, seed=body.seed, service=body.service,
                grid=body.grid, folds=body.folds, reps=body.reps,
                fractions=body.fractions)
            model_id = registry.register_model(
                result.artifact, test_metrics=json_safe(result.test_metrics))
        report = result.artifact.cv_report
        return {"model_id": model_id, "kind": body.kind,
                "service": result.artifact.service,
                "dataset_id": body.dataset_id,
                "selection": json_safe(result.selection),
                "cv": {"mean_auroc": report.mean_auroc,
                       "std_auroc": report.std_auroc},
                "test": json_safe(result.test_metrics)}

    @app.get("/models")
    def list_models():
        return {"models": [json_safe(e.to_dict())
                           for e in registry.list_models()]}

    @app.get("/models/{model_id}/report")
    def model_report(model_id: str):
        entry = registry.model_entry(model_id)
        artifact = registry.load_model(model_id)
        report = artifact.cv_report
        return {"model_id": model_id, "kind": entry.kind,
                "service": entry.service, "created_at": entry.created_at,
                "cv": None if report is None else report.to_dict(),
                "test": json_safe(entry.test_metrics)}

    @app.post("/models/{model_id}/score")
    def score_records(model_id: str, body: ScoreRequest):
        artifact = registry.load_model(model_id)
        if not body.records:
            raise ValidationError("no records to score")
        parsed = tuple(_record_from_payload(r, i)
                       for i, r in enumerate(body.records))
        cohort = RecordSet(records=parsed)
        scores = artifact.predict_proba_records(cohort)
        return {"model_id": model_id,
                "record_ids": [int(i) for i in cohort.record_ids],
                "scores": [float(s) for s in scores]}

    # -- policy ----------------------------------------------------------

    def _policy_report(body: PolicyRequest) -> dict:
        artifact = registry.load_model(body.model_id)
        records = registry.load_dataset(body.dataset_id)
        if artifact.service != "all":
            records = records.filter_service(artifact.service)
        report = intervention_report(artifact, records, body.fractions)
        report.update(model_id=body.model_id, dataset_id=body.dataset_id)
        return json_safe(report)

    @app.post("/policy/preview")
    def preview_policy(body: PolicyRequest):
        return _policy_report(body)

    @app.put("/policy")
    def commit_policy(body: PolicyRequest):
        payload = _policy_report(body)
        registry.save_policy(payload)
        return payload

    @app.get("/policy")
    def committed_policy():
        return registry.load_policy()

    # -- patients --------------------------------------------------------

    @app.get("/patients/{record_id}/explanation")
    def patient_explanation(record_id: int, model_id: str, dataset_id: str):
        from .pipeline import explanation_heatmap

        artifact = registry.load_model(model_id)
        records = registry.load_dataset(dataset_id)
        matches = tuple(r for r in records if r.record_id == record_id)
        if not matches:
            raise UnknownIdError(
                f"record {record_id} is not in dataset {dataset_id!r}")
        maps, _ = explanation_heatmap(artifact, RecordSet(records=matches))
        payload = maps[0].to_dict()
        payload.update(model_id=model_id, dataset_id=dataset_id)
        return json_safe(payload)

    @app.get("/cohort")
    def cohort_assignments(model_id: str, dataset_id: str,
                           group: str | None = None,
                           fractions: str | None = None):
        if group is not None and group not in ("A", "B", "C"):
            raise ValidationError(f"group must be A, B, or C, got {group!r}")
        artifact = registry.load_model(model_id)
        records = registry.load_dataset(dataset_id)
        if artifact.service != "all":
            records = records.filter_service(artifact.service)
        fr = _cohort_fractions(fractions)
        scores = artifact.predict_proba_records(records)
        policy = tune_cutoffs(scores, records.record_ids, fr)
        groups = assign_groups(scores, records.record_ids, policy)
        order = np.lexsort((records.record_ids, -scores))
        rows = [{"record_id": int(records.record_ids[i]),
                 "group": str(groups[i]),
                 "score": float(scores[i])}
                for i in order if group is None or groups[i] == group]
        return {"model_id": model_id, "dataset_id": dataset_id,
                "group": group, "fractions": list(fr),
                "policy": json_safe(policy.to_dict()), "patients": rows}

    def _cohort_fractions(text: str | None) -> tuple[float, float, float]:
        if text is not None:
            parts = text.split(",")
            if len(parts) != 3:
                raise ValidationError(
                    f"fractions wants three comma-separated numbers: {text!r}")
            try:
                return tuple(float(p) for p in parts)
            except ValueError:
                raise ValidationError(f"bad fractions {text!r}") from None
        if registry.has_policy():
            committed = registry.load_policy().get("fractions")
            if committed:
                return tuple(committed)
        return DEFAULT_FRACTIONS

    return app
