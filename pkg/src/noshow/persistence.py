"""Model artifacts on disk: JSON files with bit-exact round-trips.

An artifact bundles a fitted model with the feature schema that encodes
raw records for it, so one file is enough to score new CSVs. Writes are
atomic (temp file in the same directory, then rename) and artifacts
carry no timestamps, so retraining with the same inputs and seed yields
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import SERVICES, FeatureSchema, RecordSet, encode_with_schema
from .errors import PersistenceError, ValidationError
from .evaluation import CvReport
from .forest import ForestModel
from .linear import L1Logistic
from .neural import EmbeddingModel, MlpModel

# Payload "kind" markers written by each model's to_dict.
MODEL_KINDS = {
    "l1_logistic": L1Logistic,
    "random_forest": ForestModel,
    "mlp": MlpModel,
    "mlp_embedding": EmbeddingModel,
}

ARTIFACT_VERSION = 1


def json_safe(value):
    """Replace non-finite floats so a payload stays strict JSON.

    Infinities become the strings "inf" / "-inf", which float() parses
    back, so round-tripping through from_dict constructors still works.
    """
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "nan"
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def write_json(payload: dict, path) -> None:
    """Atomic write: readers never observe a partially written file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dump_json(payload))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise PersistenceError(f"no such file: {path}") from None
    except json.JSONDecodeError as err:
        raise PersistenceError(f"{path} is not valid JSON: {err}") from None


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def model_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind not in MODEL_KINDS:
        raise PersistenceError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_dict(payload)


def save_model(model, path) -> None:
    """Write a bare fitted model (no schema) as JSON."""
    payload = model.to_dict()
    if payload.get("kind") not in MODEL_KINDS:
        raise PersistenceError(f"unsupported model type {type(model).__name__}")
    write_json(payload, path)


def load_model(path):
    return model_from_dict(read_json(path))


@dataclass(frozen=True)
class ModelArtifact:
    """A fitted model plus everything needed to score raw records.

    ``service`` records which cohort the model was trained on ("all"
    when no filter was applied); ``cv_report`` is the cross-validation
    assessment at the selected hyperparameters.
    """

    kind: str
    model: object
    schema: FeatureSchema
    service: str
    seed: int
    cv_report: CvReport | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.service != "all" and self.service not in SERVICES:
            raise ValidationError(f"unknown service {self.service!r}")

    def predict_proba_records(self, records: RecordSet) -> np.ndarray:
        if self.kind == "mlp_embedding":
            return self.model.predict_proba_records(records)
        design = encode_with_schema(records, self.schema)
        return self.model.predict_proba(design.X)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "artifact_version": ARTIFACT_VERSION,
            "service": self.service,
            "seed": self.seed,
            "model": self.model.to_dict(),
            "feature_schema": self.schema.to_dict(),
            "cv_report": None if self.cv_report is None
            else self.cv_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelArtifact":
        version = payload.get("artifact_version")
        if version != ARTIFACT_VERSION:
            raise PersistenceError(f"unsupported artifact version {version!r}")
        report = payload.get("cv_report")
        return cls(
            kind=payload["kind"],
            model=model_from_dict(payload["model"]),
            schema=FeatureSchema.from_dict(payload["feature_schema"]),
            service=payload["service"],
            seed=int(payload["seed"]),
            cv_report=None if report is None else CvReport.from_dict(report))


def save_artifact(artifact: ModelArtifact, path) -> None:
    write_json(artifact.to_dict(), path)


def load_artifact(path) -> ModelArtifact:
    payload = read_json(path)
    if "artifact_version" not in payload:
        raise PersistenceError(
            f"{path} is not a model artifact (bare model files have no "
            "feature schema; load them with load_model)")
    return ModelArtifact.from_dict(payload)
