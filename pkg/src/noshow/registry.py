"""File-backed registry of datasets, model artifacts, and the policy.

Layout under the root directory (``NOSHOW_DATA_DIR`` or ``~/.noshow``)::

    datasets/<dataset_id>.csv
    models/<model_id>.json        model artifact (content-addressed)
    models/<model_id>.meta.json   registry entry (timestamps live here)
    manifests/<name>.json         CLI run manifests
    policy.json                   the committed targeting policy

Ids are content hashes, so re-registering identical bytes is a no-op
and returns the same id. Artifact and meta writes happen under a file
lock (training jobs serialize on commits); reads need no lock because
every write is an atomic rename.
"""

from __future__ import annotations

import datetime
import fcntl
import hashlib
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .dataset import RecordSet, ingest_csv
from .errors import PersistenceError, UnknownIdError
from .persistence import (ModelArtifact, dump_json, load_artifact, read_json,
                          write_json)

DATA_DIR_ENV = "NOSHOW_DATA_DIR"


def default_root() -> Path:
    configured = os.environ.get(DATA_DIR_ENV)
    if configured:
        return Path(configured)
    return Path.home() / ".noshow"


def _content_id(prefix: str, data: bytes) -> str:
    return prefix + hashlib.sha256(data).hexdigest()[:12]


@dataclass(frozen=True)
class RegistryEntry:
    """What the registry knows about a model besides its artifact."""

    model_id: str
    kind: str  # linear | forest | mlp
    service: str
    schema_version: int
    created_at: str
    artifact_path: str
    mean_cv_auroc: float | None
    std_cv_auroc: float | None
    test_metrics: dict | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "RegistryEntry":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


# Artifact payload kind -> registry entry kind.
ENTRY_KINDS = {"l1_logistic": "linear", "random_forest": "forest",
               "mlp": "mlp", "mlp_embedding": "mlp"}


class Registry:
    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_root()
        for sub in ("datasets", "models", "manifests"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    @contextmanager
    def _commit_lock(self):
        lock_path = self.root / ".lock"
        with open(lock_path, "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    # -- datasets -----------------------------------------------------------

    def add_dataset(self, csv_text: str) -> str:
        data = csv_text.encode("utf-8")
        dataset_id = _content_id("d", data)
        path = self.root / "datasets" / f"{dataset_id}.csv"
        if not path.exists():
            tmp = path.with_suffix(".csv.tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return dataset_id

    def dataset_path(self, dataset_id: str) -> Path:
        path = self.root / "datasets" / f"{dataset_id}.csv"
        if not path.exists():
            raise UnknownIdError(f"unknown dataset {dataset_id!r}")
        return path

    def load_dataset(self, dataset_id: str) -> RecordSet:
        return ingest_csv(self.dataset_path(dataset_id))

    def list_datasets(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "datasets").glob("d*.csv"))

    # -- models -------------------------------------------------------------

    def register_model(self, artifact: ModelArtifact,
                       test_metrics: dict | None = None) -> str:
        blob = dump_json(artifact.to_dict()).encode("utf-8")
        model_id = _content_id("m", blob)
        artifact_path = self.root / "models" / f"{model_id}.json"
        report = artifact.cv_report
        entry = RegistryEntry(
            model_id=model_id,
            kind=ENTRY_KINDS[artifact.kind],
            service=artifact.service,
            schema_version=1,
            created_at=datetime.datetime.now(datetime.timezone.utc)
            .isoformat(timespec="seconds"),
            artifact_path=str(artifact_path),
            mean_cv_auroc=None if report is None else report.mean_auroc,
            std_cv_auroc=None if report is None else report.std_auroc,
            test_metrics=test_metrics)
        with self._commit_lock():
            if not artifact_path.exists():
                tmp = artifact_path.with_suffix(".json.tmp")
                tmp.write_bytes(blob)
                os.replace(tmp, artifact_path)
                write_json(entry.to_dict(), self._meta_path(model_id))
        return model_id

    def _meta_path(self, model_id: str) -> Path:
        return self.root / "models" / f"{model_id}.meta.json"

    def model_entry(self, model_id: str) -> RegistryEntry:
        path = self._meta_path(model_id)
        if not path.exists():
            raise UnknownIdError(f"unknown model {model_id!r}")
        return RegistryEntry.from_dict(read_json(path))

    def load_model(self, model_id: str) -> ModelArtifact:
        return load_artifact(Path(self.model_entry(model_id).artifact_path))

    def list_models(self) -> list[RegistryEntry]:
        metas = sorted((self.root / "models").glob("m*.meta.json"))
        return [RegistryEntry.from_dict(read_json(p)) for p in metas]

    # -- policy -------------------------------------------------------------

    def save_policy(self, payload: dict) -> None:
        write_json(payload, self.root / "policy.json")

    def load_policy(self) -> dict:
        path = self.root / "policy.json"
        if not path.exists():
            raise UnknownIdError("no policy has been committed")
        return read_json(path)

    def has_policy(self) -> bool:
        return (self.root / "policy.json").exists()

    # -- manifests ----------------------------------------------------------

    def manifest_path(self, name: str) -> Path:
        return self.root / "manifests" / f"{name}.json"
