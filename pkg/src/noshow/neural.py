"""One-hidden-layer neural network with weighted cross-entropy training.

Training is deterministic full-batch gradient descent for an exact
iteration count, with the learning rate halved (and the step rejected)
whenever the loss would increase, so the loss trace is non-increasing.
An optional entity-embedding input stage replaces one-hot columns with
jointly trained per-variable tables.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ClassWeights, FeatureSchema, RecordSet, level_index_matrix
from .errors import DimensionError, DivergenceError, SearchError, ValidationError
from .evaluation import CvReport, auroc, stratified_fold_indices
from .linear import sigmoid

log = logging.getLogger(__name__)

NN_ITERATION_GRID = tuple(range(100, 1601, 100))


def nn_hidden_grid(n_inputs: int) -> tuple[int, ...]:
    """Ten integer hidden widths evenly spaced over [ceil(N/2), 2N]."""
    if n_inputs < 1:
        raise ValidationError("need at least one input")
    lo, hi = math.ceil(n_inputs / 2), 2 * n_inputs
    values = np.unique(np.rint(np.linspace(lo, hi, 10)).astype(int))
    return tuple(int(v) for v in values)


@dataclass(frozen=True)
class TrainConfig:
    n_iterations: int
    weights: ClassWeights
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ValidationError("n_iterations must be >= 0")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")

    def to_dict(self) -> dict:
        return {"n_iterations": self.n_iterations,
                "learning_rate": self.learning_rate,
                "w_show": self.weights.w_show,
                "w_no_show": self.weights.w_no_show}

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        return cls(int(d["n_iterations"]),
                   ClassWeights(float(d["w_show"]), float(d["w_no_show"])),
                   float(d["learning_rate"]))


@dataclass(frozen=True)
class MlpModel:
    """Immutable network parameters; hidden relu, sigmoid output."""

    W1: np.ndarray  # H x N
    b1: np.ndarray  # H
    W2: np.ndarray  # H
    b2: float
    seed: int
    config: TrainConfig | None = None
    loss_trace: tuple[float, ...] = ()

    def __post_init__(self):
        H, N = self.W1.shape
        if self.b1.shape != (H,) or self.W2.shape != (H,):
            raise DimensionError("parameter shapes disagree")
        for arr in (self.W1, self.b1, self.W2):
            if not np.isfinite(arr).all():
                raise ValidationError("parameters must be finite")
            arr.setflags(write=False)
        if not np.isfinite(self.b2):
            raise ValidationError("parameters must be finite")

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    def predict_proba(self, X) -> np.ndarray:
        return forward(self, X).probability

    def to_dict(self) -> dict:
        return {"kind": "mlp", "schema_version": 1,
                "N": self.n_inputs, "H": self.n_hidden,
                "W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "W2": self.W2.tolist(), "b2": self.b2, "seed": self.seed,
                "train_config": None if self.config is None
                else self.config.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "MlpModel":
        cfg = d.get("train_config")
        model = cls(np.array(d["W1"], dtype=np.float64),
                    np.array(d["b1"], dtype=np.float64),
                    np.array(d["W2"], dtype=np.float64),
                    float(d["b2"]), int(d["seed"]),
                    None if cfg is None else TrainConfig.from_dict(cfg))
        if (model.n_inputs, model.n_hidden) != (int(d["N"]), int(d["H"])):
            raise ValidationError("stored N/H disagree with weight shapes")
        return model


def init_mlp(n_inputs: int, n_hidden: int, seed: int = 0) -> MlpModel:
    """Uniform Glorot weights within ±sqrt(6/(fan_in+fan_out)), zero biases."""
    if n_inputs < 1 or n_hidden < 1:
        raise ValidationError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (n_inputs + n_hidden))
    W1 = rng.uniform(-lim1, lim1, size=(n_hidden, n_inputs))
    lim2 = math.sqrt(6.0 / (n_hidden + 1))
    W2 = rng.uniform(-lim2, lim2, size=n_hidden)
    return MlpModel(W1, np.zeros(n_hidden), W2, 0.0, seed)


@dataclass(frozen=True)
class ForwardPass:
    """All intermediates of one forward pass (relevance propagation
    consumes every layer, not just the output)."""

    x: np.ndarray
    hidden_pre: np.ndarray
    hidden_post: np.ndarray
    output_pre: np.ndarray
    probability: np.ndarray


def forward(model: MlpModel, X) -> ForwardPass:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_inputs:
        raise DimensionError(
            f"row width {X.shape[1]} but model expects {model.n_inputs}")
    z1 = X @ model.W1.T + model.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ model.W2 + model.b2
    return ForwardPass(X, z1, h, z2, sigmoid(z2))


def weighted_bce_loss(p, y, w) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    terms = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    return float((w * terms).sum() / w.sum())


def loss_and_grads(model: MlpModel, X, y, row_weights):
    """Weighted BCE and its gradients for every parameter tensor."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(row_weights, dtype=np.float64)
    fp = forward(model, X)
    loss = weighted_bce_loss(fp.probability, y, w)
    resid = w * (fp.probability - y) / w.sum()  # dL/dz2 per row
    dW2 = fp.hidden_post.T @ resid
    db2 = float(resid.sum())
    dh = np.outer(resid, model.W2)
    dz1 = dh * (fp.hidden_pre > 0)
    dW1 = dz1.T @ X
    db1 = dz1.sum(axis=0)
    dX = dz1 @ model.W1  # needed by the embedding stage
    return loss, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2, "dX": dX}


def train(model: MlpModel, X, y, config: TrainConfig) -> MlpModel:
    """Exactly n_iterations full-batch steps; a step that would raise the
    loss is rejected and the learning rate halved, so the recorded trace
    never increases."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValidationError("no rows")
    if len(np.unique(y)) < 2:
        raise ValidationError("training needs both classes present")
    w = config.weights.per_row(y)

    W1, b1 = model.W1.copy(), model.b1.copy()
    W2, b2 = model.W2.copy(), model.b2
    lr = config.learning_rate
    cur = MlpModel(W1, b1, W2, b2, model.seed)
    loss, grads = loss_and_grads(cur, X, y, w)
    if not np.isfinite(loss):
        raise DivergenceError("loss non-finite before training", iteration=0)
    trace = [loss]
    for it in range(config.n_iterations):
        cand = MlpModel(cur.W1 - lr * grads["W1"], cur.b1 - lr * grads["b1"],
                        cur.W2 - lr * grads["W2"], cur.b2 - lr * grads["b2"],
                        model.seed)
        cand_loss, cand_grads = loss_and_grads(cand, X, y, w)
        if not np.isfinite(cand_loss):
            raise DivergenceError("loss became non-finite", iteration=it + 1)
        if cand_loss > loss:
            lr *= 0.5
            trace.append(loss)
            continue
        cur, loss, grads = cand, cand_loss, cand_grads
        trace.append(loss)
    return MlpModel(cur.W1, cur.b1, cur.W2, cur.b2, model.seed, config,
                    tuple(trace))


def make_nn_trainer(n_hidden: int, config_weights_from_fold: bool,
                    n_iterations: int, learning_rate: float = 0.1,
                    seed: int = 0):
    """Trainer closure for cross_validate."""
    from .dataset import class_weights

    def train_fold(X_train, y_train):
        weights = class_weights(y_train) if config_weights_from_fold \
            else ClassWeights(1.0, 1.0)
        cfg = TrainConfig(n_iterations, weights, learning_rate)
        model = train(init_mlp(X_train.shape[1], n_hidden, seed),
                      X_train, y_train, cfg)
        return model.predict_proba
    return train_fold


def grid_search_nn(X, y, weights: ClassWeights, cv_folds: int = 10,
                   seed: int = 0, iteration_grid: Sequence[int] | None = None,
                   hidden_grid: Sequence[int] | None = None,
                   learning_rate: float = 0.1,
                   ) -> tuple[int, TrainConfig, CvReport]:
    """Mean CV AUROC over the Table-style grid of (iterations, width);
    ties prefer the smaller width, then fewer iterations."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] < 2 * cv_folds:
        raise SearchError(f"{X.shape[0]} rows cannot fill {cv_folds} folds twice")
    if iteration_grid is None:
        iteration_grid = NN_ITERATION_GRID
    if hidden_grid is None:
        hidden_grid = nn_hidden_grid(X.shape[1])
    cells = list(itertools.product(hidden_grid, iteration_grid))
    if not cells:
        raise SearchError("empty grid")

    rng = np.random.default_rng([seed, 0])
    folds = stratified_fold_indices(y, cv_folds, rng)
    all_idx = np.arange(X.shape[0])
    results = []
    for H, iters in cells:
        cfg = TrainConfig(iters, weights, learning_rate)
        scores = []
        try:
            for held_out in folds:
                tr = np.setdiff1d(all_idx, held_out, assume_unique=True)
                model = train(init_mlp(X.shape[1], H, seed), X[tr], y[tr], cfg)
                scores.append(auroc(model.predict_proba(X[held_out]),
                                    y[held_out]))
        except Exception as exc:  # noqa: BLE001 - isolate broken cells
            log.warning("grid cell H=%d iters=%d failed: %s", H, iters, exc)
            continue
        results.append((H, cfg, CvReport(np.array([scores]), cv_folds, 1, seed)))
    if not results:
        raise SearchError("every grid cell failed")
    best = max(r[2].mean_auroc for r in results)
    near = [r for r in results if r[2].mean_auroc == best]
    return min(near, key=lambda r: (r[0], r[1].n_iterations))


# ---------------------------------------------------------------------------
# Entity embeddings


def default_embedding_dim(n_levels: int) -> int:
    if n_levels < 2:
        raise ValidationError("embedding needs at least 2 levels")
    return min(n_levels - 1, math.ceil(n_levels / 2))


@dataclass(frozen=True)
class EmbeddingTable:
    variable: str
    levels: tuple[str, ...]
    table: np.ndarray  # levels x dim

    def __post_init__(self):
        if self.table.shape[0] != len(self.levels):
            raise DimensionError("one table row per level")
        if not 1 <= self.table.shape[1] <= len(self.levels) - 1:
            raise ValidationError(
                f"dim {self.table.shape[1]} out of [1, levels-1] "
                f"for {self.variable}")
        self.table.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.table.shape[1]


@dataclass(frozen=True)
class EmbeddingSpec:
    tables: tuple[EmbeddingTable, ...]

    @property
    def total_dim(self) -> int:
        return sum(t.dim for t in self.tables)

    def to_dict(self) -> dict:
        return {"schema_version": 1,
                "tables": [{"variable": t.variable, "levels": list(t.levels),
                            "table": t.table.tolist()} for t in self.tables]}

    @classmethod
    def from_dict(cls, d) -> "EmbeddingSpec":
        return cls(tuple(
            EmbeddingTable(t["variable"], tuple(t["levels"]),
                           np.array(t["table"], dtype=np.float64))
            for t in d["tables"]))


def init_embeddings(schema: FeatureSchema, seed: int = 0,
                    dims: dict[str, int] | None = None) -> EmbeddingSpec:
    """Per-variable tables with orthonormal columns (QR of a Gaussian
    draw), so distinct levels start well separated. Single-level blocks
    carry no information and are skipped."""
    rng = np.random.default_rng(seed)
    tables = []
    for blk in schema.blocks:
        n_levels = len(blk.levels)
        if n_levels < 2:
            continue
        dim = (dims or {}).get(blk.variable, default_embedding_dim(n_levels))
        raw = rng.normal(size=(n_levels, dim))
        q, _ = np.linalg.qr(raw)
        tables.append(EmbeddingTable(blk.variable, blk.levels, q[:, :dim].copy()))
    if not tables:
        raise ValidationError("no variable has two or more levels to embed")
    return EmbeddingSpec(tuple(tables))


def embedding_columns(schema: FeatureSchema, spec: EmbeddingSpec) -> list[int]:
    """Column of level_index_matrix(schema) backing each embedding table."""
    by_var = {blk.variable: j for j, blk in enumerate(schema.blocks)}
    return [by_var[t.variable] for t in spec.tables]


def embed_rows(spec: EmbeddingSpec, level_indices: np.ndarray) -> np.ndarray:
    """(n, n_variables) level indices -> (n, total_dim) float matrix."""
    if level_indices.shape[1] != len(spec.tables):
        raise DimensionError("one index column per embedded variable")
    parts = [t.table[level_indices[:, j]] for j, t in enumerate(spec.tables)]
    return np.concatenate(parts, axis=1)


@dataclass(frozen=True)
class EmbeddingModel:
    """Embedding tables plus the MLP trained on top of them."""

    spec: EmbeddingSpec
    mlp: MlpModel
    schema: FeatureSchema

    def predict_proba_indices(self, level_indices) -> np.ndarray:
        return self.mlp.predict_proba(embed_rows(self.spec, level_indices))

    def predict_proba_records(self, records: RecordSet) -> np.ndarray:
        idx = level_index_matrix(records, self.schema)
        return self.predict_proba_indices(
            idx[:, embedding_columns(self.schema, self.spec)])

    def to_dict(self) -> dict:
        return {"kind": "mlp_embedding", "schema_version": 1,
                "spec": self.spec.to_dict(), "mlp": self.mlp.to_dict(),
                "schema": self.schema.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "EmbeddingModel":
        return cls(EmbeddingSpec.from_dict(d["spec"]),
                   MlpModel.from_dict(d["mlp"]),
                   FeatureSchema.from_dict(d["schema"]))


def embedding_loss_and_grads(spec: EmbeddingSpec, mlp: MlpModel,
                             level_indices, y, row_weights):
    """Joint gradients: MLP tensors plus one gradient per embedding table."""
    X = embed_rows(spec, level_indices)
    loss, grads = loss_and_grads(mlp, X, y, row_weights)
    table_grads = []
    offset = 0
    for j, t in enumerate(spec.tables):
        dT = np.zeros_like(t.table)
        dcols = grads["dX"][:, offset:offset + t.dim]
        np.add.at(dT, level_indices[:, j], dcols)
        table_grads.append(dT)
        offset += t.dim
    return loss, grads, table_grads


def fit_embeddings(records: RecordSet, schema: FeatureSchema,
                   config: TrainConfig, n_hidden: int | None = None,
                   seed: int = 0, dims: dict[str, int] | None = None,
                   ) -> EmbeddingModel:
    """Train embedding tables jointly with the MLP by full-batch descent,
    with the same halving safeguard and exact iteration count as train."""
    if len(records) == 0:
        raise ValidationError("no records")
    y = records.labels
    if len(np.unique(y)) < 2:
        raise ValidationError("training needs both classes present")
    w = config.weights.per_row(y)

    spec = init_embeddings(schema, seed=seed, dims=dims)
    idx = level_index_matrix(records, schema)[:, embedding_columns(schema, spec)]
    if n_hidden is None:
        n_hidden = max(4, spec.total_dim)
    mlp = init_mlp(spec.total_dim, n_hidden, seed)

    lr = config.learning_rate
    loss, grads, tgrads = embedding_loss_and_grads(spec, mlp, idx, y, w)
    for it in range(config.n_iterations):
        cand_spec = EmbeddingSpec(tuple(
            EmbeddingTable(t.variable, t.levels, t.table - lr * dT)
            for t, dT in zip(spec.tables, tgrads)))
        cand_mlp = MlpModel(mlp.W1 - lr * grads["W1"], mlp.b1 - lr * grads["b1"],
                            mlp.W2 - lr * grads["W2"], mlp.b2 - lr * grads["b2"],
                            seed)
        cand_loss, cand_grads, cand_tgrads = embedding_loss_and_grads(
            cand_spec, cand_mlp, idx, y, w)
        if not np.isfinite(cand_loss):
            raise DivergenceError("loss became non-finite", iteration=it + 1)
        if cand_loss > loss:
            lr *= 0.5
            continue
        spec, mlp = cand_spec, cand_mlp
        loss, grads, tgrads = cand_loss, cand_grads, cand_tgrads
    final_mlp = MlpModel(mlp.W1, mlp.b1, mlp.W2, mlp.b2, seed, config)
    return EmbeddingModel(spec, final_mlp, schema)
