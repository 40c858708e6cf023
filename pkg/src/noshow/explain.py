"""Layer-wise relevance propagation for the one-hidden-layer network.

The propagated quantity is the pre-sigmoid logit, redistributed with the
epsilon rule at both layers. Positive relevance supports a higher no-show
logit. Bias and epsilon shares are absorbed, not redistributed, and the
absorbed amount is tracked so conservation can be checked exactly:
sum(per_column) + absorbed = output_relevance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import FeatureSchema
from .errors import PropagationError, ValidationError
from .neural import MlpModel, forward

EPSILON = 1e-9


@dataclass(frozen=True)
class RelevanceMap:
    """Signed relevance of every input column for one scored record."""

    record_id: int
    probability: float
    output_relevance: float  # the pre-sigmoid logit being redistributed
    per_column: np.ndarray
    absorbed: float  # bias + epsilon share kept out of per_column
    column_names: tuple[str, ...] | None = None
    per_variable: dict[str, float] | None = None

    def __post_init__(self):
        self.per_column.setflags(write=False)

    def conservation_residual(self) -> float:
        return float(self.output_relevance
                     - self.per_column.sum() - self.absorbed)

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "probability": self.probability,
            "output_relevance": self.output_relevance,
            "per_column": self.per_column.tolist(),
            "absorbed": self.absorbed,
            "column_names": None if self.column_names is None
            else list(self.column_names),
            "per_variable": self.per_variable,
        }


def _signed(z: np.ndarray | float) -> np.ndarray | float:
    return np.where(np.asarray(z) >= 0, 1.0, -1.0)


def lrp(model: MlpModel, x, schema: FeatureSchema | None = None,
        record_id: int = -1, epsilon: float = EPSILON) -> RelevanceMap:
    """Epsilon-rule relevance of each input column for one encoded row."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    fp = forward(model, x)
    if not (np.isfinite(fp.hidden_pre).all() and np.isfinite(fp.output_pre).all()):
        raise PropagationError("non-finite activation in forward pass")

    z2 = float(fp.output_pre[0])
    contrib = fp.hidden_post[0] * model.W2  # z_jk for the output unit
    r_hidden = contrib * (z2 / (z2 + epsilon * float(_signed(z2))))
    absorbed = z2 - float(r_hidden.sum())

    z1 = fp.hidden_pre[0]
    denom = z1 + epsilon * _signed(z1)
    ratios = (x[None, :] * model.W1) / denom[:, None]
    per_column = ratios.T @ r_hidden
    absorbed += float(r_hidden.sum() - per_column.sum())

    column_names = None
    per_variable = None
    if schema is not None:
        if schema.width != x.size:
            raise ValidationError(
                f"schema width {schema.width} differs from row width {x.size}")
        column_names = schema.column_names
        per_variable = {}
        for j in range(schema.width):
            var = schema.column_variable(j)
            per_variable[var] = per_variable.get(var, 0.0) + float(per_column[j])

    return RelevanceMap(record_id, float(fp.probability[0]), z2,
                        per_column, absorbed, column_names, per_variable)


def explain_cohort(model: MlpModel, X, record_ids,
                   schema: FeatureSchema | None = None,
                   epsilon: float = EPSILON) -> list[RelevanceMap]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    record_ids = np.asarray(record_ids)
    if X.shape[0] != record_ids.shape[0]:
        raise ValidationError("one record_id per row")
    return [lrp(model, X[i], schema, int(record_ids[i]), epsilon)
            for i in range(X.shape[0])]


@dataclass(frozen=True)
class HeatmapTable:
    """Cohort heatmap: one column per patient, one row per variable.

    Columns are ordered by descending no-show probability; variables with
    no nonzero relevance anywhere in the cohort are dropped.
    """

    variables: tuple[str, ...]
    record_ids: tuple[int, ...]
    probabilities: tuple[float, ...]
    cells: np.ndarray  # len(variables) x len(record_ids)

    def __post_init__(self):
        if self.cells.shape != (len(self.variables), len(self.record_ids)):
            raise ValidationError("cell grid must be variables x records")
        self.cells.setflags(write=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["variable"] + [str(r) for r in self.record_ids])
        writer.writerow(["probability"] + [repr(p) for p in self.probabilities])
        for i, var in enumerate(self.variables):
            writer.writerow([var] + [repr(float(c)) for c in self.cells[i]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"variables": list(self.variables),
                "record_ids": list(self.record_ids),
                "probabilities": list(self.probabilities),
                "cells": [list(map(float, row)) for row in self.cells]}


def relevance_heatmap(maps: Sequence[RelevanceMap]) -> HeatmapTable:
    """Assemble per-variable relevances into the cohort heatmap layout."""
    if not maps:
        raise ValidationError("no relevance maps to tabulate")
    if any(m.per_variable is None for m in maps):
        raise ValidationError("heatmap needs schema-resolved relevance maps")
    variables = tuple(maps[0].per_variable.keys())
    for m in maps:
        if tuple(m.per_variable.keys()) != variables:
            raise ValidationError("relevance maps disagree on variables")

    order = sorted(range(len(maps)),
                   key=lambda i: (-maps[i].probability, maps[i].record_id))
    cells = np.array([[maps[i].per_variable[v] for i in order]
                      for v in variables])
    keep = [k for k, v in enumerate(variables) if np.any(cells[k] != 0.0)]
    return HeatmapTable(
        tuple(variables[k] for k in keep),
        tuple(maps[i].record_id for i in order),
        tuple(maps[i].probability for i in order),
        cells[keep] if keep else np.zeros((0, len(order))),
    )
