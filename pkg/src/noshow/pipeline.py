"""End-to-end training and scoring flows shared by the CLI and the API.

One call takes raw records to a ready artifact: service filter, 70/30
stratified split, coarse classing on the training side, encoding,
hyperparameter search, a cross-validation report at the selected
configuration, a final fit, and held-out metrics. Both interface layers
stay thin wrappers so their numbers are the library's numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import (RecordSet, build_schema, class_weights, coarse_class,
                      encode_with_schema, split)
from .errors import ValidationError
from .evaluation import (CvReport, assign_groups, auroc, coverage_risk,
                         cross_validate, tune_cutoffs)
from .explain import explain_cohort, relevance_heatmap
from .forest import fit_forest, grid_search_rf, rf_param_grid, rf_param_grid_fast
from .linear import (fit_l1_logistic, make_l1_trainer, path_search,
                     select_penalty)
from .neural import (TrainConfig, grid_search_nn, init_mlp, make_nn_trainer,
                     train)
from .persistence import ModelArtifact

KINDS = ("linear", "forest", "mlp")
PAYLOAD_KINDS = {"linear": "l1_logistic", "forest": "random_forest",
                 "mlp": "mlp"}

NN_FAST_ITERATIONS = (200, 400)
NN_FAST_HIDDEN = (4, 8)


@dataclass(frozen=True)
class TrainResult:
    artifact: ModelArtifact
    selection: dict
    test_metrics: dict


def default_bins(records: RecordSet):
    """Coarse-class age and lead time on (training) records."""
    ages = [r.age_years for r in records]
    leads = [r.lead_time_days for r in records]
    labels = records.labels
    return (coarse_class(ages, labels, variable="age"),
            coarse_class(leads, labels, variable="lead_time"))


def _make_forest_trainer(params, seed: int):
    def train_fold(X_train, y_train):
        model = fit_forest(X_train, y_train, class_weights(y_train), params,
                           seed=seed)
        return model.predict_proba
    return train_fold


def train_on_records(records: RecordSet, kind: str, seed: int = 0,
                     service: str | None = None, grid: str = "fast",
                     folds: int = 10, reps: int = 10,
                     fractions: Sequence[float] = (0.3, 0.4, 0.3),
                     ) -> TrainResult:
    """Full training protocol for one model kind on one cohort."""
    if kind not in KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; pick from {KINDS}")
    if grid not in ("fast", "full"):
        raise ValidationError(f"grid must be 'fast' or 'full', got {grid!r}")
    if service is not None and service != "all":
        records = records.filter_service(service)
    else:
        service = "all"
    if len(records) == 0:
        raise ValidationError("no records to train on")

    train_set, test_set = split(records, 0.7, stratify=True, seed=seed)
    bins = default_bins(train_set)
    schema = build_schema(train_set, bins,
                          drop_reference=(kind == "linear"))
    design_train = encode_with_schema(train_set, schema)
    design_test = encode_with_schema(test_set, schema)
    xtr, ytr = design_train.X, design_train.y
    weights = class_weights(ytr)

    if kind == "linear":
        entries = path_search(xtr, ytr, n_folds=min(folds, 5), seed=seed)
        penalty = select_penalty(entries).penalty
        report = cross_validate(xtr, ytr, make_l1_trainer(penalty),
                                n_folds=folds, n_reps=reps, seed=seed)
        model = fit_l1_logistic(xtr, ytr, penalty,
                                weights=weights.per_row(ytr), tol=1e-6)
        selection = {"penalty": penalty,
                     "path": [e.to_dict() for e in entries]}
    elif kind == "forest":
        cells = rf_param_grid() if grid == "full" else rf_param_grid_fast()
        params, _ = grid_search_rf(xtr, ytr, weights, cv_folds=folds,
                                   seed=seed, grid=cells)
        report = cross_validate(xtr, ytr, _make_forest_trainer(params, seed),
                                n_folds=folds, n_reps=reps, seed=seed)
        model = fit_forest(xtr, ytr, weights, params, seed=seed)
        selection = {"n_trees": params.n_trees, "mtry": params.mtry,
                     "min_samples_leaf_frac": params.min_samples_leaf_frac,
                     "min_impurity_decrease": params.min_impurity_decrease}
    else:
        iteration_grid = None if grid == "full" else NN_FAST_ITERATIONS
        hidden_grid = None if grid == "full" else NN_FAST_HIDDEN
        n_hidden, config, _ = grid_search_nn(
            xtr, ytr, weights, cv_folds=folds, seed=seed,
            iteration_grid=iteration_grid, hidden_grid=hidden_grid)
        report = cross_validate(
            xtr, ytr,
            make_nn_trainer(n_hidden, True, config.n_iterations,
                            config.learning_rate, seed),
            n_folds=folds, n_reps=reps, seed=seed)
        final_config = TrainConfig(config.n_iterations, weights,
                                   config.learning_rate)
        model = train(init_mlp(xtr.shape[1], n_hidden, seed), xtr, ytr,
                      final_config)
        selection = {"n_hidden": n_hidden,
                     "n_iterations": config.n_iterations,
                     "learning_rate": config.learning_rate}

    artifact = ModelArtifact(kind=PAYLOAD_KINDS[kind], model=model,
                             schema=schema, service=service, seed=seed,
                             cv_report=report)
    metrics = intervention_report(artifact, test_set, fractions)
    metrics["n_train"] = len(train_set)
    return TrainResult(artifact, selection, metrics)


def intervention_report(artifact: ModelArtifact, records: RecordSet,
                        fractions: Sequence[float] = (0.3, 0.4, 0.3)) -> dict:
    """AUROC plus coverage/risk of the A/B/C partition on one cohort."""
    scores = artifact.predict_proba_records(records)
    policy = tune_cutoffs(scores, records.record_ids, tuple(fractions))
    groups = assign_groups(scores, records.record_ids, policy)
    quality = coverage_risk(records.labels, groups)
    return {
        "auroc": auroc(scores, records.labels),
        "coverage": quality.coverage,
        "risk": quality.risk,
        "n_no_show": quality.n_no_show,
        "n_test": len(records),
        "fractions": list(policy.fractions),
        "thresholds": [policy.t1, policy.t2],
        "group_sizes": list(policy.group_sizes),
    }


def explanation_heatmap(artifact: ModelArtifact, records: RecordSet):
    """Relevance maps and their cohort heatmap for a one-hot MLP artifact."""
    if artifact.kind != "mlp":
        raise ValidationError(
            "explanations need an mlp artifact trained on one-hot columns, "
            f"got kind {artifact.kind!r}")
    design = encode_with_schema(records, artifact.schema)
    maps = explain_cohort(artifact.model, design.X, design.row_ids,
                          schema=artifact.schema)
    return maps, relevance_heatmap(maps)
