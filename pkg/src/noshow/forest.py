"""Class-weighted random forest built from scratch.

Trees are grown on bootstrap samples with per-node column subsampling.
Splits maximize weighted Gini impurity decrease; class weights enter both
the impurity and the leaf masses, so a balanced forest sees both classes
as equally massive regardless of prevalence. Every tree owns the
deterministic substream (seed, tree_index), making fits reproducible and
schedule-independent.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ClassWeights
from .errors import CriterionError, DimensionError, SearchError, ValidationError
from .evaluation import CvReport, auroc, stratified_fold_indices

log = logging.getLogger(__name__)

RF_N_TREES = tuple(range(50, 1001, 50))
RF_MTRY = (2, 6, 8, 10)
RF_MIN_LEAF_FRAC = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
RF_MIN_IMPURITY = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def gini(weighted_counts) -> float:
    """Gini impurity of a node from its weighted class masses."""
    m0, m1 = float(weighted_counts[0]), float(weighted_counts[1])
    if m0 < 0 or m1 < 0:
        raise CriterionError("class masses must be non-negative")
    total = m0 + m1
    if total == 0:
        raise CriterionError("empty node has no impurity")
    p0, p1 = m0 / total, m1 / total
    return 1.0 - p0 * p0 - p1 * p1


@dataclass(frozen=True)
class TreeNode:
    """Internal split or leaf; leaves carry weighted class masses."""

    column: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    masses: tuple[float, float] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.masses is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": [float(self.masses[0]), float(self.masses[1])]}
        return {"column": int(self.column), "threshold": float(self.threshold),
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "TreeNode":
        if "leaf" in d:
            return cls(masses=(float(d["leaf"][0]), float(d["leaf"][1])))
        return cls(column=int(d["column"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int
    mtry: int
    min_samples_leaf_frac: float
    min_impurity_decrease: float

    def __post_init__(self):
        if self.n_trees < 1 or self.mtry < 1:
            raise ValidationError("n_trees and mtry must be positive")
        if not 0 < self.min_samples_leaf_frac <= 0.5:
            raise ValidationError("min_samples_leaf_frac out of (0, 0.5]")
        if self.min_impurity_decrease < 0:
            raise ValidationError("min_impurity_decrease must be >= 0")

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "mtry": self.mtry,
                "min_samples_leaf_frac": self.min_samples_leaf_frac,
                "min_impurity_decrease": self.min_impurity_decrease}

    @classmethod
    def from_dict(cls, d) -> "ForestParams":
        return cls(int(d["n_trees"]), int(d["mtry"]),
                   float(d["min_samples_leaf_frac"]),
                   float(d["min_impurity_decrease"]))


def _leaf(w: np.ndarray, y: np.ndarray) -> TreeNode:
    m1 = float(w[y == 1].sum())
    m0 = float(w.sum()) - m1
    return TreeNode(masses=(m0, m1))


def _best_split(X, y, w, columns, min_leaf, w_total):
    """Best (column, threshold, decrease) or None; ties prefer the lowest
    column index, then the lowest threshold."""
    w_node = w.sum()
    g_node = gini((w[y == 0].sum(), w[y == 1].sum()))
    best = None
    for j in sorted(columns):
        v = X[:, j]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        distinct_ends = np.flatnonzero(sv[1:] != sv[:-1])
        if distinct_ends.size == 0:
            continue
        wy = (w * (y == 1))[order]
        wn = w[order]
        cum_w = np.cumsum(wn)
        cum_w1 = np.cumsum(wy)
        for e in distinct_ends:
            n_left = e + 1
            if n_left < min_leaf or (len(y) - n_left) < min_leaf:
                continue
            thr = (sv[e] + sv[e + 1]) / 2.0
            wl, wl1 = cum_w[e], cum_w1[e]
            wr, wr1 = w_node - wl, cum_w1[-1] - wl1
            if wl <= 0 or wr <= 0:
                continue
            # cumulative-sum cancellation can leave a pure side at -1e-16
            g_left = gini((max(wl - wl1, 0.0), max(wl1, 0.0)))
            g_right = gini((max(wr - wr1, 0.0), max(wr1, 0.0)))
            child = (wl * g_left + wr * g_right) / w_node
            decrease = (w_node / w_total) * (g_node - child)
            key = (-decrease, j, thr)
            if best is None or key < best[0]:
                best = (key, j, thr, decrease)
    if best is None:
        return None
    return best[1], best[2], best[3]


def _grow(X, y, w, mtry, min_leaf, min_decrease, w_total, rng) -> TreeNode:
    n, d = X.shape
    if n < 2 * min_leaf or np.all(y == y[0]):
        return _leaf(w, y)
    k = min(mtry, d)
    columns = rng.choice(d, size=k, replace=False)
    found = _best_split(X, y, w, columns, min_leaf, w_total)
    if found is None:
        return _leaf(w, y)
    j, thr, decrease = found
    if decrease < min_decrease:
        return _leaf(w, y)
    mask = X[:, j] <= thr
    left = _grow(X[mask], y[mask], w[mask], mtry, min_leaf, min_decrease,
                 w_total, rng)
    right = _grow(X[~mask], y[~mask], w[~mask], mtry, min_leaf, min_decrease,
                  w_total, rng)
    return TreeNode(column=j, threshold=thr, left=left, right=right)


def fit_tree(X, y, weights: ClassWeights, params: ForestParams, rng,
             bootstrap: bool = True) -> TreeNode:
    """Grow one tree; the bootstrap resamples n rows with replacement."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValidationError("no rows")
    n, d = X.shape
    if params.mtry > d:
        log.info("mtry %d exceeds %d columns; clamping", params.mtry, d)
    if bootstrap:
        idx = rng.integers(0, n, size=n)
        X, y = X[idx], y[idx]
    w = weights.per_row(y).astype(np.float64)
    min_leaf = max(1, math.ceil(params.min_samples_leaf_frac * n))
    return _grow(X, y, w, params.mtry, min_leaf,
                 params.min_impurity_decrease, w.sum(), rng)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    params: ForestParams
    seed: int
    n_features: int

    def __post_init__(self):
        if len(self.trees) != self.params.n_trees:
            raise ValidationError("tree count must equal params.n_trees")

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(
                f"X has shape {X.shape}, model expects width {self.n_features}")
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += _tree_proba(tree, X)
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": "random_forest", "schema_version": 1,
                "params": self.params.to_dict(), "seed": self.seed,
                "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        return cls(tuple(TreeNode.from_dict(t) for t in d["trees"]),
                   ForestParams.from_dict(d["params"]), int(d["seed"]),
                   int(d["n_features"]))


def _tree_proba(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        cur, idx = stack.pop()
        if idx.size == 0:
            continue
        if cur.is_leaf:
            m0, m1 = cur.masses
            out[idx] = m1 / (m0 + m1)
            continue
        mask = X[idx, cur.column] <= cur.threshold
        stack.append((cur.left, idx[mask]))
        stack.append((cur.right, idx[~mask]))
    return out


def fit_forest(X, y, weights: ClassWeights, params: ForestParams,
               seed: int = 0) -> ForestModel:
    """Train params.n_trees trees on substreams (seed, tree_index)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    trees = tuple(
        fit_tree(X, y, weights, params, np.random.default_rng([seed, t]))
        for t in range(params.n_trees))
    return ForestModel(trees, params, seed, X.shape[1])


def rf_param_grid() -> list[ForestParams]:
    """Full Cartesian hyperparameter grid (2000 cells)."""
    return [ForestParams(t, m, l, i)
            for t, m, l, i in itertools.product(
                RF_N_TREES, RF_MTRY, RF_MIN_LEAF_FRAC, RF_MIN_IMPURITY)]


def rf_param_grid_fast() -> list[ForestParams]:
    """Small corner of the grid for smoke runs and demos."""
    return [ForestParams(t, m, l, i)
            for t, m, l, i in itertools.product(
                (50, 100), (2, 6), (1e-2, 1e-4), (1e-4,))]


def grid_search_rf(X, y, weights: ClassWeights, cv_folds: int = 10,
                   seed: int = 0, grid: Sequence[ForestParams] | None = None,
                   ) -> tuple[ForestParams, CvReport]:
    """Mean CV AUROC over the grid; ties prefer fewer trees, then larger
    min-leaf. Failed cells are logged and skipped."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] < 2 * cv_folds:
        raise SearchError(f"{X.shape[0]} rows cannot fill {cv_folds} folds twice")
    if grid is None:
        grid = rf_param_grid()
    if not grid:
        raise SearchError("empty grid")

    rng = np.random.default_rng([seed, 0])
    folds = stratified_fold_indices(y, cv_folds, rng)
    all_idx = np.arange(X.shape[0])
    results = []
    for cell, params in enumerate(grid):
        scores = []
        try:
            for held_out in folds:
                tr = np.setdiff1d(all_idx, held_out, assume_unique=True)
                model = fit_forest(X[tr], y[tr], weights, params, seed=seed)
                scores.append(auroc(model.predict_proba(X[held_out]),
                                    y[held_out]))
        except Exception as exc:  # noqa: BLE001 - cell isolation is the point
            log.warning("grid cell %d (%s) failed: %s", cell, params, exc)
            continue
        report = CvReport(np.array([scores]), cv_folds, 1, seed)
        results.append((params, report))
    if not results:
        raise SearchError("every grid cell failed")
    best_score = max(r.mean_auroc for _, r in results)
    near = [(p, r) for p, r in results if r.mean_auroc == best_score]
    return min(near, key=lambda pr: (pr[0].n_trees,
                                     -pr[0].min_samples_leaf_frac))
