"""Model evaluation and intervention-policy tuning.

AUROC is the single model-selection metric. Policies partition patients
into groups A (highest risk, phone outreach), B (reminders), and C (no
intervention) by score rank; coverage and risk summarize how well the
partition concentrates the actual no-shows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import MetricError, PolicyError, SplitError, ValidationError

SERVICE_DISPLAY = {"OH": "OH", "GD": "G&D", "YAP": "YAP", "SP": "SP"}


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic, ties averaged."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError("scores and labels must be equal-length vectors")
    if not np.isfinite(scores).all():
        raise MetricError("scores must be finite")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC needs both classes present")

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    rank = 1.0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (rank + rank + (j - i)) / 2.0
        rank += j - i + 1
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def stratified_fold_indices(labels, n_folds: int, rng) -> list[np.ndarray]:
    """Disjoint folds covering all rows, class counts within 1 across folds."""
    labels = np.asarray(labels)
    if n_folds < 2:
        raise SplitError(f"need at least 2 folds, got {n_folds}")
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < n_folds:
            raise SplitError(
                f"class {c} has {len(idx)} rows, fewer than {n_folds} folds")
        perm = idx[rng.permutation(len(idx))]
        for k, chunk in enumerate(np.array_split(perm, n_folds)):
            folds[k].extend(chunk.tolist())
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


@dataclass(frozen=True)
class CvReport:
    """Fold AUROCs from repeated stratified cross-validation."""

    fold_aurocs: np.ndarray  # shape (n_reps, n_folds)
    n_folds: int
    n_reps: int
    seed: int

    def __post_init__(self):
        if self.fold_aurocs.shape != (self.n_reps, self.n_folds):
            raise ValidationError("fold_aurocs shape must be (n_reps, n_folds)")
        self.fold_aurocs.setflags(write=False)

    @property
    def mean_auroc(self) -> float:
        return float(self.fold_aurocs.mean())

    @property
    def std_auroc(self) -> float:
        return float(self.fold_aurocs.std())

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "n_reps": self.n_reps,
            "seed": self.seed,
            "mean_auroc": self.mean_auroc,
            "std_auroc": self.std_auroc,
            "fold_aurocs": [list(map(float, row)) for row in self.fold_aurocs],
        }

    @classmethod
    def from_dict(cls, d) -> "CvReport":
        arr = np.array(d["fold_aurocs"], dtype=np.float64)
        return cls(arr, d["n_folds"], d["n_reps"], d["seed"])


def cross_validate(X, y, trainer: Callable, n_folds: int = 10,
                   n_reps: int = 10, seed: int = 0) -> CvReport:
    """Repeated stratified k-fold AUROC.

    ``trainer(X_train, y_train)`` must return a callable mapping a feature
    matrix to no-show probabilities. Each repetition r reshuffles folds
    with an independent substream seeded by (seed, r), so results do not
    depend on evaluation order and single repetitions can be reproduced.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    scores = np.zeros((n_reps, n_folds))
    all_idx = np.arange(X.shape[0])
    for r in range(n_reps):
        rng = np.random.default_rng([seed, r])
        folds = stratified_fold_indices(y, n_folds, rng)
        for k, held_out in enumerate(folds):
            train_idx = np.setdiff1d(all_idx, held_out, assume_unique=True)
            predict = trainer(X[train_idx], y[train_idx])
            scores[r, k] = auroc(predict(X[held_out]), y[held_out])
    return CvReport(scores, n_folds, n_reps, seed)


# ---------------------------------------------------------------------------
# Cut-off policies


@dataclass(frozen=True)
class CutoffPolicy:
    """Score thresholds realizing target group fractions on a cohort.

    Patients are ranked by ascending no-show score: the lowest-scoring
    f_A of the cohort form group A (left alone), the top f_C form group
    C (intensive intervention). Assignment is by rank, ties broken by
    record_id, so group sizes are exact: ceil(f_A * n) rows in A and
    ceil((f_A + f_B) * n) in A + B. On distinct scores the thresholds
    satisfy score < t1 -> A, t1 <= score < t2 -> B, score >= t2 -> C;
    they are kept for reporting and for applying the policy elsewhere.
    """

    fractions: tuple[float, float, float]
    t1: float  # lowest score in B (-inf when A is empty, +inf when A is all)
    t2: float  # lowest score in C (+inf when C is empty)
    group_sizes: tuple[int, int, int]

    def to_dict(self) -> dict:
        return {"fractions": list(self.fractions), "t1": self.t1,
                "t2": self.t2, "group_sizes": list(self.group_sizes)}

    @classmethod
    def from_dict(cls, d) -> "CutoffPolicy":
        return cls(tuple(d["fractions"]), float(d["t1"]), float(d["t2"]),
                   tuple(d["group_sizes"]))


def _check_fractions(fractions) -> tuple[float, float, float]:
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3:
        raise PolicyError(f"need exactly 3 fractions, got {len(fr)}")
    if any(f < 0 for f in fr):
        raise PolicyError(f"fractions must be non-negative: {fr}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise PolicyError(f"fractions must sum to 1, got {sum(fr)}")
    return fr


def _ranked_order(scores: np.ndarray, record_ids: np.ndarray) -> np.ndarray:
    # ascending score; equal scores ordered by ascending record_id
    return np.lexsort((record_ids, scores))


def _rank_boundaries(fractions, n: int) -> tuple[int, int]:
    # ceil(f * n), guarded so float noise on exact boundaries (0.3 + 0.4
    # being slightly above 0.7) cannot shift a group size by one
    k1 = int(np.ceil(fractions[0] * n - 1e-9))
    k2 = int(np.ceil((fractions[0] + fractions[1]) * n - 1e-9))
    return k1, k2


def tune_cutoffs(scores, record_ids,
                 fractions=(0.3, 0.4, 0.3)) -> CutoffPolicy:
    """Pick thresholds so ranked groups hit the target fractions exactly."""
    fr = _check_fractions(fractions)
    scores = np.asarray(scores, dtype=np.float64)
    record_ids = np.asarray(record_ids, dtype=np.int64)
    if scores.shape != record_ids.shape or scores.size == 0:
        raise PolicyError("scores and record_ids must align and be non-empty")
    if not np.isfinite(scores).all():
        raise PolicyError("scores must be finite")
    n = scores.size
    k1, k2 = _rank_boundaries(fr, n)
    order = _ranked_order(scores, record_ids)
    ranked = scores[order]
    t1 = float(ranked[k1]) if k1 < n else np.inf
    t2 = float(ranked[k2]) if k2 < n else np.inf
    if k1 == 0:
        t1 = -np.inf
    return CutoffPolicy(fr, t1, t2, (k1, k2 - k1, n - k2))


def assign_groups(scores, record_ids, policy: CutoffPolicy) -> np.ndarray:
    """Rank-based A/B/C assignment aligned to the input order.

    On the cohort the policy was tuned on, group sizes equal the policy's
    exactly; on a new cohort the same fractions are applied by rank.
    """
    scores = np.asarray(scores, dtype=np.float64)
    record_ids = np.asarray(record_ids, dtype=np.int64)
    if scores.shape != record_ids.shape or scores.size == 0:
        raise PolicyError("scores and record_ids must align and be non-empty")
    n = scores.size
    k1, k2 = _rank_boundaries(policy.fractions, n)
    order = _ranked_order(scores, record_ids)
    groups = np.empty(n, dtype="<U1")
    groups[order[:k1]] = "A"
    groups[order[k1:k2]] = "B"
    groups[order[k2:]] = "C"
    return groups


@dataclass(frozen=True)
class CoverageRisk:
    """Policy quality on a labeled cohort.

    coverage: fraction of actual no-shows captured by group C, the
    intensive-intervention group (higher is better). risk: fraction of
    actual no-shows left in group A, which gets no intervention (lower
    is better). Random assignment makes both equal their group fractions.
    """

    coverage: float
    risk: float
    n_no_show: int

    def to_dict(self) -> dict:
        return {"coverage": self.coverage, "risk": self.risk,
                "n_no_show": self.n_no_show}


def coverage_risk(labels, groups) -> CoverageRisk:
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if labels.shape != groups.shape:
        raise MetricError("labels and groups must align")
    n_no_show = int((labels == 1).sum())
    if n_no_show == 0:
        raise MetricError("cohort has no no-shows to measure")
    in_c = int(((labels == 1) & (groups == "C")).sum())
    in_a = int(((labels == 1) & (groups == "A")).sum())
    return CoverageRisk(in_c / n_no_show, in_a / n_no_show, n_no_show)


# ---------------------------------------------------------------------------
# Cross-service comparison


@dataclass(frozen=True)
class ComparisonRow:
    service: str
    model: str
    coverage: float
    risk: float


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    """Render service/model coverage-risk rows as an aligned text table."""
    if not rows:
        raise ValidationError("nothing to compare")
    header = ("Service", "Model", "Coverage", "Risk")
    body = [(SERVICE_DISPLAY.get(r.service, r.service), r.model,
             f"{round(100 * r.coverage)}%", f"{round(100 * r.risk)}%")
            for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body))
              for i, h in enumerate(header)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)),
             "-+-".join("-" * w for w in widths)]
    lines += [" | ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def compare_models(entries) -> str:
    """entries: (service, model, CoverageRisk) triples, any iterable."""
    rows = [ComparisonRow(s, m, cr.coverage, cr.risk) for s, m, cr in entries]
    return format_comparison(rows)
