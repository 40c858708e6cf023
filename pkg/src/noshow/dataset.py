"""Appointment records: ingestion, binning, encoding, descriptive statistics.

Everything downstream (models, explanations, policy tuning) consumes the
types defined here. Encoding is strictly two-phase: a FeatureSchema is
frozen on training data, then applied unchanged to any later records.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EncodingError,
    SchemaError,
    SplitError,
    ValidationError,
    WeightError,
)

SCHEMA_VERSION = 1

GENDERS = ("female", "male")
ZONE_INCOMES = ("low", "medium")
SERVICES = ("OH", "GD", "YAP", "SP")
DAYS = ("SUN", "MON", "TUE", "WED", "THU", "FRI", "SAT")
MONTHS = tuple(str(m) for m in range(1, 13))

# Canonical order of model input variables.
VARIABLES = ("gender", "age", "zone_income", "lead_time", "month",
             "day_of_week", "facility_id")

CSV_COLUMNS = ("record_id", "gender", "age_years", "zone_id", "zone_income",
               "service", "facility_id", "lead_time_days", "month",
               "day_of_week", "outcome")

_CSV_GENDER = {"F": "female", "M": "male"}
_GENDER_CSV = {"female": "F", "male": "M"}

# Fixed bands used for descriptive reporting (independent of learned bins).
REPORT_AGE_BANDS = ((0, 10), (10, 20), (20, 30), (30, 40), (40, 50),
                    (50, 60), (60, None))
REPORT_LEAD_BANDS = ((0, 15), (15, 30), (30, 60), (60, None))


def _band_label(lo, hi):
    return f"{lo}-{hi}" if hi is not None else f"Over {lo}"


@dataclass(frozen=True)
class AppointmentRecord:
    """One scheduled appointment with its show/no-show outcome."""

    record_id: int
    gender: str
    age_years: int
    zone_id: str
    zone_income: str
    service: str
    facility_id: str
    lead_time_days: int
    month: int
    day_of_week: str
    outcome: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"unknown gender {self.gender!r}")
        if not 0 <= self.age_years <= 120:
            raise ValidationError(f"age_years {self.age_years} out of [0, 120]")
        if self.zone_income not in ZONE_INCOMES:
            raise ValidationError(f"unknown zone_income {self.zone_income!r}")
        if self.service not in SERVICES:
            raise ValidationError(f"unknown service {self.service!r}")
        if not 0 <= self.lead_time_days <= 1000:
            raise ValidationError(
                f"lead_time_days {self.lead_time_days} out of [0, 1000]")
        if not 1 <= self.month <= 12:
            raise ValidationError(f"month {self.month} out of [1, 12]")
        if self.day_of_week not in DAYS:
            raise ValidationError(f"unknown day_of_week {self.day_of_week!r}")
        if self.outcome not in ("show", "no_show"):
            raise ValidationError(f"unknown outcome {self.outcome!r}")

    @property
    def label(self) -> int:
        """1 for a no-show, 0 for attendance."""
        return 1 if self.outcome == "no_show" else 0


@dataclass(frozen=True)
class RejectedRow:
    line_number: int
    reason: str


@dataclass(frozen=True)
class RecordSet:
    """Immutable collection of validated records, plus ingestion rejects."""

    records: tuple[AppointmentRecord, ...]
    rejects: tuple[RejectedRow, ...] = ()

    def __post_init__(self):
        ids = [r.record_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValidationError("record_id values must be unique")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def record_ids(self) -> np.ndarray:
        return np.array([r.record_id for r in self.records], dtype=np.int64)

    def filter_service(self, service: str) -> "RecordSet":
        if service not in SERVICES:
            raise ValidationError(f"unknown service {service!r}")
        return RecordSet(tuple(r for r in self.records if r.service == service))

    def take(self, indices: Sequence[int]) -> "RecordSet":
        return RecordSet(tuple(self.records[i] for i in indices))


def record_from_fields(fields: Mapping[str, str],
                       zone_income: str | None = None) -> AppointmentRecord:
    """Build a record from raw string fields (CSV or JSON vocabulary).

    Raises ValidationError with a readable reason for any bad field.
    """
    def _int(name):
        raw = fields.get(name, "")
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} {raw!r} is not an integer") from None

    gender_raw = fields.get("gender", "")
    gender = _CSV_GENDER.get(gender_raw, gender_raw)
    income = zone_income if zone_income is not None else fields.get("zone_income", "")
    return AppointmentRecord(
        record_id=_int("record_id"),
        gender=gender,
        age_years=_int("age_years"),
        zone_id=str(fields.get("zone_id", "")),
        zone_income=income,
        service=str(fields.get("service", "")),
        facility_id=str(fields.get("facility_id", "")),
        lead_time_days=_int("lead_time_days"),
        month=_int("month"),
        day_of_week=str(fields.get("day_of_week", "")),
        outcome=str(fields.get("outcome", "")),
    )


def classify_zone_income(strata_shares: Mapping[int, float]) -> str:
    """Income class of a zone from its population shares per stratum.

    A zone is low-income when at least half its population falls in the
    two lowest strata; otherwise it is medium-income.
    """
    shares = {int(k): float(v) for k, v in strata_shares.items()}
    if any(v < 0 for v in shares.values()):
        raise ValidationError("strata shares must be non-negative")
    total = sum(shares.values())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"strata shares sum to {total}, expected 1")
    lowest_two = shares.get(1, 0.0) + shares.get(2, 0.0)
    return "low" if lowest_two >= 0.5 else "medium"


def load_zone_strata(path) -> dict[str, str]:
    """Read a zone-strata CSV and classify each zone's income."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["zone_id"] + [f"stratum{i}_share" for i in range(1, 7)]
        if header != expected:
            raise SchemaError(
                f"zone-strata header {header} != expected {expected}")
        zones = {}
        for row in reader:
            if not row:
                continue
            zone_id = row[0]
            shares = {i: float(row[i]) for i in range(1, 7)}
            zones[zone_id] = classify_zone_income(shares)
    return zones


def ingest_csv(path, zone_strata=None) -> RecordSet:
    """Read and validate an appointment CSV.

    Bad rows are skipped, not fatal: each reject carries its 1-based line
    number and a reason. When the file has no ``zone_income`` column,
    ``zone_strata`` (a path to the strata CSV, or a zone_id -> income map)
    must supply the classification.
    """
    if zone_strata is not None and not isinstance(zone_strata, Mapping):
        zone_strata = load_zone_strata(zone_strata)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        full = list(CSV_COLUMNS)
        without_income = [c for c in CSV_COLUMNS if c != "zone_income"]
        if header == full:
            has_income = True
        elif header == without_income:
            if zone_strata is None:
                raise SchemaError(
                    "CSV has no zone_income column and no zone-strata file given")
            has_income = False
        else:
            raise SchemaError(f"unexpected CSV header: {header}")

        records: list[AppointmentRecord] = []
        rejects: list[RejectedRow] = []
        seen_ids: set[int] = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                rejects.append(RejectedRow(line_no, "wrong field count"))
                continue
            fields = dict(zip(header, row))
            income = None
            if not has_income:
                income = zone_strata.get(fields["zone_id"])
                if income is None:
                    rejects.append(RejectedRow(
                        line_no, f"zone_id {fields['zone_id']!r} not in strata file"))
                    continue
            try:
                rec = record_from_fields(fields, zone_income=income)
            except ValidationError as exc:
                rejects.append(RejectedRow(line_no, str(exc)))
                continue
            if rec.record_id in seen_ids:
                rejects.append(RejectedRow(
                    line_no, f"duplicate record_id {rec.record_id}"))
                continue
            seen_ids.add(rec.record_id)
            records.append(rec)

    return RecordSet(tuple(records), tuple(rejects))


def write_csv(records: Iterable[AppointmentRecord], path) -> None:
    """Write records in the ingestion CSV schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.record_id, _GENDER_CSV[r.gender], r.age_years, r.zone_id,
                r.zone_income, r.service, r.facility_id, r.lead_time_days,
                r.month, r.day_of_week, r.outcome,
            ])


# ---------------------------------------------------------------------------
# Coarse classing


@dataclass(frozen=True)
class BinSpec:
    """Half-open integer bins for one continuous variable.

    Bin i covers [cut_points[i-1], cut_points[i]); the outer bins are
    unbounded, so every non-negative integer maps to exactly one bin.
    """

    variable: str
    cut_points: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.variable not in ("age", "lead_time"):
            raise ValidationError(f"unknown binned variable {self.variable!r}")
        if list(self.cut_points) != sorted(set(self.cut_points)):
            raise ValidationError("cut_points must be strictly increasing")
        if len(self.labels) != len(self.cut_points) + 1:
            raise ValidationError("bin count must be cut_points length + 1")

    def bin_index(self, value: int) -> int:
        return int(np.searchsorted(self.cut_points, value, side="right"))

    def bin_label(self, value: int) -> str:
        return self.labels[self.bin_index(value)]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "variable": self.variable,
                "cut_points": list(self.cut_points), "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BinSpec":
        return cls(d["variable"], tuple(d["cut_points"]), tuple(d["labels"]))


def default_bin_labels(cut_points: Sequence[int]) -> tuple[str, ...]:
    cuts = list(cut_points)
    if not cuts:
        return ("[0,inf)",)
    labels = [f"[0,{cuts[0]})"]
    labels += [f"[{a},{b})" for a, b in zip(cuts, cuts[1:])]
    labels.append(f"[{cuts[-1]},inf)")
    return tuple(labels)


def _interval_gini_costs(counts: np.ndarray, positives: np.ndarray):
    """Weighted Gini cost of every contiguous run of distinct values.

    Returns (cost, size) matrices indexed [i, j] for the run i..j inclusive.
    Cost is n_run * gini(run), so partition quality is the plain sum.
    """
    m = len(counts)
    c_n = np.concatenate([[0], np.cumsum(counts)])
    c_p = np.concatenate([[0], np.cumsum(positives)])
    cost = np.full((m, m), np.inf)
    size = np.zeros((m, m), dtype=np.int64)
    for i in range(m):
        for j in range(i, m):
            n = c_n[j + 1] - c_n[i]
            p = c_p[j + 1] - c_p[i]
            q = n - p
            size[i, j] = n
            cost[i, j] = (1.0 - (p / n) ** 2 - (q / n) ** 2) * n
    return cost, size


def coarse_class(values: Sequence[int], outcomes: Sequence[int],
                 max_bins: int = 6, min_leaf_fraction: float = 0.05,
                 variable: str = "age") -> BinSpec:
    """Bin one integer variable against a binary outcome.

    Finds the interval partition with at most ``max_bins`` leaves that
    minimizes total Gini impurity, subject to every leaf holding at least
    ``min_leaf_fraction`` of the samples. Equal-impurity solutions prefer
    fewer bins, then leftmost cuts, so a constant outcome yields one bin.
    """
    if max_bins < 2:
        raise ValidationError(f"max_bins must be >= 2, got {max_bins}")
    values = np.asarray(values, dtype=np.int64)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    if values.shape != outcomes.shape or values.size == 0:
        raise ValidationError("values and outcomes must be equal-length, non-empty")

    n = values.size
    min_leaf = max(1, math.ceil(min_leaf_fraction * n))
    order = np.argsort(values, kind="stable")
    distinct, start_idx = np.unique(values[order], return_index=True)
    m = distinct.size
    if m == 1:
        return BinSpec(variable, (), default_bin_labels(()))

    counts = np.diff(np.concatenate([start_idx, [n]]))
    sorted_out = outcomes[order]
    pos = np.array([sorted_out[s:s + c].sum()
                    for s, c in zip(start_idx, counts)], dtype=np.int64)

    cost, size = _interval_gini_costs(counts, pos)

    # best[b][j]: minimal cost splitting distinct values 0..j into b bins,
    # every bin >= min_leaf samples; prev[b][j] reconstructs the partition.
    kmax = min(max_bins, m)
    best = np.full((kmax + 1, m), np.inf)
    prev = np.full((kmax + 1, m), -1, dtype=np.int64)
    for j in range(m):
        if size[0, j] >= min_leaf:
            best[1, j] = cost[0, j]
    for b in range(2, kmax + 1):
        for j in range(m):
            for i in range(j):  # previous bin ends at i, this bin is i+1..j
                if size[i + 1, j] < min_leaf or not np.isfinite(best[b - 1, i]):
                    continue
                cand = best[b - 1, i] + cost[i + 1, j]
                if cand < best[b, j] - 1e-12:
                    best[b, j] = cand
                    prev[b, j] = i

    finished = [(best[b, m - 1], b) for b in range(1, kmax + 1)
                if np.isfinite(best[b, m - 1])]
    if not finished:
        return BinSpec(variable, (), default_bin_labels(()))
    best_cost = min(c for c, _ in finished)
    n_bins = min(b for c, b in finished if c <= best_cost + 1e-12)

    boundaries = []
    j, b = m - 1, n_bins
    while b > 1:
        i = int(prev[b, j])
        boundaries.append(int(distinct[i + 1]))  # half-open: cut at next value
        j, b = i, b - 1
    cuts = tuple(sorted(boundaries))
    return BinSpec(variable, cuts, default_bin_labels(cuts))


# ---------------------------------------------------------------------------
# Feature schema and design matrix


@dataclass(frozen=True)
class VariableBlock:
    """Levels of one source variable, with an optional dropped reference."""

    variable: str
    levels: tuple[str, ...]
    reference: str | None = None

    def __post_init__(self):
        if len(set(self.levels)) != len(self.levels):
            raise ValidationError(f"duplicate levels in {self.variable}")
        if self.reference is not None and self.reference not in self.levels:
            raise ValidationError(
                f"reference {self.reference!r} not a level of {self.variable}")

    @property
    def kept_levels(self) -> tuple[str, ...]:
        return tuple(l for l in self.levels if l != self.reference)


@dataclass(frozen=True)
class FeatureSchema:
    """Frozen encoding layout: blocks, interactions, and the bins they use."""

    blocks: tuple[VariableBlock, ...]
    interactions: tuple[tuple[str, str], ...] = ()
    bins: tuple[BinSpec, ...] = ()
    main_columns: tuple[tuple[str, str], ...] = field(init=False)
    interaction_columns: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        main = []
        pos = {}
        for blk in self.blocks:
            for level in blk.kept_levels:
                pos[(blk.variable, level)] = len(main)
                main.append((blk.variable, level))
        inter = []
        by_var = {b.variable: b for b in self.blocks}
        for va, vb in self.interactions:
            for v in (va, vb):
                if v not in by_var:
                    raise ValidationError(f"interaction names unknown variable {v!r}")
            for la in by_var[va].kept_levels:
                for lb in by_var[vb].kept_levels:
                    inter.append((pos[(va, la)], pos[(vb, lb)]))
        object.__setattr__(self, "main_columns", tuple(main))
        object.__setattr__(self, "interaction_columns", tuple(inter))
        if len(set(self.column_names)) != len(self.column_names):
            raise ValidationError("schema column names must be unique")

    @property
    def width(self) -> int:
        return len(self.main_columns) + len(self.interaction_columns)

    @property
    def column_names(self) -> tuple[str, ...]:
        main = [f"{v}={l}" for v, l in self.main_columns]
        inter = [f"{main[i]}*{main[j]}" for i, j in self.interaction_columns]
        return tuple(main + inter)

    def block(self, variable: str) -> VariableBlock:
        for blk in self.blocks:
            if blk.variable == variable:
                return blk
        raise ValidationError(f"no block for variable {variable!r}")

    def bin_for(self, variable: str) -> BinSpec:
        for b in self.bins:
            if b.variable == variable:
                return b
        raise ValidationError(f"no bin spec for {variable!r}")

    def column_variable(self, index: int) -> str:
        """Source variable of a matrix column (pair name for interactions)."""
        n_main = len(self.main_columns)
        if index < n_main:
            return self.main_columns[index][0]
        i, j = self.interaction_columns[index - n_main]
        return f"{self.main_columns[i][0]}*{self.main_columns[j][0]}"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "blocks": [{"variable": b.variable, "levels": list(b.levels),
                        "reference": b.reference} for b in self.blocks],
            "interactions": [list(p) for p in self.interactions],
            "bins": [b.to_dict() for b in self.bins],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        blocks = tuple(VariableBlock(b["variable"], tuple(b["levels"]),
                                     b.get("reference"))
                       for b in d["blocks"])
        inter = tuple((p[0], p[1]) for p in d.get("interactions", []))
        bins = tuple(BinSpec.from_dict(b) for b in d.get("bins", []))
        return cls(blocks, inter, bins)


@dataclass(frozen=True)
class DesignMatrix:
    """Encoded rows with labels and provenance."""

    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    row_ids: np.ndarray

    def __post_init__(self):
        if not (self.X.shape[0] == self.y.shape[0] == self.row_ids.shape[0]):
            raise ValidationError("rows, labels and row_ids must align")
        if self.X.shape[1] != self.schema.width:
            raise ValidationError("matrix width differs from schema width")
        self.X.setflags(write=False)
        self.y.setflags(write=False)
        self.row_ids.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def take(self, indices) -> "DesignMatrix":
        idx = np.asarray(indices)
        return DesignMatrix(self.X[idx].copy(), self.y[idx].copy(),
                            self.schema, self.row_ids[idx].copy())


def record_level(record: AppointmentRecord, variable: str,
                 schema_bins: Mapping[str, BinSpec]) -> str:
    if variable == "gender":
        return record.gender
    if variable == "age":
        return schema_bins["age"].bin_label(record.age_years)
    if variable == "zone_income":
        return record.zone_income
    if variable == "lead_time":
        return schema_bins["lead_time"].bin_label(record.lead_time_days)
    if variable == "month":
        return str(record.month)
    if variable == "day_of_week":
        return record.day_of_week
    if variable == "facility_id":
        return record.facility_id
    raise ValidationError(f"unknown variable {variable!r}")


def _fixed_levels(variable: str, records: RecordSet,
                  bins_by_var: Mapping[str, BinSpec]) -> tuple[str, ...]:
    if variable == "gender":
        return GENDERS
    if variable == "age":
        return bins_by_var["age"].labels
    if variable == "zone_income":
        return ZONE_INCOMES
    if variable == "lead_time":
        return bins_by_var["lead_time"].labels
    if variable == "month":
        return MONTHS
    if variable == "day_of_week":
        return DAYS
    if variable == "facility_id":
        return tuple(sorted({r.facility_id for r in records}))
    raise ValidationError(f"unknown variable {variable!r}")


def build_schema(records: RecordSet, bins: Sequence[BinSpec],
                 drop_reference: bool = False,
                 interactions: Sequence[tuple[str, str]] = ()) -> FeatureSchema:
    """Freeze the encoding layout on training records.

    With ``drop_reference`` the most frequent level of each variable is
    dropped (ties to the lexicographically smallest name); the linear model
    interprets coefficients relative to those references.
    """
    bins_by_var = {b.variable: b for b in bins}
    for needed in ("age", "lead_time"):
        if needed not in bins_by_var:
            raise ValidationError(f"bins must cover {needed}")
    if len(records) == 0:
        raise ValidationError("cannot build a schema from zero records")

    blocks = []
    for variable in VARIABLES:
        levels = _fixed_levels(variable, records, bins_by_var)
        reference = None
        if drop_reference:
            freq = {l: 0 for l in levels}
            for r in records:
                freq[record_level(r, variable, bins_by_var)] += 1
            top = max(freq.values())
            reference = min(l for l, c in freq.items() if c == top)
        blocks.append(VariableBlock(variable, levels, reference))
    return FeatureSchema(tuple(blocks), tuple(tuple(p) for p in interactions),
                         tuple(bins_by_var[v] for v in ("age", "lead_time")))


def encode_with_schema(records: RecordSet, schema: FeatureSchema) -> DesignMatrix:
    """Apply a frozen schema to records; unseen levels are an error."""
    bins_by_var = {b.variable: b for b in schema.bins}
    pos = {col: i for i, col in enumerate(schema.main_columns)}
    known = {blk.variable: set(blk.levels) for blk in schema.blocks}

    n, n_main = len(records), len(schema.main_columns)
    X = np.zeros((n, schema.width), dtype=np.float64)
    for i, rec in enumerate(records):
        for blk in schema.blocks:
            level = record_level(rec, blk.variable, bins_by_var)
            if level not in known[blk.variable]:
                raise EncodingError(
                    f"unseen level {level!r} for variable {blk.variable!r}")
            if level != blk.reference:
                X[i, pos[(blk.variable, level)]] = 1.0
    for k, (a, b) in enumerate(schema.interaction_columns):
        X[:, n_main + k] = X[:, a] * X[:, b]
    return DesignMatrix(X, records.labels, schema, records.record_ids)


def encode(records: RecordSet, bins: Sequence[BinSpec],
           drop_reference: bool = False,
           interactions: Sequence[tuple[str, str]] = ()) -> DesignMatrix:
    """Freeze a schema on ``records`` and encode them in one step."""
    schema = build_schema(records, bins, drop_reference, interactions)
    return encode_with_schema(records, schema)


def decode_row(matrix: DesignMatrix, row: int) -> dict[str, str]:
    """Recover the binned level of every variable from an encoded row."""
    schema = matrix.schema
    pos = {col: i for i, col in enumerate(schema.main_columns)}
    out = {}
    for blk in schema.blocks:
        hot = [l for l in blk.kept_levels if matrix.X[row, pos[(blk.variable, l)]] == 1.0]
        if len(hot) == 1:
            out[blk.variable] = hot[0]
        elif not hot and blk.reference is not None:
            out[blk.variable] = blk.reference
        else:
            raise ValidationError(
                f"row {row} is not one-hot within {blk.variable}")
    return out


def level_index_matrix(records: RecordSet, schema: FeatureSchema):
    """Per-variable integer level indices (used by entity embeddings)."""
    bins_by_var = {b.variable: b for b in schema.bins}
    idx = np.zeros((len(records), len(schema.blocks)), dtype=np.int64)
    for j, blk in enumerate(schema.blocks):
        lookup = {l: k for k, l in enumerate(blk.levels)}
        for i, rec in enumerate(records):
            level = record_level(rec, blk.variable, bins_by_var)
            if level not in lookup:
                raise EncodingError(
                    f"unseen level {level!r} for variable {blk.variable!r}")
            idx[i, j] = lookup[level]
    return idx


# ---------------------------------------------------------------------------
# Descriptive statistics


def cramers_v(feature_levels: Sequence, outcomes: Sequence) -> float:
    """Cramer's V association between two categorical sequences."""
    if len(feature_levels) != len(outcomes) or len(feature_levels) < 2:
        raise ValidationError("need two equal-length sequences of length >= 2")
    rows = sorted(set(feature_levels))
    cols = sorted(set(outcomes))
    if len(rows) < 2 or len(cols) < 2:
        return 0.0
    ri = {v: i for i, v in enumerate(rows)}
    ci = {v: i for i, v in enumerate(cols)}
    table = np.zeros((len(rows), len(cols)))
    for f, o in zip(feature_levels, outcomes):
        table[ri[f], ci[o]] += 1
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = ((table - expected) ** 2 / expected).sum()
    return float(math.sqrt(chi2 / (n * (min(len(rows), len(cols)) - 1))))


@dataclass(frozen=True)
class MarginalRow:
    service: str  # one of SERVICES or "Total"
    level: str
    n_show: int
    n_no_show: int

    @property
    def rate(self) -> float:
        return self.n_no_show / (self.n_show + self.n_no_show)


def _report_level(record: AppointmentRecord, group_by: str) -> str:
    if group_by == "age":
        for lo, hi in REPORT_AGE_BANDS:
            if hi is None or record.age_years < hi:
                if record.age_years >= lo:
                    return _band_label(lo, hi)
        return _band_label(*REPORT_AGE_BANDS[-1])
    if group_by == "lead_time":
        for lo, hi in REPORT_LEAD_BANDS:
            if hi is None or record.lead_time_days < hi:
                if record.lead_time_days >= lo:
                    return _band_label(lo, hi)
        return _band_label(*REPORT_LEAD_BANDS[-1])
    if group_by == "service":
        return record.service
    return record_level(record, group_by, {})


def marginal_rates(records: RecordSet, group_by: str) -> tuple[MarginalRow, ...]:
    """Show / no-show counts and rates per level, per service and overall."""
    if len(records) == 0:
        raise ValidationError("empty record set")
    if group_by not in VARIABLES + ("service",):
        raise ValidationError(f"unknown group_by {group_by!r}")
    counts: dict[tuple[str, str], list[int]] = {}
    for rec in records:
        level = _report_level(rec, group_by)
        for service in (rec.service, "Total"):
            cell = counts.setdefault((service, level), [0, 0])
            cell[rec.label] += 1
    services = [s for s in SERVICES if any(k[0] == s for k in counts)] + ["Total"]
    levels = sorted({k[1] for k in counts})
    rows = []
    for service in services:
        for level in levels:
            if (service, level) in counts:
                show, no_show = counts[(service, level)]
                rows.append(MarginalRow(service, level, show, no_show))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Splitting and class weights


def split(records: RecordSet, train_fraction: float, stratify: bool = True,
          seed: int = 0) -> tuple[RecordSet, RecordSet]:
    """Deterministic train/test partition, optionally label-stratified."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction {train_fraction} out of (0, 1)")
    n = len(records)
    rng = np.random.default_rng(seed)
    n_train = int(round(train_fraction * n))

    if not stratify:
        perm = rng.permutation(n)
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
        return records.take(train_idx), records.take(test_idx)

    labels = records.labels
    class_idx = {c: np.flatnonzero(labels == c) for c in (0, 1)}
    if any(len(v) < 2 for v in class_idx.values()):
        raise SplitError("stratified split needs at least 2 records per class")
    targets = {c: train_fraction * len(v) for c, v in class_idx.items()}
    base = {c: math.floor(t) for c, t in targets.items()}
    short = n_train - sum(base.values())
    # distribute the remainder by the largest fractional part, ties to class 0
    order = sorted(class_idx, key=lambda c: (-(targets[c] - base[c]), c))
    for c in order:
        if short <= 0:
            break
        if base[c] < len(class_idx[c]):
            base[c] += 1
            short -= 1
    train_parts, test_parts = [], []
    for c in (0, 1):
        perm = class_idx[c][rng.permutation(len(class_idx[c]))]
        train_parts.append(perm[:base[c]])
        test_parts.append(perm[base[c]:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return records.take(train_idx), records.take(test_idx)


@dataclass(frozen=True)
class ClassWeights:
    """Balanced class weights: each class contributes equal total mass."""

    w_show: float
    w_no_show: float

    def __post_init__(self):
        for w in (self.w_show, self.w_no_show):
            if not (math.isfinite(w) and w > 0):
                raise WeightError(f"weights must be finite and positive, got {w}")

    def per_row(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels)
        return np.where(labels == 1, self.w_no_show, self.w_show)


UNIT_WEIGHTS = ClassWeights(1.0, 1.0)


def class_weights(labels: Sequence[int]) -> ClassWeights:
    """w_c = n / (2 * n_c), so both classes carry mass n/2 after weighting."""
    labels = np.asarray(labels)
    n = labels.size
    n_no_show = int((labels == 1).sum())
    n_show = n - n_no_show
    if n_show == 0 or n_no_show == 0:
        raise WeightError("both classes must be present to balance weights")
    return ClassWeights(n / (2.0 * n_show), n / (2.0 * n_no_show))


def schema_to_json(schema: FeatureSchema) -> str:
    return json.dumps(schema.to_dict(), sort_keys=True)


def schema_from_json(text: str) -> FeatureSchema:
    return FeatureSchema.from_dict(json.loads(text))
