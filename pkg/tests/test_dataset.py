import csv
import math

import numpy as np
import pytest

from noshow.dataset import (
    AppointmentRecord,
    BinSpec,
    FeatureSchema,
    RecordSet,
    VariableBlock,
    build_schema,
    class_weights,
    classify_zone_income,
    coarse_class,
    cramers_v,
    decode_row,
    default_bin_labels,
    encode,
    encode_with_schema,
    ingest_csv,
    level_index_matrix,
    load_zone_strata,
    marginal_rates,
    schema_from_json,
    schema_to_json,
    split,
    write_csv,
)
from noshow.errors import (
    EncodingError,
    SchemaError,
    SplitError,
    ValidationError,
    WeightError,
)

from conftest import make_record, random_records
from oracles import best_partition_by_enumeration, cramers_v_by_formula


# ---------------------------------------------------------------------------
# Records and ingestion


def test_record_validation_rejects_bad_fields():
    with pytest.raises(ValidationError):
        make_record(1, gender="unknown")
    with pytest.raises(ValidationError):
        make_record(1, age=121)
    with pytest.raises(ValidationError):
        make_record(1, age=-1)
    with pytest.raises(ValidationError):
        make_record(1, lead=1001)
    with pytest.raises(ValidationError):
        make_record(1, month=0)
    with pytest.raises(ValidationError):
        make_record(1, day="XXX")
    with pytest.raises(ValidationError):
        make_record(1, outcome="missed")


def test_record_label():
    assert make_record(1, outcome="no_show").label == 1
    assert make_record(2, outcome="show").label == 0


def test_recordset_rejects_duplicate_ids():
    with pytest.raises(ValidationError):
        RecordSet((make_record(1), make_record(1)))


def _write_rows(path, rows, header):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def test_ingest_csv_roundtrip(tmp_path, small_records):
    path = tmp_path / "appts.csv"
    write_csv(small_records, path)
    back = ingest_csv(path)
    assert back.rejects == ()
    assert back.records == small_records.records


def test_ingest_csv_collects_rejects(tmp_path):
    header = ["record_id", "gender", "age_years", "zone_id", "zone_income",
              "service", "facility_id", "lead_time_days", "month",
              "day_of_week", "outcome"]
    rows = [
        [1, "F", 30, "z1", "low", "OH", "f01", 5, 3, "MON", "show"],
        [2, "X", 30, "z1", "low", "OH", "f01", 5, 3, "MON", "show"],
        [3, "M", 200, "z1", "low", "OH", "f01", 5, 3, "MON", "show"],
        [4, "M", 40, "z1", "low", "OH", "f01", 5, 3, "MON", "no_show"],
        [1, "M", 40, "z1", "low", "OH", "f01", 5, 3, "MON", "no_show"],
        [5, "M", "abc", "z1", "low", "OH", "f01", 5, 3, "MON", "show"],
        [6, "M", 40, "z1", "low", "OH", "f01", 5, 13, "MON", "show"],
    ]
    path = tmp_path / "bad.csv"
    _write_rows(path, rows, header)
    rs = ingest_csv(path)
    assert [r.record_id for r in rs] == [1, 4]
    assert len(rs.rejects) == 5
    assert rs.rejects[0].line_number == 3
    assert "gender" in rs.rejects[0].reason
    reasons = " | ".join(r.reason for r in rs.rejects)
    assert "duplicate record_id 1" in reasons
    assert "not an integer" in reasons


def test_ingest_csv_header_mismatch(tmp_path):
    path = tmp_path / "x.csv"
    _write_rows(path, [], ["a", "b"])
    with pytest.raises(SchemaError):
        ingest_csv(path)


def test_ingest_without_income_column_uses_strata(tmp_path):
    header = ["record_id", "gender", "age_years", "zone_id", "service",
              "facility_id", "lead_time_days", "month", "day_of_week",
              "outcome"]
    rows = [
        [1, "F", 30, "z1", "OH", "f01", 5, 3, "MON", "show"],
        [2, "M", 40, "z2", "OH", "f01", 5, 3, "MON", "no_show"],
        [3, "M", 40, "z9", "OH", "f01", 5, 3, "MON", "no_show"],
    ]
    path = tmp_path / "noincome.csv"
    _write_rows(path, rows, header)
    with pytest.raises(SchemaError):
        ingest_csv(path)
    rs = ingest_csv(path, zone_strata={"z1": "low", "z2": "medium"})
    assert [r.zone_income for r in rs] == ["low", "medium"]
    assert len(rs.rejects) == 1 and "z9" in rs.rejects[0].reason


def test_zone_income_rule():
    # exactly half in the two lowest strata counts as low
    assert classify_zone_income({1: 0.3, 2: 0.2, 3: 0.5}) == "low"
    assert classify_zone_income({1: 0.3, 2: 0.19, 3: 0.51}) == "medium"
    assert classify_zone_income({1: 1.0}) == "low"
    with pytest.raises(ValidationError):
        classify_zone_income({1: 0.5, 2: 0.6})
    with pytest.raises(ValidationError):
        classify_zone_income({1: -0.1, 2: 1.1})


def test_load_zone_strata(tmp_path):
    path = tmp_path / "zones.csv"
    header = ["zone_id"] + [f"stratum{i}_share" for i in range(1, 7)]
    _write_rows(path, [
        ["z1", 0.4, 0.1, 0.5, 0, 0, 0],
        ["z2", 0.1, 0.1, 0.8, 0, 0, 0],
    ], header)
    zones = load_zone_strata(path)
    assert zones == {"z1": "low", "z2": "medium"}


# ---------------------------------------------------------------------------
# Coarse classing


def test_coarse_class_obvious_step():
    # rate jumps at 30; the only sensible cut is there
    values = list(range(0, 60))
    outcomes = [1 if v < 30 else 0 for v in values]
    spec = coarse_class(values, outcomes, max_bins=6, min_leaf_fraction=0.05)
    assert spec.cut_points == (30,)
    assert spec.labels == ("[0,30)", "[30,inf)")


def test_coarse_class_constant_outcome_single_bin():
    values = list(range(100))
    spec = coarse_class(values, [1] * 100)
    assert spec.cut_points == ()
    assert spec.labels == ("[0,inf)",)


def test_coarse_class_constant_values_single_bin():
    spec = coarse_class([5] * 50, [0, 1] * 25)
    assert spec.cut_points == ()


def test_coarse_class_three_segments():
    # exact within-segment rates: cuts inside a segment change nothing,
    # so the fewer-bins tie-break recovers exactly the two true cuts
    values, outcomes = [], []
    for v in range(90):
        positives = 4 if v < 30 else (1 if v < 60 else 3)
        for k in range(5):
            values.append(v)
            outcomes.append(1 if k < positives else 0)
    spec = coarse_class(values, outcomes, max_bins=6, min_leaf_fraction=0.05)
    assert spec.cut_points == (30, 60)


def test_coarse_class_respects_max_bins():
    rng = np.random.default_rng(11)
    values = rng.integers(0, 40, size=600)
    outcomes = rng.integers(0, 2, size=600)
    for max_bins in (2, 3, 4):
        spec = coarse_class(values, outcomes, max_bins=max_bins,
                            min_leaf_fraction=0.0)
        assert len(spec.labels) <= max_bins


def test_coarse_class_min_leaf_enforced():
    values = list(range(100))
    outcomes = [1 if v < 3 else 0 for v in values]
    # a pure split at 3 would leave a 3-sample leaf; 10% floor forbids it
    spec = coarse_class(values, outcomes, max_bins=4, min_leaf_fraction=0.10)
    for lo, hi in zip((0,) + spec.cut_points, spec.cut_points + (100,)):
        assert hi - lo >= 10


def test_coarse_class_rejects_bad_args():
    with pytest.raises(ValidationError):
        coarse_class([1, 2], [0, 1], max_bins=1)
    with pytest.raises(ValidationError):
        coarse_class([1, 2], [0])
    with pytest.raises(ValidationError):
        coarse_class([], [])


@pytest.mark.parametrize("seed", range(8))
def test_coarse_class_matches_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(30, 160))
    values = rng.integers(0, 12, size=n)
    outcomes = (rng.random(n) < 0.2 + 0.6 * (values > 5)).astype(int)
    max_bins = int(rng.integers(2, 5))
    frac = float(rng.choice([0.0, 0.05, 0.1]))
    min_leaf = max(1, math.ceil(frac * n))
    spec = coarse_class(values, outcomes, max_bins=max_bins,
                        min_leaf_fraction=frac)
    oracle = best_partition_by_enumeration(values, outcomes, max_bins, min_leaf)
    assert oracle is not None
    oracle_cost, oracle_cuts = oracle
    edges = [-np.inf] + list(spec.cut_points) + [np.inf]
    got_cost = 0.0
    for lo, hi in zip(edges, edges[1:]):
        mask = (values >= lo) & (values < hi)
        p = outcomes[mask].mean() if mask.sum() else 0.0
        got_cost += mask.sum() * (1 - p * p - (1 - p) ** 2)
    assert got_cost == pytest.approx(oracle_cost, abs=1e-9)
    assert spec.cut_points == oracle_cuts


def test_bin_spec_maps_and_clamps():
    spec = BinSpec("age", (10, 40), ("[0,10)", "[10,40)", "[40,inf)"))
    assert spec.bin_label(0) == "[0,10)"
    assert spec.bin_label(9) == "[0,10)"
    assert spec.bin_label(10) == "[10,40)"
    assert spec.bin_label(39) == "[10,40)"
    assert spec.bin_label(40) == "[40,inf)"
    assert spec.bin_label(120) == "[40,inf)"


def test_bin_spec_validation_and_roundtrip():
    with pytest.raises(ValidationError):
        BinSpec("age", (10, 10), ("a", "b", "c"))
    with pytest.raises(ValidationError):
        BinSpec("age", (10,), ("a",))
    spec = BinSpec("lead_time", (15,), default_bin_labels((15,)))
    assert BinSpec.from_dict(spec.to_dict()) == spec


# ---------------------------------------------------------------------------
# Encoding


def _tiny_bins():
    return (BinSpec("age", (30,), default_bin_labels((30,))),
            BinSpec("lead_time", (15,), default_bin_labels((15,))))


def test_encode_full_one_hot_block_sums(small_records):
    dm = encode(small_records, _tiny_bins(), drop_reference=False)
    schema = dm.schema
    assert dm.X.shape == (len(small_records), schema.width)
    # with no reference drop, each variable block sums to exactly 1 per row
    start = 0
    for blk in schema.blocks:
        w = len(blk.kept_levels)
        assert np.all(dm.X[:, start:start + w].sum(axis=1) == 1.0)
        start += w


def test_encode_drop_reference_removes_most_frequent(small_records):
    dm = encode(small_records, _tiny_bins(), drop_reference=True)
    schema = dm.schema
    for blk in schema.blocks:
        assert blk.reference is not None
        counts = {}
        bins_by = {b.variable: b for b in schema.bins}
        from noshow.dataset import record_level
        for r in small_records:
            lv = record_level(r, blk.variable, bins_by)
            counts[lv] = counts.get(lv, 0) + 1
        top = max(counts.values())
        winners = sorted(l for l, c in counts.items() if c == top)
        assert blk.reference == winners[0]
        # block rows now sum to 0 (reference) or 1
        assert blk.reference not in blk.kept_levels


def test_encode_reference_tie_breaks_lexicographically():
    recs = RecordSet((
        make_record(1, gender="female"),
        make_record(2, gender="male"),
    ))
    dm = encode(recs, _tiny_bins(), drop_reference=True)
    assert dm.schema.block("gender").reference == "female"


def test_encode_width_formula(small_records):
    bins = _tiny_bins()
    full = encode(small_records, bins, drop_reference=False)
    total_levels = sum(len(b.levels) for b in full.schema.blocks)
    assert full.schema.width == total_levels
    dropped = encode(small_records, bins, drop_reference=True)
    assert dropped.schema.width == total_levels - len(dropped.schema.blocks)


def test_encode_interactions_are_products(small_records):
    dm = encode(small_records, _tiny_bins(), drop_reference=True,
                interactions=(("gender", "day_of_week"),))
    schema = dm.schema
    n_main = len(schema.main_columns)
    assert len(schema.interaction_columns) == 1 * 6  # 1 kept gender x 6 kept days
    for k, (a, b) in enumerate(schema.interaction_columns):
        assert np.array_equal(dm.X[:, n_main + k], dm.X[:, a] * dm.X[:, b])


def test_encode_interaction_unknown_variable(small_records):
    with pytest.raises(ValidationError):
        encode(small_records, _tiny_bins(), interactions=(("gender", "nope"),))


def test_column_names_unique_and_descriptive(small_records):
    dm = encode(small_records, _tiny_bins(), drop_reference=True,
                interactions=(("gender", "day_of_week"),))
    names = dm.schema.column_names
    assert len(names) == len(set(names)) == dm.schema.width
    assert any(n.startswith("age=") for n in names)
    assert any("*" in n for n in names)


def test_encode_with_schema_rejects_unseen_facility(small_records):
    schema = build_schema(small_records, _tiny_bins())
    stranger = RecordSet((make_record(10_000, facility="f99"),))
    with pytest.raises(EncodingError):
        encode_with_schema(stranger, schema)


def test_encode_with_schema_clamps_binned_values(small_records):
    schema = build_schema(small_records, _tiny_bins())
    outlier = RecordSet((make_record(10_000, age=120, lead=999),))
    dm = encode_with_schema(outlier, schema)
    decoded = decode_row(dm, 0)
    assert decoded["age"] == "[30,inf)"
    assert decoded["lead_time"] == "[15,inf)"


def test_decode_row_roundtrip(small_records):
    bins = _tiny_bins()
    for drop in (False, True):
        dm = encode(small_records, bins, drop_reference=drop)
        bins_by = {b.variable: b for b in bins}
        from noshow.dataset import record_level
        for i in (0, 5, 17):
            decoded = decode_row(dm, i)
            for variable, level in decoded.items():
                assert level == record_level(small_records[i], variable, bins_by)


def test_design_matrix_is_readonly(small_records):
    dm = encode(small_records, _tiny_bins())
    with pytest.raises(ValueError):
        dm.X[0, 0] = 5.0


def test_design_matrix_take(small_records):
    dm = encode(small_records, _tiny_bins())
    sub = dm.take([3, 1, 10])
    assert sub.n == 3
    assert np.array_equal(sub.row_ids,
                          [small_records[i].record_id for i in (3, 1, 10)])
    assert np.array_equal(sub.X[0], dm.X[3])


def test_schema_json_roundtrip(small_records):
    schema = build_schema(small_records, _tiny_bins(), drop_reference=True,
                          interactions=(("gender", "day_of_week"),))
    back = schema_from_json(schema_to_json(schema))
    assert back == schema
    assert back.column_names == schema.column_names


def test_level_index_matrix(small_records):
    schema = build_schema(small_records, _tiny_bins())
    idx = level_index_matrix(small_records, schema)
    assert idx.shape == (len(small_records), len(schema.blocks))
    for j, blk in enumerate(schema.blocks):
        assert idx[:, j].max() < len(blk.levels)
        assert idx[:, j].min() >= 0


# ---------------------------------------------------------------------------
# Descriptive statistics


def test_cramers_v_matches_textbook_formula():
    rng = np.random.default_rng(5)
    levels = rng.choice(["a", "b", "c"], size=300)
    outcomes = np.where(rng.random(300) < 0.3 + 0.3 * (levels == "a"),
                        "no_show", "show")
    rows = ["a", "b", "c"]
    cols = ["no_show", "show"]
    table = [[np.sum((levels == r) & (outcomes == c)) for c in cols]
             for r in rows]
    assert cramers_v(levels, outcomes) == pytest.approx(
        cramers_v_by_formula(table), abs=1e-12)


def test_cramers_v_perfect_and_none():
    levels = ["a"] * 50 + ["b"] * 50
    outcomes = [1] * 50 + [0] * 50
    assert cramers_v(levels, outcomes) == pytest.approx(1.0)
    assert cramers_v(levels, [1] * 100) == 0.0
    independent = ["a", "b"] * 50
    balanced = [1, 1, 0, 0] * 25
    assert cramers_v(independent, balanced) == pytest.approx(0.0, abs=1e-12)


def test_cramers_v_bad_input():
    with pytest.raises(ValidationError):
        cramers_v(["a"], [1])
    with pytest.raises(ValidationError):
        cramers_v(["a", "b"], [1])


def test_marginal_rates_counts_and_total(small_records):
    rows = marginal_rates(small_records, "gender")
    by_key = {(r.service, r.level): r for r in rows}
    total_f = by_key[("Total", "female")]
    hand_count = sum(1 for r in small_records if r.gender == "female")
    assert total_f.n_show + total_f.n_no_show == hand_count
    per_service = sum(by_key[(s, "female")].n_no_show
                      for s in ("OH", "GD", "YAP", "SP")
                      if (s, "female") in by_key)
    assert per_service == total_f.n_no_show
    assert 0.0 <= total_f.rate <= 1.0


def test_marginal_rates_age_bands():
    recs = RecordSet((make_record(1, age=5), make_record(2, age=65),
                      make_record(3, age=60, outcome="no_show")))
    rows = marginal_rates(recs, "age")
    levels = {r.level for r in rows}
    assert "0-10" in levels and "Over 60" in levels
    over = [r for r in rows if r.service == "Total" and r.level == "Over 60"][0]
    assert over.n_show + over.n_no_show == 2  # 60 and 65 both land there


def test_marginal_rates_lead_bands():
    recs = RecordSet((make_record(1, lead=0), make_record(2, lead=14),
                      make_record(3, lead=15), make_record(4, lead=60)))
    rows = [r for r in marginal_rates(recs, "lead_time") if r.service == "Total"]
    counts = {r.level: r.n_show + r.n_no_show for r in rows}
    assert counts == {"0-15": 2, "15-30": 1, "Over 60": 1}


def test_marginal_rates_rejects_bad_group(small_records):
    with pytest.raises(ValidationError):
        marginal_rates(small_records, "shoe_size")


# ---------------------------------------------------------------------------
# Splitting and weights


def test_split_sizes_and_disjoint(small_records):
    train, test = split(small_records, 0.7, stratify=False, seed=1)
    assert len(train) == round(0.7 * len(small_records))
    assert len(train) + len(test) == len(small_records)
    assert not set(r.record_id for r in train) & set(r.record_id for r in test)


def test_split_deterministic(small_records):
    a1, b1 = split(small_records, 0.7, seed=42)
    a2, b2 = split(small_records, 0.7, seed=42)
    assert a1.records == a2.records and b1.records == b2.records
    a3, _ = split(small_records, 0.7, seed=43)
    assert a3.records != a1.records


def test_split_stratified_preserves_rate(small_records):
    train, test = split(small_records, 0.7, stratify=True, seed=0)
    n_pos = int(small_records.labels.sum())
    target = 0.7 * n_pos
    assert abs(int(train.labels.sum()) - target) <= 1


def test_split_stratified_exact_when_divisible():
    # 1000 records at 29% positives: 0.7 * 290 = 203 exactly
    recs = [make_record(i, outcome="no_show") for i in range(290)]
    recs += [make_record(i, outcome="show") for i in range(290, 1000)]
    rs = RecordSet(tuple(recs))
    train, _ = split(rs, 0.7, stratify=True, seed=9)
    assert int(train.labels.sum()) == 203
    assert len(train) == 700


def test_split_bad_fraction(small_records):
    for f in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValidationError):
            split(small_records, f)


def test_split_stratify_needs_both_classes():
    rs = RecordSet(tuple(make_record(i) for i in range(10)))
    with pytest.raises(SplitError):
        split(rs, 0.5, stratify=True)


def test_class_weights_balance():
    labels = np.array([1] * 30 + [0] * 70)
    w = class_weights(labels)
    assert w.w_no_show == pytest.approx(100 / 60)
    assert w.w_show == pytest.approx(100 / 140)
    per_row = w.per_row(labels)
    assert per_row[labels == 1].sum() == pytest.approx(per_row[labels == 0].sum())
    assert per_row.sum() == pytest.approx(100.0)


def test_class_weights_single_class_fails():
    with pytest.raises(WeightError):
        class_weights(np.zeros(10, dtype=int))
