import numpy as np
import pytest

from noshow.errors import PropagationError, ValidationError
from noshow.explain import (
    EPSILON,
    HeatmapTable,
    RelevanceMap,
    explain_cohort,
    lrp,
    relevance_heatmap,
)
from noshow.neural import MlpModel, init_mlp, forward


def _linear_model(w2):
    n = len(w2)
    return MlpModel(np.eye(n), np.zeros(n), np.array(w2, dtype=float), 0.0, 0)


# ---------------------------------------------------------------------------
# Propagation


def test_zero_input_zero_relevance():
    model = init_mlp(5, 3, seed=0)
    rm = lrp(model, np.zeros(5))
    assert np.all(rm.per_column == 0.0)
    assert rm.probability == 0.5  # zero biases, zero input


def test_identity_network_hand_example():
    model = _linear_model([2.0, -1.0])
    rm = lrp(model, np.array([1.0, 1.0]))
    assert rm.output_relevance == pytest.approx(1.0)
    assert rm.per_column[0] == pytest.approx(2.0, abs=1e-6)
    assert rm.per_column[1] == pytest.approx(-1.0, abs=1e-6)
    assert rm.per_column.sum() == pytest.approx(rm.output_relevance, abs=1e-6)


def test_inactive_input_gets_zero_relevance():
    model = init_mlp(4, 6, seed=2)
    x = np.array([1.0, 0.0, 2.0, 0.0])
    rm = lrp(model, x)
    assert rm.per_column[1] == 0.0
    assert rm.per_column[3] == 0.0


@pytest.mark.parametrize("seed", range(25))
def test_conservation_zero_bias_models(seed):
    rng = np.random.default_rng(seed)
    n, h = int(rng.integers(2, 10)), int(rng.integers(2, 12))
    model = init_mlp(n, h, seed=seed)  # zero biases by construction
    for _ in range(4):
        x = rng.normal(size=n)
        rm = lrp(model, x)
        if abs(rm.output_relevance) < 1e-3:
            assert abs(rm.per_column.sum() - rm.output_relevance) < 1e-6
        else:
            rel = abs(rm.per_column.sum() - rm.output_relevance) \
                / abs(rm.output_relevance)
            assert rel < 1e-3


@pytest.mark.parametrize("seed", range(10))
def test_absorption_accounting_with_biases(seed):
    rng = np.random.default_rng(seed)
    n, h = 5, 4
    base = init_mlp(n, h, seed=seed)
    model = MlpModel(base.W1, rng.normal(size=h) * 0.5, base.W2,
                     float(rng.normal()), seed)
    x = rng.normal(size=n)
    rm = lrp(model, x)
    assert abs(rm.conservation_residual()) < 1e-9


def test_positive_homogeneity_scaling():
    model = init_mlp(6, 5, seed=3)  # zero biases: relu net is 1-homogeneous
    rng = np.random.default_rng(1)
    x = rng.normal(size=6)
    rm1 = lrp(model, x)
    rm3 = lrp(model, 3.0 * x)
    assert rm3.output_relevance == pytest.approx(3 * rm1.output_relevance,
                                                 rel=1e-9)
    assert np.allclose(rm3.per_column, 3 * rm1.per_column, rtol=1e-6,
                       atol=1e-12)


def test_relevance_sign_supports_logit():
    # one hidden unit passes x through with weight +2: positive x raises
    # the no-show logit and must carry positive relevance
    model = _linear_model([2.0])
    rm = lrp(model, np.array([1.5]))
    assert rm.output_relevance > 0
    assert rm.per_column[0] > 0


def test_propagation_error_on_non_finite():
    model = init_mlp(3, 2, seed=0)
    with pytest.raises(PropagationError):
        lrp(model, np.array([np.inf, 0.0, 0.0]))


def test_epsilon_default_value():
    assert EPSILON == 1e-9


# ---------------------------------------------------------------------------
# Schema rollup


def _schema_and_row(small_records):
    from noshow.dataset import BinSpec, default_bin_labels, encode
    bins = (BinSpec("age", (30,), default_bin_labels((30,))),
            BinSpec("lead_time", (15,), default_bin_labels((15,))))
    dm = encode(small_records, bins, drop_reference=True,
                interactions=(("gender", "day_of_week"),))
    return dm


def test_per_variable_rollup(small_records):
    dm = _schema_and_row(small_records)
    model = init_mlp(dm.width, 8, seed=1)
    rm = lrp(model, dm.X[3], schema=dm.schema, record_id=int(dm.row_ids[3]))
    assert rm.record_id == int(dm.row_ids[3])
    assert rm.column_names == dm.schema.column_names
    assert set(rm.per_variable) == {dm.schema.column_variable(j)
                                    for j in range(dm.width)}
    total_cols = rm.per_column.sum()
    total_vars = sum(rm.per_variable.values())
    assert total_vars == pytest.approx(total_cols, abs=1e-12)


def test_schema_width_mismatch(small_records):
    dm = _schema_and_row(small_records)
    model = init_mlp(4, 3, seed=0)
    with pytest.raises(ValidationError):
        lrp(model, np.ones(4), schema=dm.schema)


def test_explain_cohort_aligns_ids(small_records):
    dm = _schema_and_row(small_records)
    model = init_mlp(dm.width, 6, seed=0)
    maps = explain_cohort(model, dm.X[:5], dm.row_ids[:5], dm.schema)
    assert [m.record_id for m in maps] == dm.row_ids[:5].tolist()
    p = model.predict_proba(dm.X[:5])
    assert [m.probability for m in maps] == pytest.approx(p.tolist())
    with pytest.raises(ValidationError):
        explain_cohort(model, dm.X[:5], dm.row_ids[:4], dm.schema)


# ---------------------------------------------------------------------------
# Heatmap


def _map(record_id, prob, per_var):
    cols = np.array(list(per_var.values()))
    return RelevanceMap(record_id, prob, float(cols.sum()), cols, 0.0,
                        tuple(per_var), dict(per_var))


def test_heatmap_single_map():
    table = relevance_heatmap([_map(7, 0.8, {"gender": 0.3, "age": -0.1})])
    assert table.record_ids == (7,)
    assert table.probabilities == (0.8,)
    assert table.variables == ("gender", "age")
    assert table.cells[0, 0] == 0.3


def test_heatmap_sorts_by_descending_probability():
    maps = [_map(1, 0.2, {"a": 1.0}), _map(2, 0.9, {"a": 2.0}),
            _map(3, 0.5, {"a": 3.0})]
    table = relevance_heatmap(maps)
    assert table.record_ids == (2, 3, 1)
    assert table.probabilities == (0.9, 0.5, 0.2)
    assert table.cells[0].tolist() == [2.0, 3.0, 1.0]


def test_heatmap_ties_break_by_record_id():
    maps = [_map(9, 0.5, {"a": 1.0}), _map(4, 0.5, {"a": 2.0})]
    assert relevance_heatmap(maps).record_ids == (4, 9)


def test_heatmap_drops_all_zero_variable():
    maps = [_map(1, 0.6, {"a": 1.0, "b": 0.0}),
            _map(2, 0.4, {"a": -1.0, "b": 0.0})]
    table = relevance_heatmap(maps)
    assert table.variables == ("a",)
    # a variable active for even one patient is retained
    maps[1] = _map(2, 0.4, {"a": -1.0, "b": 0.5})
    assert relevance_heatmap(maps).variables == ("a", "b")


def test_heatmap_requires_consistent_schema():
    with pytest.raises(ValidationError):
        relevance_heatmap([_map(1, 0.5, {"a": 1.0}),
                           _map(2, 0.5, {"b": 1.0})])
    with pytest.raises(ValidationError):
        relevance_heatmap([])
    bare = RelevanceMap(1, 0.5, 0.0, np.zeros(2), 0.0)
    with pytest.raises(ValidationError):
        relevance_heatmap([bare])


def test_heatmap_csv_layout():
    maps = [_map(11, 0.75, {"gender": 0.25, "age": -0.5}),
            _map(12, 0.25, {"gender": 0.0, "age": 0.125})]
    text = relevance_heatmap(maps).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "variable,11,12"
    assert lines[1] == "probability,0.75,0.25"
    assert lines[2] == "gender,0.25,0.0"
    assert lines[3] == "age,-0.5,0.125"


def test_heatmap_json_roundtrip_values():
    maps = [_map(1, 0.9, {"x": 1.5})]
    d = relevance_heatmap(maps).to_dict()
    assert d["variables"] == ["x"]
    assert d["record_ids"] == [1]
    assert d["cells"] == [[1.5]]


def test_heatmap_cells_reproduce_maps(small_records):
    dm = _schema_and_row(small_records)
    model = init_mlp(dm.width, 5, seed=4)
    maps = explain_cohort(model, dm.X[:8], dm.row_ids[:8], dm.schema)
    table = relevance_heatmap(maps)
    by_id = {m.record_id: m for m in maps}
    for j, rid in enumerate(table.record_ids):
        for i, var in enumerate(table.variables):
            assert table.cells[i, j] == by_id[rid].per_variable[var]
