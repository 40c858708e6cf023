import numpy as np
import pytest

from noshow.dataset import class_weights
from noshow.errors import ConvergenceError, DimensionError, ValidationError
from noshow.linear import (
    L1Logistic,
    default_penalty_path,
    fit_l1_logistic,
    kkt_violation,
    make_l1_trainer,
    objective,
    odds_ratios,
    path_search,
    select_penalty,
    sigmoid,
    PathEntry,
)

from oracles import l1_logistic_objective, numerical_gradient


def _problem(n=200, d=6, seed=0, signal=(2.0, -1.5)):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    z = signal[0] * X[:, 0] + signal[1] * X[:, 1] - 0.3
    y = (rng.random(n) < sigmoid(z)).astype(int)
    return X, y


def test_sigmoid_stable_extremes():
    assert sigmoid(np.array([800.0]))[0] == 1.0
    assert sigmoid(np.array([-800.0]))[0] == 0.0
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_objective_matches_independent_formula():
    X, y = _problem(80, 4, seed=3)
    rng = np.random.default_rng(1)
    beta = rng.normal(size=4)
    w = rng.uniform(0.5, 2.0, size=80)
    ours = objective(beta, 0.7, X, y, w, penalty=0.05)
    assert ours == pytest.approx(
        l1_logistic_objective(beta, 0.7, X, y, w, 0.05), rel=1e-12)


def test_smooth_gradient_matches_finite_differences():
    from noshow.linear import _smooth_grad
    X, y = _problem(60, 3, seed=5)
    w = np.random.default_rng(2).uniform(0.5, 2.0, size=60)
    beta0 = np.array([0.3, -0.2, 0.1])
    b0 = -0.4

    def f(params):
        return objective(params[:3], params[3], X, y, w, penalty=0.0)

    num = numerical_gradient(f, np.concatenate([beta0, [b0]]))
    g, gb, _ = _smooth_grad(beta0, b0, X, y, w)
    assert np.allclose(g, num[:3], atol=1e-6)
    assert gb == pytest.approx(num[3], abs=1e-6)


def test_fit_reaches_stationarity():
    X, y = _problem()
    w = class_weights(y).per_row(y)
    model = fit_l1_logistic(X, y, penalty=0.02, weights=w, tol=1e-8)
    assert kkt_violation(model, X, y, w) < 1e-8


def test_fit_is_global_minimum_under_perturbation():
    X, y = _problem(150, 5, seed=8)
    model = fit_l1_logistic(X, y, penalty=0.03, tol=1e-9)
    base = objective(model.coefficients, model.intercept, X, y,
                     np.ones(150), 0.03)
    rng = np.random.default_rng(0)
    for scale in (1e-3, 1e-2, 0.1, 0.3):
        for _ in range(100):
            d_beta = rng.normal(scale=scale, size=5)
            d_b = rng.normal(scale=scale)
            perturbed = objective(model.coefficients + d_beta,
                                  model.intercept + d_b, X, y,
                                  np.ones(150), 0.03)
            assert perturbed >= base - 1e-9


def test_soft_threshold_gives_exact_zeros():
    X, y = _problem()
    model = fit_l1_logistic(X, y, penalty=5.0)
    assert model.n_nonzero == 0
    assert np.all(model.coefficients == 0.0)  # exact, not just small


def test_null_model_intercept_is_base_rate_logit():
    X, y = _problem(300, 4, seed=2)
    model = fit_l1_logistic(X, y, penalty=8.0)
    rate = y.mean()
    assert model.intercept == pytest.approx(np.log(rate / (1 - rate)), abs=1e-5)
    # balanced weights move the weighted base rate to one half
    w = class_weights(y).per_row(y)
    balanced = fit_l1_logistic(X, y, penalty=8.0, weights=w)
    assert balanced.intercept == pytest.approx(0.0, abs=1e-5)


def test_penalty_threshold_for_all_zero():
    from noshow.linear import _smooth_grad
    X, y = _problem(200, 5, seed=4)
    b0 = np.log(y.mean() / (1 - y.mean()))
    g, _, _ = _smooth_grad(np.zeros(5), b0, X, y, np.ones(200))
    lam_max = np.abs(g).max()
    assert fit_l1_logistic(X, y, penalty=lam_max * 1.01).n_nonzero == 0
    assert fit_l1_logistic(X, y, penalty=lam_max * 0.5).n_nonzero > 0


def test_sparsity_shrinks_with_penalty():
    X, y = _problem(400, 8, seed=6)
    counts = [fit_l1_logistic(X, y, lam).n_nonzero
              for lam in (0.01, 0.1, 1.0, 10.0)]
    assert counts[0] >= counts[1] >= counts[2] >= counts[3]
    assert counts[0] >= 2
    assert counts[3] == 0


def test_warm_start_agrees_with_cold_start():
    X, y = _problem(250, 6, seed=9)
    cold = fit_l1_logistic(X, y, penalty=0.05, tol=1e-9)
    other = fit_l1_logistic(X, y, penalty=0.5, tol=1e-9)
    warm = fit_l1_logistic(X, y, penalty=0.05, tol=1e-9,
                           warm_start=(other.coefficients, other.intercept))
    assert warm.objective == pytest.approx(cold.objective, abs=1e-8)
    assert np.allclose(warm.coefficients, cold.coefficients, atol=1e-4)


def test_duplicated_row_equals_double_weight():
    X, y = _problem(100, 4, seed=12)
    X_dup = np.vstack([X, X[:10]])
    y_dup = np.concatenate([y, y[:10]])
    w = np.ones(100)
    w[:10] = 2.0
    a = fit_l1_logistic(X_dup, y_dup, penalty=0.02, tol=1e-9)
    b = fit_l1_logistic(X, y, penalty=0.02, weights=w, tol=1e-9)
    assert np.allclose(a.coefficients, b.coefficients, atol=1e-5)
    assert a.intercept == pytest.approx(b.intercept, abs=1e-5)


def test_fit_validation_errors():
    X, y = _problem(50, 3)
    with pytest.raises(ValidationError):
        fit_l1_logistic(X, y, penalty=-1.0)
    with pytest.raises(DimensionError):
        fit_l1_logistic(X, y[:20], penalty=0.1)
    with pytest.raises(ValidationError):
        fit_l1_logistic(X, y, penalty=0.1, weights=np.zeros(50))
    with pytest.raises(DimensionError):
        fit_l1_logistic(X, y, penalty=0.1, warm_start=(np.zeros(99), 0.0))


def test_convergence_error_carries_objective():
    X, y = _problem(200, 6, seed=1)
    with pytest.raises(ConvergenceError) as exc:
        fit_l1_logistic(X, y, penalty=0.001, max_iter=1, tol=1e-14)
    assert exc.value.last_objective is not None
    assert np.isfinite(exc.value.last_objective)


def test_predict_proba_shape_and_range():
    X, y = _problem()
    model = fit_l1_logistic(X, y, penalty=0.05)
    p = model.predict_proba(X)
    assert p.shape == (200,)
    assert np.all((p > 0) & (p < 1))
    with pytest.raises(DimensionError):
        model.predict_proba(X[:, :3])


def test_model_roundtrip():
    X, y = _problem(80, 4)
    model = fit_l1_logistic(X, y, penalty=0.1)
    back = L1Logistic.from_dict(model.to_dict())
    assert back.intercept == model.intercept
    assert np.array_equal(back.coefficients, model.coefficients)
    assert back.penalty == model.penalty


# ---------------------------------------------------------------------------
# Penalty path


def test_default_path_values():
    path = default_penalty_path()
    assert len(path) == 30
    assert path[0] == pytest.approx(0.01)
    assert path[9] == pytest.approx(0.10)
    assert path[10] == pytest.approx(0.19)
    assert path[19] == pytest.approx(1.00)
    assert path[20] == pytest.approx(1.90)
    assert path[29] == pytest.approx(10.0)
    # equal spacing inside each interval
    assert np.allclose(np.diff(path[:10]), 0.01)
    assert np.allclose(np.diff(path[10:20]), 0.09)
    assert np.allclose(np.diff(path[20:30]), 0.90)
    assert np.all(np.diff(path) > 0)


def test_path_search_reports_signal_and_nulls():
    X, y = _problem(300, 6, seed=7)
    entries = path_search(X, y, penalties=[0.01, 0.1, 1.0, 10.0],
                          n_folds=3, seed=0)
    assert [e.penalty for e in entries] == [0.01, 0.1, 1.0, 10.0]
    by_pen = {e.penalty: e for e in entries}
    assert by_pen[10.0].n_nonzero == 0
    assert by_pen[10.0].mean_cv_auroc == pytest.approx(0.5)
    assert by_pen[0.01].mean_cv_auroc > 0.7
    assert by_pen[0.01].n_nonzero >= by_pen[1.0].n_nonzero


def test_select_penalty_prefers_sparse_within_delta():
    entries = [
        PathEntry(0.01, 0.800, 0.01, 12),
        PathEntry(0.10, 0.798, 0.01, 5),
        PathEntry(1.00, 0.790, 0.01, 2),
        PathEntry(10.0, 0.500, 0.01, 0),
    ]
    assert select_penalty(entries, delta=0.005).penalty == 0.10
    assert select_penalty(entries, delta=0.02).penalty == 1.00
    assert select_penalty(entries, delta=0.5).penalty == 10.0


def test_select_penalty_tie_takes_larger_penalty():
    entries = [
        PathEntry(0.01, 0.80, 0.01, 3),
        PathEntry(0.02, 0.80, 0.01, 3),
    ]
    assert select_penalty(entries, delta=0.005).penalty == 0.02
    with pytest.raises(ValidationError):
        select_penalty([])


def test_trainer_closure_balances_per_fold():
    X, y = _problem(200, 5, seed=10)
    predict = make_l1_trainer(penalty=0.05)(X, y)
    p = predict(X)
    assert p.shape == (200,)
    assert 0.0 < p.min() and p.max() < 1.0


# ---------------------------------------------------------------------------
# Odds ratios


def test_odds_ratios_orientation(small_records):
    from noshow.dataset import BinSpec, default_bin_labels, encode

    # rebuild outcomes so female strongly raises no-show odds
    from noshow.dataset import RecordSet
    from conftest import make_record
    rng = np.random.default_rng(0)
    recs = []
    for i in range(600):
        gender = "female" if rng.random() < 0.5 else "male"
        rate = 0.6 if gender == "female" else 0.2
        recs.append(make_record(i, gender=gender,
                                outcome="no_show" if rng.random() < rate else "show"))
    rs = RecordSet(tuple(recs))
    bins = (BinSpec("age", (), default_bin_labels(())),
            BinSpec("lead_time", (), default_bin_labels(())))
    dm = encode(rs, bins, drop_reference=True)
    model = fit_l1_logistic(dm.X, dm.y, penalty=0.01)
    ors = odds_ratios(model, dm.schema)
    assert set(ors) == set(dm.schema.column_names)
    # female raises no-show odds, so her attendance OR sits below 1
    female_cols = [k for k in ors if k == "gender=female"]
    male_cols = [k for k in ors if k == "gender=male"]
    target = (female_cols + male_cols)[0]
    if target == "gender=female":
        assert ors[target] < 1.0
    else:
        assert ors[target] > 1.0
    # a zeroed coefficient reports an odds ratio of exactly 1
    zero_names = [n for n, b in zip(dm.schema.column_names, model.coefficients)
                  if b == 0.0]
    for n in zero_names:
        assert ors[n] == 1.0


def test_odds_ratios_width_check():
    model = L1Logistic(0.0, np.zeros(3), 0.1, 1, 0.0)
    from noshow.dataset import FeatureSchema, VariableBlock
    schema = FeatureSchema((VariableBlock("gender", ("female", "male")),))
    with pytest.raises(DimensionError):
        odds_ratios(model, schema)
