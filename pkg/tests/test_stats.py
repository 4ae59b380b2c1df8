import statistics
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from statsmodels.formula.api import ols
from statsmodels.stats.anova import anova_lm

from classroom_speech.errors import DegenerateWarning, MetricError
from classroom_speech.reliability import ConfusionMatrix, cohens_kappa
from classroom_speech.stats import binary_kappa, icc_absolute, icc_table, pearson_r


def anova_icc(m):
    """ICC(A,1) from two-way ANOVA sums of squares, computed element by element."""
    m = np.asarray(m, dtype=float)
    n, k = m.shape
    grand = m.sum() / (n * k)
    ss_rows = sum(k * (m[i].mean() - grand) ** 2 for i in range(n))
    ss_cols = sum(n * (m[:, j].mean() - grand) ** 2 for j in range(k))
    ss_total = sum((m[i, j] - grand) ** 2 for i in range(n) for j in range(k))
    ss_err = ss_total - ss_rows - ss_cols
    msr, msc, mse = ss_rows / (n - 1), ss_cols / (k - 1), ss_err / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)


def statsmodels_icc(m):
    m = np.asarray(m, dtype=float)
    n, k = m.shape
    df = pd.DataFrame(
        {"y": m.ravel(), "file": np.repeat(np.arange(n), k).astype(str), "method": np.tile(np.arange(k), n).astype(str)}
    )
    table = anova_lm(ols("y ~ C(file) + C(method)", df).fit())
    ms = table["sum_sq"] / table["df"]
    msr, msc, mse = ms["C(file)"], ms["C(method)"], ms["Residual"]
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)


# -- Pearson ---------------------------------------------------------------------


def test_pearson_examples():
    assert pearson_r([1, 2, 3], [3, 5, 7]) == pytest.approx(1.0)
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    # covariance 2.0 over sqrt(1.25 * 2.3125) per point
    assert pearson_r([1, 2, 3, 4], [1, 3, 2, 5]) == pytest.approx(0.8315218406202999, abs=1e-12)


def test_pearson_edge_cases():
    assert pearson_r([1, 1, 1], [1, 2, 3]) is None
    with pytest.raises(MetricError):
        pearson_r([1, 2], [1, 2])


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3, max_size=30))
def test_pearson_matches_statistics_module(pairs):
    x, y = zip(*pairs)
    r = pearson_r(x, y)
    if len(set(x)) == 1 or len(set(y)) == 1:
        assert r is None
    else:
        assert r == pytest.approx(statistics.correlation(x, y), abs=1e-12)


# -- binary kappa ----------------------------------------------------------------


def table_pairs(tt, tf, ft, ff):
    return [(True, True)] * tt + [(True, False)] * tf + [(False, True)] * ft + [(False, False)] * ff


def test_binary_kappa_examples():
    assert binary_kappa(table_pairs(45, 5, 5, 45)) == pytest.approx(0.8)
    assert binary_kappa(table_pairs(3, 0, 0, 4)) == 1.0
    with pytest.warns(DegenerateWarning):
        binary_kappa(table_pairs(3, 4, 0, 0))


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 40))
def test_binary_kappa_agrees_with_confusion_kappa(tt, tf, ft, ff):
    if tt + tf + ft + ff == 0:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        a = binary_kappa(table_pairs(tt, tf, ft, ff))
        b = cohens_kappa(ConfusionMatrix(((tt, tf), (ft, ff))))
    assert a == pytest.approx(b, abs=1e-12)


# -- ICC ----------------------------------------------------------------------------


def test_icc_hand_example():
    m = [[1, 1.1], [2, 2.1], [3, 2.9]]
    assert icc_absolute(m) == pytest.approx(0.9944751381215471, abs=1e-12)
    assert icc_absolute(m) == pytest.approx(statsmodels_icc(m), abs=1e-9)


def test_icc_matches_anova_on_random_matrices():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = rng.normal(size=(5, 1)) + rng.normal(scale=0.4, size=(5, 2)) + rng.normal(size=(1, 2))
        assert icc_absolute(m) == pytest.approx(anova_icc(m), abs=1e-9)
        assert icc_absolute(m) == pytest.approx(statsmodels_icc(m), abs=1e-9)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=12, unique=True))
def test_identical_methods_give_exactly_one(col):
    assert icc_absolute([[v, v] for v in col]) == 1.0


def test_constant_matrix_is_flagged():
    with pytest.warns(DegenerateWarning):
        assert icc_absolute([[2, 2]] * 4) == 1.0


def test_icc_below_one_when_methods_disagree_in_scale():
    assert icc_absolute([[v, 2 * v] for v in (1.0, 2.0, 3.0, 4.0)]) < 1.0


@given(st.floats(-100, 100), st.floats(0.1, 10))
def test_icc_invariant_to_shared_affine_maps(shift, scale):
    m = np.array([[1, 1.2], [2, 2.3], [3, 2.7], [5, 5.4]])
    assert icc_absolute(m * scale + shift) == pytest.approx(icc_absolute(m), abs=1e-9)


def test_icc_input_errors():
    with pytest.raises(MetricError, match=r"\(1, 0\)"):
        icc_absolute([[1, 2], [None, 3], [4, 5]])
    with pytest.raises(MetricError):
        icc_absolute([[1, 2], [3, 4]])


# -- ICC table ----------------------------------------------------------------------


def per_file_rows(values):
    """values[file] = (transcriber_mlu, expert_mlu) for both roles."""
    out = {}
    for name, (a, b) in values.items():
        out[name] = {
            method: {
                role: {"mlu": v, "questions_per_min": 1.0 + v, "non_questions_per_min": v, "prop_questions_responded": None,
                       "prop_non_questions_responded": v / 10}
                for role in ("Child", "Teacher")
            }
            for method, v in (("transcriber", a), ("expert", b))
        }
    return out


def test_icc_table_cells():
    rows, used = icc_table(per_file_rows({"a": (1, 1), "b": (2, 2), "c": (4, 4)}))
    assert [r["role"] for r in rows] == ["Child", "Teacher"]
    assert rows[0]["mlu"] == 1.0 and rows[1]["non_questions_per_min"] == 1.0
    assert rows[0]["prop_responses_to_questions"] is None
    assert used["Child.mlu"] == 3 and used["Child.prop_responses_to_questions"] == 0


def test_icc_table_matches_oracle_with_noise():
    rng = np.random.default_rng(9)
    truth = rng.uniform(1, 5, 8)
    values = {f"f{i}": (t + rng.normal(0, 0.3), t) for i, t in enumerate(truth)}
    rows, _ = icc_table(per_file_rows(values))
    m = [values[k] for k in sorted(values)]
    assert rows[0]["mlu"] == pytest.approx(anova_icc(m), abs=1e-9)


def test_icc_table_needs_three_files():
    with pytest.raises(MetricError):
        icc_table(per_file_rows({"a": (1, 1), "b": (2, 2)}))
