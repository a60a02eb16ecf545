import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from clvr.stats import betainc, paired_t_test, student_t_cdf


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 500), st.floats(0.05, 500), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@pytest.mark.parametrize("df", [1, 2, 5, 30, 99, 1000])
@pytest.mark.parametrize("t", [-40.0, -3.2, -0.5, 0.0, 0.7, 2.5, 12.0])
def test_t_cdf_matches_scipy(t, df):
    assert student_t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), rel=1e-8, abs=1e-300)


def test_betainc_domain():
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0


@pytest.mark.parametrize("alternative", ["less", "greater"])
def test_paired_matches_scipy(alternative):
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = rng.normal(rng.normal(0, 0.3), 1.0, rng.integers(2, 120))
        ref = stats.ttest_1samp(d, 0.0, alternative=alternative).pvalue
        assert paired_t_test(list(d), alternative) == pytest.approx(ref, rel=1e-8, abs=1e-15)


def test_strong_negative_shift():
    d = np.random.default_rng(0).normal(-1.0, 0.1, 100)
    assert paired_t_test(list(d), "less") < 1e-10


def test_symmetric_differences_near_half():
    rng = np.random.default_rng(8)
    ps = [paired_t_test(list(rng.normal(0, 1, 400)), "less") for _ in range(200)]
    assert np.mean(ps) == pytest.approx(0.5, abs=0.1)


def test_degenerate_variance():
    assert paired_t_test([-1.0, -1.0, -1.0], "less") == 0.0
    assert paired_t_test([-1.0, -1.0, -1.0], "greater") == 1.0
    assert paired_t_test([0.0, 0.0], "less") == 1.0


def test_input_validation():
    with pytest.raises(ValueError):
        paired_t_test([1.0])
    with pytest.raises(ValueError):
        paired_t_test([1.0, 2.0], "two-sided")
