import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from l0robust.trunc_stats import (
    as_real_vec,
    tmean_k,
    trunc_inner_product,
    trunc_inner_product_rows,
    truncation_order,
    tsum_k,
    tsum_rows,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def vec_and_k(draw, max_d=30):
    d = draw(st.integers(1, max_d))
    x = draw(hnp.arrays(np.float64, d, elements=finite))
    k = draw(st.integers(0, (d - 1) // 2))
    return x, k


# worked examples

def test_tsum_example():
    assert tsum_k([1, 1, 2, 3, 4, 5], 1) == 10.0


def test_tsum_hand_sorted_example():
    assert tsum_k([-7, 0, 1, 2, 3, 9, 100], 2) == 6.0


def test_tsum_k0_is_sum():
    x = [0.5, -2.0, 3.25]
    assert tsum_k(x, 0) == sum(x)


def test_tmean_examples():
    assert tmean_k([1, 1, 2, 3, 4, 5], 1) == 2.5
    assert tmean_k([2.0, 4.0, 9.0], 0) == 5.0
    assert tmean_k([3.7] * 4, 1) == pytest.approx(3.7, abs=1e-15)


def test_inner_product_examples():
    assert trunc_inner_product(np.ones(5), [5, -1, 2, 0, 3], 1) == 5.0
    assert trunc_inner_product(np.ones(6), np.ones(6), 2) == 2.0
    w, x = np.array([1.0, -2.0, 0.5]), np.array([3.0, 1.0, 4.0])
    assert trunc_inner_product(w, x, 0) == pytest.approx(float(w @ x))


@pytest.mark.parametrize("x,k", [([1, 2], 1), ([1, 2, 3], 2), ([1.0], 1)])
def test_rejects_empty_truncation(x, k):
    with pytest.raises(ValueError, match="2k < d"):
        tsum_k(x, k)


@pytest.mark.parametrize("bad", [[1.0, np.nan, 2.0], [np.inf, 1.0, 0.0], []])
def test_rejects_nonfinite_or_empty(bad):
    with pytest.raises(ValueError):
        tsum_k(bad, 0)


def test_rejects_negative_or_fractional_k():
    with pytest.raises(ValueError):
        tsum_k([1, 2, 3], -1)
    with pytest.raises(ValueError):
        tsum_k([1, 2, 3], 0.5)


def test_rejects_2d():
    with pytest.raises(ValueError, match="one-dimensional"):
        as_real_vec(np.ones((2, 2)))


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        trunc_inner_product([1, 2, 3], [1, 2], 0)


def test_truncation_order_stable_ties():
    bottom, kept, top = truncation_order([1.0, 1.0, 1.0, 1.0, 1.0], 1)
    assert bottom.tolist() == [0]
    assert kept.tolist() == [1, 2, 3]
    assert top.tolist() == [4]


# properties

@given(vec_and_k(), st.randoms())
def test_permutation_invariance(xk, rnd):
    x, k = xk
    perm = list(range(x.size))
    rnd.shuffle(perm)
    assert tsum_k(x[perm], k) == tsum_k(x, k)


@given(vec_and_k(), st.data())
def test_monotone_in_each_coordinate(xk, data):
    x, k = xk
    i = data.draw(st.integers(0, x.size - 1))
    bump = data.draw(st.floats(0, 1e6))
    y = x.copy()
    y[i] += bump
    assert tsum_k(y, k) >= tsum_k(x, k)


@given(vec_and_k())
def test_bounded_sample_drift(xk):
    x, k = xk
    M = Fraction(float(np.max(np.abs(x))))
    t, s = tsum_k(x, k), math.fsum(x)
    # both sums are correctly rounded, so allow half an ulp each; the rest is exact
    slack = Fraction(float(np.spacing(abs(t)))) / 2 + Fraction(float(np.spacing(abs(s)))) / 2
    assert abs(Fraction(t) - Fraction(s)) <= 2 * k * M + slack


@st.composite
def perturbed(draw, max_d=30):
    x, k = draw(vec_and_k(max_d))
    d = x.size
    m = draw(st.integers(0, k))
    idx = draw(st.lists(st.integers(0, d - 1), min_size=m, max_size=m, unique=True))
    vals = draw(st.lists(st.one_of(finite, st.sampled_from([-1e9, 1e9])), min_size=m, max_size=m))
    xp = x.copy()
    xp[idx] = vals
    return x, xp, k


@given(perturbed())
def test_six_k_m_stability(case):
    x, xp, k = case
    M = float(np.max(np.abs(x)))
    Mp = float(np.max(np.abs(xp)))
    gap = abs(tsum_k(x, k) - tsum_k(xp, k))
    assert gap <= 6 * k * M
    assert gap <= 6 * k * min(M, Mp)


@given(perturbed(), st.data())
def test_inner_product_perturbation_stability(case, data):
    x, xp, k = case
    w = data.draw(hnp.arrays(np.float64, x.size, elements=st.floats(-1e3, 1e3)))
    z = w * x
    lhs = abs(trunc_inner_product(w, xp, k) - math.fsum(z))
    assert lhs <= 8 * k * float(np.max(np.abs(z)))


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(3, 80), st.data())
def test_rows_match_reference(n, d, data):
    k = data.draw(st.integers(0, (d - 1) // 2))
    Z = data.draw(hnp.arrays(np.float64, (n, d), elements=finite))
    got = tsum_rows(Z, k)
    ref = np.array([tsum_k(r, k) for r in Z])
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-6)


def test_inner_product_rows():
    gen = np.random.default_rng(1)
    w = gen.normal(size=9)
    X = gen.normal(size=(5, 9))
    ref = [trunc_inner_product(w, x, 2) for x in X]
    assert np.allclose(trunc_inner_product_rows(w, X, 2), ref, rtol=1e-13)


def test_rows_reject_wide_truncation():
    with pytest.raises(ValueError):
        tsum_rows(np.zeros((2, 4)), 2)
