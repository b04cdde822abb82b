import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klsets import bounds as B
from klsets.cli import TABLE_EST, TABLE_T
from klsets.constants import constants_table

VARIANTS = ("M", "Mprime")


def brute_sum(alpha, N, terms):
    n = np.arange(N, N + terms, dtype=float)
    return math.fsum(np.exp(-alpha * np.sqrt(n)))


def test_xi_examples():
    assert B.xi(2.0, "M") == pytest.approx(0.9998528, abs=1e-6)
    assert B.xi(2.0, "Mprime") == pytest.approx(0.9996872545, abs=1e-9)
    assert abs(B.xi(2.0, "Mprime") - 0.9997597) < 1e-4
    assert B.xi(1e-8, "M") > 1 - 1e-15
    with pytest.raises(ValueError):
        B.xi(0.0)


def test_xi_direct_substitution():
    t = constants_table()
    r, lam = t.r_bar, t.lambda_bar
    T = 2.0
    expected = math.exp(-T * T / (2 * (128 * r * r * lam + (16 * r * lam) ** (1 / 3) * T) ** 1.5))
    assert B.xi(T) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
def test_xi_strictly_decreasing(variant):
    grid = np.linspace(0.1, 10.0, 100)
    vals = [B.xi(T, variant) for T in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_cumulant_examples():
    base = B.cumulant_bound(2, 1)
    assert base == pytest.approx(6.3317, abs=1e-4)
    assert math.exp(base) == pytest.approx(562.10, abs=0.05)
    assert B.cumulant_bound(2, 10) == pytest.approx(base + math.log(10), rel=1e-15)
    t = constants_table()
    assert B.cumulant_bound(3, 1) == pytest.approx(base + math.log(9) + math.log(16 * t.r_bar * t.lambda_bar), rel=1e-14)
    with pytest.raises(ValueError):
        B.cumulant_bound(1, 1)


@given(st.integers(2, 40), st.integers(1, 10**6), st.sampled_from(VARIANTS))
def test_cumulant_monotone(k, n, v):
    c = B.cumulant_bound(k, n, v)
    assert B.cumulant_bound(k + 1, n, v) >= c
    assert B.cumulant_bound(k, n + 1, v) >= c


def test_tail_examples():
    assert B.tail_bound(100, 100.0) == pytest.approx(0.999628, abs=1e-5)
    assert B.tail_bound(100, 100.0) == pytest.approx(B.xi(1.0) ** 10, rel=1e-12)
    assert B.tail_bound(1, 1e12) < 1e-100


@given(st.integers(1, 10**6), st.floats(1e-3, 50.0), st.sampled_from(VARIANTS))
def test_tail_identity(n, T, v):
    assert B.tail_bound(n, n * T, v) == pytest.approx(B.xi(T, v) ** math.sqrt(n), rel=1e-12)


@given(st.integers(1, 10**12), st.floats(1e-3, 50.0), st.sampled_from(VARIANTS))
def test_tail_identity_log_domain(n, T, v):
    expected = math.exp(math.sqrt(n) * B.log_xi(T, v))
    assert B.tail_bound(n, n * T, v) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_sum_lemma_examples():
    e = math.exp
    closed = e(-2) / (1 - e(-1)) * (5 + 4 * e(-1) / (1 - e(-1)))
    assert B.exp_sqrt_sum_bound(1.0, 4) == pytest.approx(closed, rel=1e-14)
    assert B.exp_sqrt_sum_bound(1.0, 4) == pytest.approx(1.5690, abs=2e-4)
    k3 = e(-3) / (1 - e(-1)) * (7 + 4 * e(-1) / (1 - e(-1)))
    finite = sum(e(-math.sqrt(n)) for n in range(5, 9))
    assert B.exp_sqrt_sum_bound(1.0, 5) == pytest.approx(k3 + finite, rel=1e-14)
    partial, _ = B.exp_sqrt_sum_oracle(1.0, 4, 6)
    assert partial == pytest.approx(sum(e(-math.sqrt(n)) for n in range(4, 10)), rel=1e-15)
    assert partial == pytest.approx(0.50847, abs=1e-4)
    partial, cap = B.exp_sqrt_sum_oracle(10.0, 4, 100)
    # dominated by the first term; e^{-10 sqrt 5} adds about 11%
    assert partial == pytest.approx(sum(e(-10 * math.sqrt(n)) for n in range(4, 104)), rel=1e-14)
    assert e(-20) < partial < 1.15 * e(-20)
    assert cap < 1e-30
    with pytest.raises(ValueError):
        B.exp_sqrt_sum_oracle(1.0, 4, 0)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("N", [2, 4, 5, 9, 10, 100, 101])
def test_sum_lemma_dominates_oracle(alpha, N):
    bound = B.exp_sqrt_sum_bound(alpha, N)
    partial, cap = B.exp_sqrt_sum_oracle(alpha, N, 10**6)
    assert partial == pytest.approx(brute_sum(alpha, N, 10**6), rel=1e-13)
    assert bound >= partial
    assert bound - (partial + cap) >= -1e-12


def test_bound_examples():
    K = math.isqrt(B.min_n_for_estimate(2.0, 0.01, "M"))
    assert B.kl_measure_lower_bound(B.KLQuery("M", 2.0, K * K)).lower_bound >= 0.01
    assert abs(K * K / 146000**2 - 1) < 0.05
    r = B.kl_measure_lower_bound(B.KLQuery("M", 2.0, 4))
    assert r.lower_bound == 0.0 and r.vacuous
    N = B.min_n_for_estimate(2.0, 0.99, "Mprime")
    assert abs(N / 6.084e9 - 1) < 0.05
    assert B.kl_measure_lower_bound(B.KLQuery("Mprime", 2.0, N)).lower_bound >= 0.99


def test_query_validation_and_flags():
    for bad in [("X", 1.0, 4), ("M", 0.0, 4), ("M", 1.0, 0), ("M", 1.0, 2.5), ("M", 1.0, 4, "sideways")]:
        with pytest.raises(ValueError):
            B.KLQuery(*bad)
    assert B.KLQuery("Mprime", 1.0, 4, "lower").flags()
    assert not B.KLQuery("Mprime", 0.5, 4, "lower").flags()
    assert B.KLQuery("M", 1.0, 4, "both").flags()
    assert not B.KLQuery("M", 5.0, 4, "upper").flags()


def test_both_side_is_union_bound():
    up = B.kl_measure_lower_bound(B.KLQuery("M", 1.0, 10**12))
    both = B.kl_measure_lower_bound(B.KLQuery("M", 1.0, 10**12, "both"))
    assert both.complement == pytest.approx(2 * up.complement, rel=1e-15)


def test_non_square_n_adds_finite_sum():
    lq = B.log_xi(1.0)
    K = 1000
    r = B.kl_measure_lower_bound(B.KLQuery("M", 1.0, K * K - 5))
    assert r.K == K
    assert r.finite_sum == pytest.approx(math.fsum(math.exp(lq * math.sqrt(n)) for n in range(K * K - 5, K * K)), rel=1e-13)


@settings(deadline=None, max_examples=60)
@given(st.floats(0.05, 20.0), st.integers(1, 10**16), st.sampled_from(VARIANTS), st.sampled_from(B.SIDES))
def test_bound_in_unit_interval(T, N, v, side):
    r = B.kl_measure_lower_bound(B.KLQuery(v, T, N, side))
    assert 0.0 <= r.lower_bound <= 1.0


@settings(deadline=None, max_examples=40)
@given(st.floats(0.05, 20.0), st.sampled_from(VARIANTS))
def test_bound_monotone_above_threshold(T, v):
    lq = B.log_xi(T, v)
    k0 = B.monotone_threshold(lq)
    ks = [k0 + j * max(1, k0 // 7) for j in range(60)]
    vals = [B._square_bound(lq, K, "upper") for K in ks]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("T", TABLE_T)
@pytest.mark.parametrize("est", TABLE_EST)
def test_min_n_minimal(variant, T, est):
    N = B.min_n_for_estimate(T, est, variant)
    K = math.isqrt(N)
    assert K * K == N
    lq = B.log_xi(T, variant)
    assert B._square_bound(lq, K, "upper") >= est
    assert B._square_bound(lq, K - 1, "upper") < est
    assert B.kl_measure_lower_bound(B.KLQuery(variant, T, N)).lower_bound >= est


def test_min_n_examples():
    assert abs(B.min_n_for_estimate(2.0, 0.01, "M") / 2.074e10 - 1) < 0.05
    assert abs(B.min_n_for_estimate(0.1, 0.999, "Mprime") / 2.394e15 - 1) < 0.05
    with pytest.raises(ValueError):
        B.min_n_for_estimate(2.0, 1.0)
    with pytest.raises(ValueError):
        B.min_n_for_estimate(2.0, 0.5, side="nope")


def test_min_n_both_side_larger():
    assert B.min_n_for_estimate(1.0, 0.9, "M", "both") >= B.min_n_for_estimate(1.0, 0.9, "M", "upper")


def test_min_t_inverts_bound():
    N = 438_000_001
    T = B.min_t_for_estimate(N, 0.999)
    assert B.kl_measure_lower_bound(B.KLQuery("M", T, N)).lower_bound >= 0.999
    assert B.kl_measure_lower_bound(B.KLQuery("M", T * (1 - 1e-6), N)).lower_bound < 0.999
