import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klsets import cf_engine as E
from klsets.constants import constants_table


def from_quotients(qs):
    x = Fraction(0)
    for a in reversed(qs):
        x = 1 / (a + x)
    return x


def check_convergents(x, cf, st_):
    qs = cf.quotients
    for n in range(1, len(st_.q) + 1):
        q, p = st_.q[n - 1], st_.p[n - 1]
        M = math.prod(qs[:n])
        Mp = math.prod(a + 1 for a in qs[:n])
        assert M <= q < Mp
        if n >= 2:
            assert M < q
        assert math.gcd(p, q) == 1
        if n < len(st_.q) - 1:
            assert abs(q * x - p) < Fraction(1, st_.q[n])
        elif n == len(st_.q) - 1 and cf.exact:
            # the final step of a rational is an equality
            assert abs(q * x - p) == Fraction(1, st_.q[n])
        elif n < len(st_.q):
            assert abs(q * x - p) < Fraction(1, st_.q[n])


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 10**40).flatmap(lambda q: st.tuples(st.integers(1, q - 1), st.just(q))))
def test_rational_round_trip_and_convergents(pq):
    p, q = pq
    x = Fraction(p, q)
    cf = E.expand_rational(p, q)
    assert cf.exact and cf.certified
    assert from_quotients(cf.quotients) == x
    st_ = E.statistics(cf)
    assert st_.q[-1] == x.denominator and st_.p[-1] == x.numerator
    check_convergents(x, cf, st_)


def test_thousand_random_rationals():
    rng = random.Random(1234)
    for _ in range(1000):
        q = rng.randrange(2, 10**30)
        p = rng.randrange(1, q)
        cf = E.expand_rational(p, q)
        x = Fraction(p, q)
        assert from_quotients(cf.quotients) == x
        check_convergents(x, cf, E.statistics(cf))


def test_expand_examples():
    assert E.expand_rational(16, 113).quotients == (7, 16)
    assert E.expand(Fraction(1, 2)).quotients == (2,)
    with pytest.raises(ValueError):
        E.expand_rational(3, 2)
    with pytest.raises(ValueError):
        E.ContinuedFraction((1, 0), exact=False, certified=True, source="bad")


def test_golden_and_silver():
    lo, hi = E.golden_interval()
    cf = E.expand_interval(lo, hi)
    assert len(cf) >= 60 and set(cf.quotients) == {1}
    st_ = E.statistics(cf)
    fib = [1, 1]
    while len(fib) < len(cf) + 2:
        fib.append(fib[-1] + fib[-2])
    assert list(st_.q) == fib[1 : len(cf) + 1]
    # silver ratio sqrt 2 - 1 = [2, 2, ...]
    s = 10**50
    r = math.isqrt(2 * s * s)
    cf2 = E.expand_interval(Fraction(r - s, s), Fraction(r + 1 - s, s))
    assert len(cf2) >= 50 and set(cf2.quotients) == {2}
    x = (Fraction(r - s, s) + Fraction(r + 1 - s, s)) / 2
    check_convergents(x, cf2, E.statistics(cf2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 1000), min_size=3, max_size=40), st.integers(1, 10**6))
def test_interval_certifies_prefix(qs, jitter):
    x = from_quotients(qs + [2])
    eps = Fraction(1, x.denominator**2 * (10**6 + jitter))
    cf = E.expand_interval(x - eps, x + eps)
    assert cf.certified and not cf.exact
    full = E.expand_rational(x.numerator, x.denominator).quotients
    assert cf.quotients == full[: len(cf)]


def test_interval_too_wide():
    with pytest.raises(E.CertificationError):
        E.expand_interval(Fraction(1, 3), Fraction(2, 3))


def test_pi_digits_match_mpmath(pi_digits_file):
    ref = E.read_digits_file(pi_digits_file)
    assert E.pi_digits(12000) == ref
    assert E.pi_digits(50, source="file", path=pi_digits_file) == ref[:50]
    with pytest.raises(ValueError):
        E.pi_digits(E.BUILTIN_PI_LIMIT + 1)


def test_pi_quotients_against_mpmath():
    cf = E.expand_digits(E.pi_digits(2000))
    assert cf.quotients[:4] == (7, 15, 1, 292)
    with mpmath.workdps(2100):
        x = mpmath.pi - 3
        out = []
        for _ in range(len(cf)):
            a = int(mpmath.floor(1 / x))
            out.append(a)
            x = 1 / x - a
    assert list(cf.quotients) == out[: len(cf)]


def test_pi_convergents():
    st_ = E.statistics(E.expand_digits(E.pi_digits(200)), 4)
    assert st_.q == (7, 106, 113, 33102)
    assert st_.p == (1, 15, 16, 4687)


def test_statistics_log_q_tracks_exact_past_cap():
    cf = E.expand_digits(E.pi_digits(3000))
    exact = E.statistics(cf)
    capped = E.statistics(cf, q_bit_cap=64)
    assert capped.exact_until < exact.exact_until
    for a, b in zip(exact.log_q, capped.log_q):
        assert b == pytest.approx(a, rel=1e-12)
    assert exact.log_q[-1] == pytest.approx(math.log(exact.q[-1]), rel=1e-15) if exact.q[-1].bit_length() < 1000 else True


def test_deviation_definition():
    st_ = E.statistics(E.expand_rational(16, 113))
    k = constants_table().kappa
    assert st_.deviation[1] == pytest.approx(abs(math.log(7 * 16) / 2 - k), rel=1e-15)
    assert st_.S(2, "Mprime") == pytest.approx(math.log(8 * 17), rel=1e-15)


def test_kl_membership():
    st_ = E.statistics(E.expand_rational(1, 300))
    per_n, first = E.kl_membership(st_, 2.0)
    assert first == 1 and per_n == [False]
    per_n, first = E.kl_membership(st_, 5.0)
    assert first is None
    with pytest.raises(ValueError):
        E.kl_membership(st_, 0.0)


def test_diophantine():
    st_ = E.statistics(E.expand_digits(E.pi_digits(100)))
    assert E.diophantine_witness(st_, E.DiophantineParams(1.0 / 15, 1.0), 4) == (False, 3)
    assert E.diophantine_witness(st_, E.DiophantineParams(1.0, 1.0), 4) == (False, 0)
    assert E.diophantine_witness(st_, E.DiophantineParams(1e-3, 2.0), 20) == (True, None)
    assert E.diophantine_convert(1.0) == pytest.approx(1 / 3)
    phi = math.log((1 + math.sqrt(5)) / 2)
    assert E.kl_to_diophantine_tau(T=1.0) == pytest.approx(1 + (constants_table().kappa + 1) / phi)
    assert E.kl_to_diophantine_tau(T_minus=0.5, T_plus=0.5) == pytest.approx(1 + 1 / phi)
    assert E.excluded_measure(E.DiophantineParams(0.1, 2.0)) == pytest.approx(0.2 * math.pi**2 / 6)
    with pytest.raises(ValueError):
        E.DiophantineParams(0.0, 2.0)
    with pytest.raises(ValueError):
        E.kl_to_diophantine_tau(T_minus=0.5)


def test_synth_example_and_non_kl():
    cf = E.synth_non_kl_diophantine(1.5, 1.0, 8)
    assert cf.quotients == (2, 16, 1, 2980, 1, 1, 1, 6713706352)
    big = E.synth_non_kl_diophantine(1.5, 1.0, 5000)
    st_ = E.statistics(big)
    # every spike j = 2^m pushes S_j / j above the KL ceiling for large j
    per_n, first = E.kl_membership(st_, 2.0)
    assert first is not None
    for d in (8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096):
        assert not per_n[d - 1]
    assert big.log_quotients  # the largest spikes are log-only
    assert st_.S(4096) / 4096 > constants_table().kappa + 2.0
    # ln a_d / ln q_{d-1} approaches 2^s - 1 ~ 1.83, so tau = 3 works once C is small
    assert E.diophantine_witness(st_, E.DiophantineParams(1e-2, 3.0)) == (True, None)
    assert E.diophantine_witness(st_, E.DiophantineParams(1e-2, 2.5))[0] is False


def test_json_round_trip():
    cf = E.synth_non_kl_diophantine(1.5, 1.0, 5000)
    again = E.ContinuedFraction.from_json(cf.to_json())
    assert again == cf


def test_golden_is_diophantine_on_grid():
    st_ = E.statistics(E.expand_interval(*E.golden_interval()))
    for C in (1.0, 0.5, 0.1, 1e-3):
        for tau in (1.0, 1.5, 2.0, 3.0):
            assert E.diophantine_witness(st_, E.DiophantineParams(C, tau)) == (True, None)


def test_iter_convergents():
    assert list(E.iter_convergents([7, 15, 1]))[-1] == (16, 113)
