import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings, strategies as st

from singpot.errors import DomainError
from singpot.lauricella import (
    BurchnallIndex,
    FAParams,
    burchnall_indices,
    fa_decomposed,
    fa_direct,
    fa_eval,
    fa_relation_residual,
    fa_scaled_limit,
    lemma2_check,
)
from singpot.specialfun import gamma, gauss_2f1, gauss_value_at_one


def brute_fa(p, y, depth=60):
    """Plain nested loops over the defining series."""
    total = 0.0
    for m in itertools.product(range(depth), repeat=p.n):
        if sum(m) >= depth:
            continue
        t = mp.rf(p.a, sum(m))
        for mk, bk, ck, yk in zip(m, p.b, p.c, y):
            t *= mp.rf(bk, mk) / mp.rf(ck, mk) * mp.mpf(yk) ** mk / mp.factorial(mk)
        total += t
    return float(total)


def euler_integral_oracle(a, b, c, y):
    """F_A^(2) as a one-dimensional Euler integral, mpmath quadrature."""
    b1, b2 = b
    c1, c2 = c
    y1, y2 = y
    f = lambda t: (t ** (b1 - 1) * (1 - t) ** (c1 - b1 - 1) * (1 - y1 * t) ** (-a)
                   * mp.hyp2f1(a, b2, c2, y2 / (1 - y1 * t)))
    pts = [0] + [mp.mpf(10) ** (-k) for k in range(12, 0, -1)] + [0.5, 1]
    return float(mp.quad(f, pts) * mp.gamma(c1) / (mp.gamma(b1) * mp.gamma(c1 - b1)))


def test_burchnall_index_n3():
    idx = BurchnallIndex(3, (1, 2, 3))  # m22, m23, m33
    assert idx.weight == 6
    assert idx.m(2, 3) == 2
    assert idx.A(1) == 3
    assert idx.A(2) == idx.A(3) == 6
    assert idx.B(1) == 3
    assert idx.B(2) == 1 + 3
    assert idx.B(3) == 2 + 3
    assert idx.mfact() == 12.0


def test_burchnall_enumeration_counts():
    assert len(list(burchnall_indices(2, 5))) == 1
    # three slots for n = 3
    assert len(list(burchnall_indices(3, 4))) == math.comb(4 + 2, 2)
    entries = [i.entries for i in burchnall_indices(3, 3)]
    assert entries == sorted(entries)


def test_fa_zero_arguments():
    p = FAParams(1.3, (0.5, 0.6), (1.7, 1.9))
    assert fa_direct(p, (0.0, 0.0)) == 1.0
    assert fa_decomposed(p, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_fa_reduces_to_2f1():
    p = FAParams(1.3, (0.5, 0.6), (1.7, 1.9))
    assert fa_direct(p, (0.3, 0.0)) == pytest.approx(gauss_2f1(1.3, 0.5, 1.7, 0.3), rel=1e-13)


def test_fa_direct_against_brute_force():
    p = FAParams(1.3, (0.5, 0.6), (1.7, 1.9))
    y = (0.2, -0.15)
    assert fa_direct(p, y) == pytest.approx(brute_fa(p, y), rel=1e-12)
    p3 = FAParams(0.8, (0.3, 0.6, 0.9), (1.2, 2.1, 1.6))
    y3 = (0.1, 0.12, -0.08)
    assert fa_direct(p3, y3) == pytest.approx(brute_fa(p3, y3, depth=30), rel=1e-12)


def test_fa_direct_against_appellf2():
    p = FAParams(1.3, (0.4, 0.7), (1.5, 1.9))
    for y in [(0.1, 0.2), (-0.3, 0.4), (0.45, -0.45)]:
        ref = float(mp.appellf2(p.a, p.b[0], p.b[1], p.c[0], p.c[1], *y))
        assert fa_direct(p, y) == pytest.approx(ref, rel=1e-12)


def test_fa_direct_domain():
    p = FAParams(1.3, (0.4, 0.7), (1.5, 1.9))
    with pytest.raises(DomainError):
        fa_direct(p, (0.6, 0.5))


def test_direct_equals_decomposed_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 4))
        a = rng.uniform(0.5, 3)
        b = rng.uniform(0.2, 1, n)
        c = rng.uniform(1.1, 3, n)
        y = rng.uniform(-1, 1, n)
        y *= rng.uniform(0, 0.4) / np.abs(y).sum()
        p = FAParams(a, b, c)
        assert fa_decomposed(p, y) == pytest.approx(fa_direct(p, y), rel=1e-9)


@pytest.mark.parametrize("y", [(-0.3, -2.0), (-5.0, -7.0), (-100.0, -30.0), (-3.0, -1e6)])
def test_decomposed_large_negative(y):
    a, b, c = 1.3, (0.4, 0.7), (1.5, 1.9)
    ref = euler_integral_oracle(a, b, c, y)
    assert fa_decomposed(FAParams(a, b, c), y) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("y", [(-5.0, -7.0), (-1e4, -3e3), (-1e8, -2e7), (-0.1, -0.2)])
def test_fa_eval_both_paths(y):
    a, b, c = 1.3, (0.4, 0.7), (1.5, 1.9)
    ref = euler_integral_oracle(a, b, c, y)
    assert fa_eval(a, b, c, np.array([y]))[0] == pytest.approx(ref, rel=1e-12)


def reduced_oracle(a, b, c, y, j):
    """Integrate out variable j (scipy adaptive quadrature with algebraic
    endpoint weights); the n-1 inner function comes from fa_eval."""
    rest = [k for k in range(len(b)) if k != j]
    br, cr = [b[k] for k in rest], [c[k] for k in rest]

    def g(t):
        s = 1 - y[j] * t
        return s ** (-a) * fa_eval(a, br, cr, np.array([[y[k] / s for k in rest]]))[0]

    tau = min(0.5, 1 / abs(y[j]))
    bj, cj = b[j], c[j]
    opts = dict(epsabs=0, epsrel=1e-13, limit=200)
    i1 = integrate.quad(lambda t: g(t) * (1 - t) ** (cj - bj - 1), 0, tau,
                        weight="alg", wvar=(bj - 1, 0), **opts)[0]
    i2 = integrate.quad(lambda t: g(t) * t ** (bj - 1), tau, 1,
                        weight="alg", wvar=(0, cj - bj - 1), **opts)[0]
    return (i1 + i2) * gamma(cj) / (gamma(bj) * gamma(cj - bj))


def test_fa_eval_n3_against_decomposed():
    a, b, c = 2.2, (0.3, 0.4, 0.35), (0.6, 0.8, 0.7)
    # the second point is past the series switch, so fa_eval integrates
    pts = np.array([[-0.2, -0.3, -0.1], [-3.0, -2.5, -0.3]])
    got = fa_eval(a, b, c, pts)
    for i, y in enumerate(pts):
        assert got[i] == pytest.approx(fa_decomposed(FAParams(a, b, c), y), rel=1e-10)


@pytest.mark.parametrize("y", [(-3.0, -40.0, -2.0), (-500.0, -800.0, -100.0)])
def test_fa_eval_n3_other_reduction(y):
    # fa_eval integrates out the largest argument, the oracle the smallest
    a, b, c = 2.2, (0.3, 0.4, 0.35), (0.6, 0.8, 0.7)
    ref = reduced_oracle(a, b, c, y, int(np.argmin(np.abs(y))))
    assert fa_eval(a, b, c, np.array([y]))[0] == pytest.approx(ref, rel=1e-11)


def test_fa_eval_rejects_positive():
    with pytest.raises(DomainError):
        fa_eval(1.0, (0.5, 0.5), (1.5, 1.5), np.array([[0.1, -0.2]]))


def test_monotone_in_positive_arguments():
    p = FAParams(1.1, (0.5, 0.8), (1.4, 2.0))
    vals = [fa_direct(p, (t, 0.1)) for t in np.linspace(0, 0.8, 9)]
    assert np.all(np.diff(vals) >= 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.45), st.floats(0.0, 0.45))
def test_monotone_property(y1, y2):
    p = FAParams(0.9, (0.4, 0.7), (1.3, 1.8))
    base = fa_direct(p, (y1, y2))
    assert fa_direct(p, (y1 + 0.05, y2)) >= base


def test_relation_examples():
    p = FAParams(1.3, (0.5, 0.6), (1.7, 1.9))
    assert fa_relation_residual("contiguous_a", p, (0.0, 0.0), 1) == 0.0
    assert fa_relation_residual("derivative_k", p, (0.15, 0.1), 1) <= 1e-6
    assert fa_relation_residual("contiguous_c_k", p, (0.2, 0.2), 2) <= 1e-9


@pytest.mark.parametrize("kind,tol", [("derivative_k", 1e-6), ("contiguous_a", 1e-9),
                                      ("contiguous_c_k", 1e-9)])
def test_relations_random(kind, tol):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(100):
        n = int(rng.integers(2, 4))
        p = FAParams(rng.uniform(0.5, 3), rng.uniform(0.2, 1, n), rng.uniform(1.1, 3, n))
        y = rng.uniform(-1, 1, n)
        y *= rng.uniform(0, 0.6) / np.abs(y).sum()
        assert fa_relation_residual(kind, p, y, int(rng.integers(1, n + 1))) <= tol


def test_relation_unknown_kind():
    with pytest.raises(DomainError):
        fa_relation_residual("nope", FAParams(1.0, (0.5,), (1.5,)), (0.1,), 1)


def test_summation_identity_trivial():
    lhs, rhs = lemma2_check(2, 2.7, (0.0, 0.0))
    assert lhs == pytest.approx(gamma(2.7) ** 2, rel=1e-14)
    assert rhs == pytest.approx(gamma(2.7) ** 2, rel=1e-14)


def test_summation_identity_examples():
    lhs, rhs = lemma2_check(2, 3.0, (0.5, 0.5))
    assert abs(lhs - rhs) / rhs <= 1e-7
    lhs, rhs = lemma2_check(3, 4.0, (0.5, 0.6, 0.7))
    assert abs(lhs - rhs) / rhs <= 1e-6


def test_summation_identity_n2_partial_sums_by_levels():
    # the first levels of the multi-sum, summed plainly, approach the lhs
    a, b = 3.0, (0.5, 0.5)
    terms = [gamma(a - 0.5) ** 2 * mp.rf(0.5, m) ** 2 / (mp.factorial(m) * mp.rf(a, m))
             for m in range(4000)]
    lhs, _ = lemma2_check(2, a, b)
    assert float(sum(terms)) == pytest.approx(lhs, rel=1e-6)


def test_summation_identity_domain():
    with pytest.raises(DomainError):
        lemma2_check(2, 1.0, (0.6, 0.6))


def test_scaled_limit_trivial():
    p = FAParams(3.0, (0.5, 0.5), (1.5, 1.6))
    assert fa_scaled_limit(p, (1.0, 1.0)) == pytest.approx(1.0, abs=1e-15)


def test_scaled_limit_richardson():
    p = FAParams(3.0, (0.5, 0.5), (1.5, 1.6))
    limit = gamma(2.0) / gamma(3.0) * gamma(1.5) * gamma(1.6) / (gamma(1.0) * gamma(1.1))
    seq = [fa_scaled_limit(p, (2.0 ** -j, 2.0 ** -j), method="decomposed") for j in range(4, 11)]
    extrapolated = 2 * seq[-1] - seq[-2]
    assert extrapolated == pytest.approx(limit, rel=1e-4)


def test_scaled_limit_paths_agree():
    p = FAParams(3.0, (0.5, 0.5), (1.5, 1.6))
    y = (2.0 ** -9, 2.0 ** -8)
    assert fa_scaled_limit(p, y, method="integral") == pytest.approx(
        fa_scaled_limit(p, y, method="decomposed"), rel=1e-11)


def test_scaled_limit_n1():
    p = FAParams(3.0, (0.5,), (1.5,))
    ref = gauss_value_at_one(1.5 - 3.0, 0.5, 1.5)
    assert fa_scaled_limit(p, (1e-6,)) == pytest.approx(ref, rel=1e-5)
