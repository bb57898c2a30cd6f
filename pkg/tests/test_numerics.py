import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfqkd.numerics import (
    DomainError,
    ErrorTriple,
    bessel_i0,
    binary_entropy,
    binomial,
    conditional_entropy,
)

mpmath.mp.dps = 40


def mp_h(x):
    x = mpmath.mpf(x)
    return -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)


def mp_conditional(e_b, e_p, a):
    e_b, e_p, a = (mpmath.mpf(v) for v in (e_b, e_p, a))
    terms = [
        (1 + a - e_b - e_p, 1 - e_b),
        (e_p - a, 1 - e_b),
        (e_b - a, e_b),
        (a, e_b),
    ]
    return sum(-p * mpmath.log(p / q, 2) for p, q in terms if p > 0)


def mp_i0_series(x):
    x = mpmath.mpf(x)
    total, k = mpmath.mpf(0), 0
    while True:
        term = (x / 2) ** (2 * k) / mpmath.factorial(k) ** 2
        total += term
        if term < total * mpmath.mpf(10) ** -35:
            return total
        k += 1


def pascal(n, k):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row[k]


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0)])
def test_binary_entropy_trivial(x, expected):
    assert binary_entropy(x) == expected


def test_binary_entropy_oracle():
    assert binary_entropy(0.11) == pytest.approx(0.49992, abs=1e-5)
    assert binary_entropy(0.11) == pytest.approx(float(mp_h(0.11)), rel=1e-14)


@pytest.mark.parametrize("x", [-0.1, 1.1, math.nan])
def test_binary_entropy_domain(x):
    with pytest.raises(DomainError):
        binary_entropy(x)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_symmetric(x):
    assert abs(binary_entropy(x) - binary_entropy(1.0 - x)) <= 1e-14


def test_conditional_entropy_independent():
    assert conditional_entropy(ErrorTriple(0.1, 0.1, 0.01)) == pytest.approx(
        binary_entropy(0.1), abs=1e-12
    )


def test_conditional_entropy_correlated():
    assert conditional_entropy(ErrorTriple(0.1, 0.1, 0.1)) == 0.0


def test_conditional_entropy_oracle():
    got = conditional_entropy(ErrorTriple(0.2, 0.15, 0.05))
    assert got == pytest.approx(float(mp_conditional(0.2, 0.15, 0.05)), rel=1e-13)


def test_conditional_entropy_boundaries():
    assert conditional_entropy(ErrorTriple(0.0, 0.0, 0.0)) == 0.0
    assert conditional_entropy(ErrorTriple(0.0, 0.3, 0.0)) == pytest.approx(binary_entropy(0.3))
    # e_b = 1 forces a = e_p
    assert conditional_entropy(ErrorTriple(1.0, 0.3, 0.3)) == pytest.approx(binary_entropy(0.3))


@pytest.mark.parametrize(
    "e_b, e_p, a",
    [(0.1, 0.1, 0.2), (0.7, 0.7, 0.1), (0.1, 1.2, 0.0), (0.1, 0.1, -0.01)],
)
def test_error_triple_invalid(e_b, e_p, a):
    with pytest.raises(DomainError):
        ErrorTriple(e_b, e_p, a)


def test_error_triple_roundoff_absorbed():
    t = ErrorTriple(0.1, 0.1, 0.1 + 1e-14)
    assert t.a == 0.1
    assert sum(t.bell_weights) == pytest.approx(1.0, abs=1e-15)


@st.composite
def triples(draw):
    w = [draw(st.floats(0.0, 1.0)) for _ in range(4)]
    s = sum(w)
    if s == 0:
        w, s = [1.0, 0.0, 0.0, 0.0], 1.0
    l1, l2, l3, l4 = (v / s for v in w)
    return ErrorTriple(e_b=l3 + l4, e_p=l2 + l4, a=l4)


@settings(max_examples=300)
@given(triples())
def test_conditioning_never_increases_entropy(t):
    assert conditional_entropy(t) <= binary_entropy(t.e_p) + 1e-12


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_conditional_entropy_independence_property(e_b, e_p):
    t = ErrorTriple(e_b, e_p, e_b * e_p)
    assert abs(conditional_entropy(t) - binary_entropy(e_p)) <= 1e-12


def test_bessel_values():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(1.2660658777, abs=1e-9)
    assert bessel_i0(10.0) == pytest.approx(2815.7166284, rel=1e-4)


@pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 5.0, 10.0, 14.99, 15.0, 15.01, 20.0, 30.0, 50.0])
def test_bessel_twelve_digits(x):
    assert bessel_i0(x) == pytest.approx(float(mp_i0_series(x)), rel=1e-12)


def test_bessel_monotone():
    xs = [0.05 * i for i in range(1001)]
    vals = [bessel_i0(x) for x in xs]
    assert vals[0] == 1.0
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_bessel_domain():
    with pytest.raises(DomainError):
        bessel_i0(-1.0)


def test_binomial():
    assert binomial(5, 0) == 1
    assert binomial(5, 2) == 10
    assert binomial(20, 10) == pascal(20, 10) == 184756
    assert binomial(150, 75) == pytest.approx(pascal(150, 75), rel=1e-12)
    for n in range(31):
        for k in range(n + 1):
            assert binomial(n, k) == pascal(n, k) == binomial(n, n - k)
    with pytest.raises(DomainError):
        binomial(3, 4)
    with pytest.raises(DomainError):
        binomial(171, 3)
