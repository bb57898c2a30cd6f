"""Scalar special functions and entropy functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass

PROB_TOL = 1e-12

# Series/asymptotic crossover for the modified Bessel function.
_BESSEL_SWITCH = 15.0


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


def check_probability(x: float, name: str = "x") -> float:
    """Validate ``x`` as a probability, snapping round-off into [0, 1]."""
    if not (-PROB_TOL <= x <= 1.0 + PROB_TOL):
        raise DomainError(f"{name}={x!r} is not a probability")
    return min(max(float(x), 0.0), 1.0)


def _xlog2(p: float, q: float) -> float:
    """``-p * log2(p / q)`` with ``0 log 0 = 0``."""
    if p <= 0.0:
        return 0.0
    return -p * math.log2(p / q)


def binary_entropy(x: float) -> float:
    """Shannon entropy of a Bernoulli(x) variable, in bits.

    >>> binary_entropy(0.5)
    1.0
    """
    x = check_probability(x)
    return _xlog2(x, 1.0) + _xlog2(1.0 - x, 1.0)


@dataclass(frozen=True)
class ErrorTriple:
    """Bell-diagonal pair description used by the purification maps.

    Attributes:
        e_b: bit-error probability.
        e_p: phase-error probability.
        a: probability of a simultaneous bit and phase error.
    """

    e_b: float
    e_p: float
    a: float

    def __post_init__(self):
        e_b = check_probability(self.e_b, "e_b")
        e_p = check_probability(self.e_p, "e_p")
        a = check_probability(self.a, "a")
        if a > min(e_b, e_p) + PROB_TOL:
            raise DomainError(f"a={a!r} exceeds min(e_b, e_p)")
        if 1.0 - e_b - e_p + a < -PROB_TOL:
            raise DomainError("1 - e_b - e_p + a is negative")
        object.__setattr__(self, "e_b", e_b)
        object.__setattr__(self, "e_p", e_p)
        object.__setattr__(self, "a", min(a, e_b, e_p))

    @property
    def bell_weights(self) -> tuple[float, float, float, float]:
        """Weights of (no error, phase only, bit only, both)."""
        e_b, e_p, a = self.e_b, self.e_p, self.a
        return (1.0 - e_b - e_p + a, e_p - a, e_b - a, a)


def conditional_entropy(t: ErrorTriple) -> float:
    """H(e_p | e_b): remaining phase-error uncertainty once bit errors are known."""
    no_err, phase_only, bit_only, both = (max(w, 0.0) for w in t.bell_weights)
    # Denominators are the marginals 1 - e_b and e_b rebuilt from the clamped
    # weights, so a zero denominator always comes with zero weights.
    no_bit = no_err + phase_only
    bit = bit_only + both
    return (
        _xlog2(no_err, no_bit)
        + _xlog2(phase_only, no_bit)
        + _xlog2(bit_only, bit)
        + _xlog2(both, bit)
    )


def _i0_series(x: float) -> float:
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if term < 1e-17 * total:
            return total


def _i0_asymptotic(x: float) -> float:
    # e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k); stop at the smallest term.
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (2 * k - 1) ** 2 / (k * 8.0 * x)
        if nxt >= term or nxt < 1e-17 * total:
            break
        term = nxt
        total += term
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * total


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero, for ``x >= 0``."""
    if x < 0.0:
        raise DomainError(f"bessel_i0 expects x >= 0, got {x!r}")
    if x < _BESSEL_SWITCH:
        return _i0_series(x)
    return _i0_asymptotic(x)


def bessel_i0m1(x: float) -> float:
    """``I0(x) - 1`` without cancellation for small ``x``."""
    if x < 0.0:
        raise DomainError(f"bessel_i0m1 expects x >= 0, got {x!r}")
    if x >= 1.0:
        return bessel_i0(x) - 1.0
    q = 0.25 * x * x
    term = q
    total = q
    k = 1
    while term > 1e-17 * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def binomial(n: int, k: int) -> float:
    """Binomial coefficient C(n, k) as a float."""
    if n < 0 or k < 0:
        raise DomainError("binomial arguments must be nonnegative")
    if k > n:
        raise DomainError(f"binomial: k={k} exceeds n={n}")
    if n > 170:
        raise DomainError(f"binomial: n={n} exceeds the overflow guard of 170")
    return float(math.comb(n, k))
