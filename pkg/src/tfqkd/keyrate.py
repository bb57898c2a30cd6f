"""Secret-key-rate formulas: one-way rate, two-way B-step recursion,
Gottesman-Lo purification maps, protocol-conversion rates and the
repeaterless bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .channel import Observables
from .numerics import PROB_TOL, DomainError, ErrorTriple, binary_entropy

DEFAULT_F = 1.16


class TwoWayInapplicable(DomainError):
    """E_Z + E_X > 1, so a B step would produce a negative phase error."""


@dataclass(frozen=True)
class RateResult:
    rate: float
    raw_rate: float
    k_bsteps: int
    observables_after: Observables


def one_way_rate(obs: Observables, f: float = DEFAULT_F) -> RateResult:
    """``Q_Z [1 - f h(E_Z) - h(E_X)]``, clamped at zero in ``rate``."""
    if f < 1.0:
        raise DomainError(f"error-correction efficiency f must be >= 1, got {f!r}")
    if obs.degenerate or obs.Q_Z <= 0.0:
        return RateResult(0.0, 0.0, 0, obs)
    raw = obs.Q_Z * (1.0 - f * binary_entropy(obs.E_Z) - binary_entropy(obs.E_X))
    return RateResult(max(raw, 0.0), raw, 0, obs)


def b_step(obs: Observables) -> Observables:
    """One round of parity-checked pairing on the sifted key.

    >>> b_step(Observables(0.1, 0.0, 0.25))
    Observables(Q_Z=0.05, E_Z=0.0, E_X=0.375, Q_Z_correct=None, Q_Z_error=None, Q_X_correct=None, Q_X_error=None, degenerate=False)
    """
    ez, ex = obs.E_Z, obs.E_X
    if ez + ex > 1.0 + PROB_TOL:
        raise TwoWayInapplicable(f"E_Z + E_X = {ez + ex!r} exceeds 1")
    A = (1.0 - ez) ** 2 + ez**2
    return Observables(
        Q_Z=0.5 * A * obs.Q_Z,
        E_Z=ez * ez / A,
        E_X=max(2.0 * ex * (1.0 - ez - ex) / A, 0.0),
        degenerate=obs.degenerate,
    )


def two_way_rate(obs: Observables, f: float = DEFAULT_F, k: int = 0) -> RateResult:
    """Rate after ``k`` B steps; ``k == 0`` is exactly :func:`one_way_rate`."""
    if k < 0:
        raise DomainError("number of B steps must be nonnegative")
    cur = obs
    for _ in range(k):
        cur = b_step(cur)
    res = one_way_rate(cur, f)
    return RateResult(res.rate, res.raw_rate, k, cur)


def gl_b_step(t: ErrorTriple) -> tuple[ErrorTriple, float]:
    """Gottesman-Lo B step on a Bell-diagonal triple; returns (triple, survival)."""
    e_b, e_p, a = t.e_b, t.e_p, t.a
    D = (1.0 - e_b) ** 2 + e_b**2
    e_b2 = e_b * e_b / D
    a2 = 2.0 * a * (e_b - a) / D
    e_p2 = (2.0 * (1.0 - e_b - e_p + a) * (e_p - a) + 2.0 * a * (e_b - a)) / D
    return ErrorTriple(e_b2, e_p2, a2), 0.5 * D


def gl_p_step(t: ErrorTriple) -> tuple[ErrorTriple, float]:
    """Gottesman-Lo P step (three pairs into one); returns (triple, survival)."""
    e_b, e_p, a = t.e_b, t.e_p, t.a
    e_b2 = 3.0 * e_b * (1.0 - e_b) ** 2 + e_b**3
    e_p2 = 3.0 * e_p**2 * (1.0 - e_p) + e_p**3
    a2 = (
        3.0 * a * (e_p - a) * (2.0 - 2.0 * e_b - e_p + a)
        + 3.0 * (e_b - a) * (a * a + (e_p - a) ** 2)
        + a**3
    )
    return ErrorTriple(e_b2, e_p2, a2), 1.0 / 3.0


def lin_ideal_rate(mu: float, eta: float) -> float:
    """Ideal symmetric-channel rate of the cat-state protocol.

    No dark counts, no misalignment and ``f = 1``; ``eta`` is the
    detector-inclusive efficiency of each arm.
    """
    if not (mu > 0 and 0 < eta <= 1):
        raise DomainError("lin_ideal_rate needs mu > 0 and 0 < eta <= 1")
    gain = -math.expm1(-2.0 * mu * eta)
    return gain * (1.0 - binary_entropy(-0.5 * math.expm1(-4.0 * mu + 2.0 * mu * eta)))


def pm_qkd_error_gain(mu: float, yields_total: Mapping[int, float], n_cut: int) -> float:
    """Even-photon error gain of phase-matching QKD with symmetric intensity ``mu``.

    ``yields_total[n]`` is the yield when the two users send ``n`` photons
    in total. Terms with ``2n <= n_cut`` use the supplied yields (missing
    keys count as 0); every higher even term uses yield 1.
    """
    if mu < 0:
        raise DomainError("mu must be nonnegative")
    s = 2.0 * mu
    total = 0.0
    term = math.exp(-s)  # e^{-s} s^j / j!
    j = 0
    while True:
        if j % 2 == 0:
            y = yields_total.get(j, 0.0) if j <= n_cut else 1.0
            total += term * y
        j += 1
        term *= s / j
        if j > n_cut and term < 1e-18 * max(total, 1e-300):
            return total


def plob_bound(eta_total: float) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - eta)`` of a pure-loss channel."""
    if not 0.0 <= eta_total < 1.0:
        raise DomainError(f"plob_bound needs 0 <= eta < 1, got {eta_total!r}")
    return -math.log1p(-eta_total) / math.log(2.0)
