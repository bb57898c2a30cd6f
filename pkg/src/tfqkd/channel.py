"""Lossy-fiber simulation model for coherent-state twin-field QKD.

Everything here describes the honest run (no eavesdropper): link
efficiencies, the gains and error rates of the cat-state protocol, the
gain of phase-randomized coherent states, and photon-number yields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .numerics import DomainError, bessel_i0m1, check_probability

MATCH_RTOL = 1e-9
DEGENERATE_GAIN = 1e-300
MAX_PHOTONS = 40


class InterferenceMismatch(DomainError):
    """``mu_a * eta_a != mu_b * eta_b`` for a cat-state operating point."""


@dataclass(frozen=True)
class ChannelParams:
    """Fiber and detector description.

    Attributes:
        beta: fiber loss coefficient in dB/km.
        L_ac: Alice to Charlie distance in km.
        L_bc: Bob to Charlie distance in km.
        eta_d: detector efficiency.
        p_d: dark-count probability per pulse.
    """

    beta: float = 0.16
    L_ac: float = 0.0
    L_bc: float = 0.0
    eta_d: float = 0.85
    p_d: float = 1e-7

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta!r}")
        if not (self.L_ac >= 0 and self.L_bc >= 0):
            raise DomainError("distances must be nonnegative")
        if not 0.0 < self.eta_d <= 1.0:
            raise DomainError(f"eta_d must lie in (0, 1], got {self.eta_d!r}")
        check_probability(self.p_d, "p_d")
        if self.eta_at <= 0.0 or self.eta_bt <= 0.0:
            raise DomainError("channel transmittance underflows to zero")

    @classmethod
    def split(cls, total_km: float, ratio: float = 0.5, **kwargs) -> "ChannelParams":
        """Place Charlie so that ``L_ac / (L_ac + L_bc) == ratio``."""
        if not 0.0 < ratio < 1.0:
            raise DomainError(f"asymmetry ratio must lie in (0, 1), got {ratio!r}")
        return cls(L_ac=ratio * total_km, L_bc=(1.0 - ratio) * total_km, **kwargs)

    @property
    def eta_at(self) -> float:
        return 10.0 ** (-self.beta * self.L_ac / 10.0)

    @property
    def eta_bt(self) -> float:
        return 10.0 ** (-self.beta * self.L_bc / 10.0)

    @property
    def eta_a(self) -> float:
        return self.eta_d * self.eta_at

    @property
    def eta_b(self) -> float:
        return self.eta_d * self.eta_bt

    @property
    def total_km(self) -> float:
        return self.L_ac + self.L_bc

    @property
    def total_loss_db(self) -> float:
        return self.beta * self.total_km


def link_efficiencies(ch: ChannelParams) -> tuple[float, float]:
    """Detector-inclusive efficiencies (eta_a, eta_b) of the two arms."""
    return ch.eta_a, ch.eta_b


@dataclass(frozen=True)
class OperatingPoint:
    mu_a: float
    mu_b: float
    e_dZ: float = 0.0

    def __post_init__(self):
        if self.mu_a < 0 or self.mu_b < 0:
            raise DomainError("intensities must be nonnegative")
        if not 0.0 <= self.e_dZ <= 0.5:
            raise DomainError(f"e_dZ must lie in [0, 0.5], got {self.e_dZ!r}")

    @classmethod
    def matched(cls, ch: ChannelParams, x: float, e_dZ: float = 0.0) -> "OperatingPoint":
        """Intensities satisfying ``mu_a * eta_a == mu_b * eta_b == x``."""
        return cls(mu_a=x / ch.eta_a, mu_b=x / ch.eta_b, e_dZ=e_dZ)


@dataclass(frozen=True)
class Observables:
    """Gain and error rates of one protocol at one operating point.

    Component gains are only known for the cat-state model; purified or
    bounded observables leave them as ``None``.
    """

    Q_Z: float
    E_Z: float
    E_X: float
    Q_Z_correct: Optional[float] = None
    Q_Z_error: Optional[float] = None
    Q_X_correct: Optional[float] = None
    Q_X_error: Optional[float] = None
    degenerate: bool = False


def _check_matching(ch: ChannelParams, op: OperatingPoint) -> float:
    xa = op.mu_a * ch.eta_a
    xb = op.mu_b * ch.eta_b
    if abs(xa - xb) > MATCH_RTOL * max(xa, xb):
        raise InterferenceMismatch(
            f"mu_a*eta_a={xa!r} differs from mu_b*eta_b={xb!r}"
        )
    return 0.5 * (xa + xb)


def protocol1_observables(ch: ChannelParams, op: OperatingPoint) -> Observables:
    """Observables of the coherent-state / cat-state protocol without Eve."""
    x = _check_matching(ch, op)
    pd = ch.p_d
    M = op.mu_a + op.mu_b
    e2x = math.exp(-2.0 * x)
    # 1 - e^{-2x} and 1 -/+ e^{-2M+2x}, written to keep digits at small x
    om2x = -math.expm1(-2.0 * x)
    cross = math.exp(-2.0 * M + 2.0 * x)
    om_cross = -math.expm1(-2.0 * M + 2.0 * x)

    qz_c = (1.0 - pd) * (om2x + pd * e2x)
    qz_e = pd * (1.0 - pd) * e2x
    qx_c = 0.5 * (1.0 - pd) * (om2x * (1.0 + cross) + 2.0 * pd * (e2x - cross))
    qx_e = 0.5 * (1.0 - pd) * (om2x * om_cross + 2.0 * pd * (e2x + cross))

    q_z = qz_c + qz_e
    if q_z < DEGENERATE_GAIN:
        return Observables(q_z, 0.0, 0.0, qz_c, qz_e, qx_c, qx_e, degenerate=True)
    e_z = (op.e_dZ * qz_c + (1.0 - op.e_dZ) * qz_e) / q_z
    e_x = qx_e / q_z
    return Observables(q_z, e_z, e_x, qz_c, qz_e, qx_c, qx_e)


def protocol1_closed_form(ch: ChannelParams, op: OperatingPoint) -> tuple[float, float, float]:
    """Compact expressions for (Q_Z, E_Z * Q_Z, E_X) of the cat-state protocol.

    The middle entry is the Z-basis error gain; dividing by ``Q_Z`` gives
    the QBER.
    """
    x = _check_matching(ch, op)
    pd = ch.p_d
    M = op.mu_a + op.mu_b
    e2x = math.exp(-2.0 * x)
    # 1 - (1 - 2 p_d) e^{-2x} and 1 - (1 - 2 p_d) e^{2x}
    den = -math.expm1(-2.0 * x) + 2.0 * pd * e2x
    num = -math.expm1(2.0 * x) + 2.0 * pd * math.exp(2.0 * x)
    q_z = (1.0 - pd) * den
    err_gain = (1.0 - pd) * (op.e_dZ * -math.expm1(-2.0 * x) + pd * e2x)
    e_x = 0.5 * (1.0 + math.exp(-2.0 * M) * num / den)
    return q_z, err_gain, e_x


def decoy_gain(nu_a: float, nu_b: float, ch: ChannelParams) -> float:
    """Gain when both users send phase-randomized coherent states."""
    if nu_a < 0 or nu_b < 0:
        raise DomainError("decoy intensities must be nonnegative")
    pd = ch.p_d
    x = nu_a * ch.eta_a
    y = nu_b * ch.eta_b
    half = math.exp(-0.5 * (x + y))
    # I0 - (1 - p_d) e^{-s/2} = (I0 - 1) + (1 - e^{-s/2}) + p_d e^{-s/2}
    inner = bessel_i0m1(math.sqrt(x * y)) - math.expm1(-0.5 * (x + y)) + pd * half
    return 2.0 * (1.0 - pd) * half * inner


def _interference_weights(k: int, l: int) -> list[float]:
    """P(u photons exit port L | k photons in a, l photons in b), u = 0..k+l.

    The amplitude sum over v is the z^u coefficient of (1 + z)^k (z - 1)^l.
    """
    amps = [0] * (k + l + 1)
    for v in range(l + 1):
        cv = (-1) ** (l - v) * math.comb(l, v)
        for j in range(k + 1):
            amps[v + j] += cv * math.comb(k, j)
    s = k + l
    denom = 2**s * math.factorial(k) * math.factorial(l)
    return [
        math.factorial(u) * math.factorial(s - u) * a * a / denom
        for u, a in enumerate(amps)
    ]


def _click(u: int, eta_d: float, p_d: float) -> float:
    if u == 0:
        return p_d
    if eta_d >= 1.0:
        return 1.0
    return -math.expm1(math.log1p(-p_d) + u * math.log1p(-eta_d))


@lru_cache(maxsize=64)
def _detection_table(eta_d: float, p_d: float) -> np.ndarray:
    """Single-click probability after interfering k and l surviving photons."""
    size = MAX_PHOTONS + 1
    click = [_click(u, eta_d, p_d) for u in range(2 * size)]
    dark = [(1.0 - p_d) * (1.0 - eta_d) ** u for u in range(2 * size)]
    table = np.empty((size, size))
    for k in range(size):
        for l in range(size):
            s = k + l
            table[k, l] = sum(
                w * (click[u] * dark[s - u] + dark[u] * click[s - u])
                for u, w in enumerate(_interference_weights(k, l))
            )
    table.setflags(write=False)
    return table


def _loss_matrix(eta: float) -> np.ndarray:
    """B[n, k]: probability that k of n photons survive transmittance eta."""
    size = MAX_PHOTONS + 1
    B = np.zeros((size, size))
    for n in range(size):
        for k in range(n + 1):
            B[n, k] = math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k)
    return B


@lru_cache(maxsize=256)
def yield_table(ch: ChannelParams) -> np.ndarray:
    """All yields Y[n, m] for n, m <= MAX_PHOTONS (read-only array)."""
    D = _detection_table(ch.eta_d, ch.p_d)
    Y = _loss_matrix(ch.eta_at) @ D @ _loss_matrix(ch.eta_bt).T
    np.clip(Y, 0.0, 1.0, out=Y)
    Y.setflags(write=False)
    return Y


def yield_exact(n: int, m: int, ch: ChannelParams) -> float:
    """Probability that exactly one detector clicks given n and m input photons."""
    if n < 0 or m < 0:
        raise DomainError("photon numbers must be nonnegative")
    if n > MAX_PHOTONS or m > MAX_PHOTONS:
        raise DomainError(f"yield_exact supports n, m <= {MAX_PHOTONS}")
    return float(yield_table(ch)[n, m])
