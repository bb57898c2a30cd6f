"""Three-intensity decoy-state yield bounds and the phase-error-gain bound
for the phase-randomized protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
from scipy.special import gammaln

from .channel import (
    ChannelParams,
    DEGENERATE_GAIN,
    Observables,
    OperatingPoint,
    decoy_gain,
    protocol1_observables,
)
from .numerics import DomainError

LEVELS = ("0", "omega", "nu")
DEFAULT_OMEGA = 0.02
DEFAULT_NU = 0.1
DEFAULT_N_CUT = 10
TAIL_TERMS = 60

Intensity = Union[str, float]


class MissingGain(KeyError):
    pass


@dataclass(frozen=True)
class DecoyIntensities:
    """Decoy levels ``0 < omega < nu`` and the nine gains ``Q[a, b]``.

    ``gains`` is keyed by pairs of level labels drawn from ``LEVELS``.
    """

    omega: float
    nu: float
    gains: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.omega < self.nu:
            raise DomainError(
                f"decoy intensities need 0 < omega < nu, got {self.omega!r}, {self.nu!r}"
            )
        for key, q in self.gains.items():
            if key[0] not in LEVELS or key[1] not in LEVELS:
                raise DomainError(f"unknown decoy level in {key!r}")
            if not 0.0 <= q <= 1.0:
                raise DomainError(f"gain {key!r}={q!r} is not in [0, 1]")

    @classmethod
    def from_channel(
        cls,
        ch: ChannelParams,
        omega: float = DEFAULT_OMEGA,
        nu: float = DEFAULT_NU,
    ) -> "DecoyIntensities":
        """Gains predicted by the channel model for every pair of levels."""
        value = {"0": 0.0, "omega": omega, "nu": nu}
        gains = {(a, b): decoy_gain(value[a], value[b], ch) for a in LEVELS for b in LEVELS}
        return cls(omega, nu, gains)

    def label(self, x: Intensity) -> str:
        if isinstance(x, str):
            if x not in LEVELS:
                raise DomainError(f"unknown decoy level {x!r}")
            return x
        for name, v in (("0", 0.0), ("omega", self.omega), ("nu", self.nu)):
            if math.isclose(x, v, rel_tol=1e-12, abs_tol=1e-15):
                return name
        raise DomainError(f"{x!r} is not one of the decoy intensities")

    def value(self, x: Intensity) -> float:
        return {"0": 0.0, "omega": self.omega, "nu": self.nu}[self.label(x)]

    def gain(self, x: Intensity, y: Intensity) -> float:
        key = (self.label(x), self.label(y))
        try:
            return self.gains[key]
        except KeyError:
            raise MissingGain(f"no gain recorded for levels {key!r}") from None


def f_correlator(x: Intensity, y: Intensity, d: DecoyIntensities) -> float:
    """``e^{x+y} Q[x,y] - e^x Q[x,0] - e^y Q[0,y] + Q[0,0]``.

    Expanding the gains in Fock yields leaves only terms with at least one
    photon from each side.
    """
    xv, yv = d.value(x), d.value(y)
    return (
        math.exp(xv + yv) * d.gain(x, y)
        - math.exp(xv) * d.gain(x, "0")
        - math.exp(yv) * d.gain("0", y)
        + d.gain("0", "0")
    )


def _clamp(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def _one_sided(n: int, d: DecoyIntensities, alice: bool) -> float:
    # Y[n,0] (alice=True) or Y[0,n], n >= 2
    w, v = d.omega, d.nu
    if alice:
        num = w * math.exp(v) * d.gain("nu", "0") - v * math.exp(w) * d.gain("omega", "0")
    else:
        num = w * math.exp(v) * d.gain("0", "nu") - v * math.exp(w) * d.gain("0", "omega")
    num += (v - w) * d.gain("0", "0")
    den = v * w * (v ** (n - 1) - w ** (n - 1)) / math.factorial(n)
    return num / den


def yield_upper(n: int, m: int, d: DecoyIntensities) -> float:
    """Upper bound on the yield ``Y[n, m]`` from the three-intensity gains.

    Photon-number pairs not covered by any bound family, (1, 0) and (0, 1),
    get the trivial bound 1. Every result is clamped into [0, 1].
    """
    if n < 0 or m < 0:
        raise DomainError("photon numbers must be nonnegative")
    w, v = d.omega, d.nu
    if n == 0 and m == 0:
        return _clamp(d.gain("0", "0"))
    if n == 1 and m == 1:
        return _clamp(f_correlator("omega", "omega", d) / w**2)
    if m == 0 and n >= 2:
        return _clamp(_one_sided(n, d, alice=True))
    if n == 0 and m >= 2:
        return _clamp(_one_sided(m, d, alice=False))
    if n == 1 and m >= 2:
        num = w * f_correlator("omega", "nu", d) - v * f_correlator("omega", "omega", d)
        return _clamp(num / ((v**m * w**2 - v * w ** (m + 1)) / math.factorial(m)))
    if m == 1 and n >= 2:
        num = w * f_correlator("nu", "omega", d) - v * f_correlator("omega", "omega", d)
        return _clamp(num / ((v**n * w**2 - v * w ** (n + 1)) / math.factorial(n)))
    if n >= 2 and m >= 2:
        num = (
            w**2 * f_correlator("nu", "nu", d)
            - v * w * (f_correlator("nu", "omega", d) + f_correlator("omega", "nu", d))
            + v**2 * f_correlator("omega", "omega", d)
        )
        den = (
            v**2 * w**2
            * (v ** (n - 1) - w ** (n - 1))
            * (v ** (m - 1) - w ** (m - 1))
            / (math.factorial(n) * math.factorial(m))
        )
        return _clamp(num / den)
    return 1.0


@dataclass(frozen=True)
class YieldBoundTable:
    bounds: np.ndarray
    n_cut: int

    def __getitem__(self, nm: tuple[int, int]) -> float:
        n, m = nm
        if n > self.n_cut or m > self.n_cut:
            return 1.0
        return float(self.bounds[n, m])


def yield_bound_table(d: DecoyIntensities, n_cut: int = DEFAULT_N_CUT) -> YieldBoundTable:
    size = n_cut + 1
    table = np.array([[yield_upper(n, m, d) for m in range(size)] for n in range(size)])
    table.setflags(write=False)
    return YieldBoundTable(table, n_cut)


def _sqrt_poisson(mu: float, size: int) -> np.ndarray:
    n = np.arange(size)
    if mu == 0.0:
        out = np.zeros(size)
        out[0] = 1.0
        return out
    return np.exp(0.5 * (-mu + n * math.log(mu) - gammaln(n + 1)))


def phase_error_gain_upper(
    mu_a: float,
    mu_b: float,
    d: Union[DecoyIntensities, YieldBoundTable],
    n_cut: int = DEFAULT_N_CUT,
) -> float:
    """Cauchy-Schwarz bound on the X-basis error gain.

    Sums ``sqrt(P_a[n] P_b[m] Y[n, m])`` separately over even-even and
    odd-odd photon pairs and adds the squares. Yields with both indices up
    to ``n_cut`` come from the decoy bounds; every other yield is set to 1.
    """
    if mu_a < 0 or mu_b < 0:
        raise DomainError("intensities must be nonnegative")
    table = d if isinstance(d, YieldBoundTable) else yield_bound_table(d, n_cut)
    mu_max = max(mu_a, mu_b)
    size = max(TAIL_TERMS, int(mu_max + 20.0 * math.sqrt(mu_max) + 20.0)) + 1
    Y = np.ones((size, size))
    c = min(table.n_cut, size - 1) + 1
    Y[:c, :c] = table.bounds[:c, :c]
    amp = np.outer(_sqrt_poisson(mu_a, size), _sqrt_poisson(mu_b, size)) * np.sqrt(Y)
    even = amp[0::2, 0::2].sum()
    odd = amp[1::2, 1::2].sum()
    return float(even * even + odd * odd)


def protocol2_observables(
    ch: ChannelParams,
    op: OperatingPoint,
    d: Union[DecoyIntensities, YieldBoundTable, None] = None,
    n_cut: int = DEFAULT_N_CUT,
) -> Observables:
    """Z-basis observables plus the bounded phase error of the phase-randomized protocol.

    The Z basis is identical to the cat-state protocol; only the X-basis
    error rate is replaced by its decoy-state upper bound, capped at 1/2.
    """
    if d is None:
        d = DecoyIntensities.from_channel(ch)
    z = protocol1_observables(ch, op)
    if z.Q_Z < DEGENERATE_GAIN:
        return Observables(z.Q_Z, 0.0, 0.0, degenerate=True)
    q_xe = phase_error_gain_upper(op.mu_a, op.mu_b, d, n_cut)
    return Observables(
        Q_Z=z.Q_Z,
        E_Z=z.E_Z,
        E_X=min(q_xe / z.Q_Z, 0.5),
        Q_Z_correct=z.Q_Z_correct,
        Q_Z_error=z.Q_Z_error,
        Q_X_error=q_xe,
    )
