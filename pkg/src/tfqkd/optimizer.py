"""Per-distance intensity optimization and rate-versus-distance sweeps."""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import ChannelParams, OperatingPoint, protocol1_observables
from .decoy import (
    DEFAULT_N_CUT,
    DEFAULT_NU,
    DEFAULT_OMEGA,
    DecoyIntensities,
    YieldBoundTable,
    protocol2_observables,
    yield_bound_table,
)
from .keyrate import DEFAULT_F, plob_bound, two_way_rate
from .numerics import DomainError

log = logging.getLogger(__name__)

CAT = "cat-state"
PHASE_RANDOMIZED = "phase-randomized"
PLOB = "plob"
DEFAULT_PROTOCOLS = ("cat-state-oneway", "cat-state-k1", "cat-state-k2", "phase-randomized", "plob")

_VARIANT_RE = re.compile(r"^(cat-state|phase-randomized)(?:-(oneway)|-k(\d+))?$")

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def parse_variant(name: str) -> tuple[str, int]:
    """Split a protocol name into (family, number of B steps).

    >>> parse_variant("cat-state-k2")
    ('cat-state', 2)
    >>> parse_variant("phase-randomized")
    ('phase-randomized', 0)
    """
    m = _VARIANT_RE.match(name)
    if m is None or (m.group(1) == CAT and m.group(2) is None and m.group(3) is None):
        raise ValueError(f"unknown protocol {name!r}")
    return m.group(1), int(m.group(3) or 0)


@dataclass(frozen=True)
class SearchConfig:
    """Intensity search window on the larger of the two signal intensities."""

    mu_min: float = 1e-5
    mu_max: float = 1.0
    grid_points: int = 60
    tol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.mu_min < self.mu_max:
            raise DomainError("search window needs 0 < mu_min < mu_max")
        if self.grid_points < 3:
            raise DomainError("search grid needs at least 3 points")
        if not self.tol > 0:
            raise DomainError("search tolerance must be positive")


def golden_max(fun: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal ``fun`` on [lo, hi]."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def operating_point(ch: ChannelParams, mu_hi: float, e_dZ: float) -> OperatingPoint:
    """Matched intensities whose larger member equals ``mu_hi``."""
    x = mu_hi * min(ch.eta_a, ch.eta_b)
    return OperatingPoint.matched(ch, x, e_dZ)


def rate_at(
    ch: ChannelParams,
    protocol: str,
    mu_hi: float,
    e_dZ: float,
    f: float = DEFAULT_F,
    k: int = 0,
    bounds: Optional[YieldBoundTable] = None,
    n_cut: int = DEFAULT_N_CUT,
):
    """RateResult of one protocol family at one intensity."""
    op = operating_point(ch, mu_hi, e_dZ)
    if protocol == CAT:
        obs = protocol1_observables(ch, op)
    elif protocol == PHASE_RANDOMIZED:
        if bounds is None:
            bounds = yield_bound_table(DecoyIntensities.from_channel(ch), n_cut)
        obs = protocol2_observables(ch, op, bounds, n_cut)
    else:
        raise ValueError(f"unknown protocol family {protocol!r}")
    if obs.E_X > 0.5:
        # dark-count dominated regime; no privacy is credited beyond e_p = 1/2
        obs = replace(obs, E_X=0.5)
    return two_way_rate(obs, f, k)


def _search(ch, protocol, e_dZ, f, k, search, bounds, n_cut) -> tuple[float, float]:
    """(mu_a, unclamped rate) at the best intensity found."""
    def objective(log_mu: float) -> float:
        try:
            return rate_at(ch, protocol, math.exp(log_mu), e_dZ, f, k, bounds, n_cut).raw_rate
        except DomainError:
            return -math.inf

    grid = np.linspace(math.log(search.mu_min), math.log(search.mu_max), search.grid_points)
    values = [objective(g) for g in grid]
    i = int(np.argmax(values))
    best_x, best_v = float(grid[i]), values[i]
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, v = golden_max(objective, float(lo), float(hi), search.tol)
    if v > best_v:
        best_x, best_v = x, v
    return operating_point(ch, math.exp(best_x), e_dZ).mu_a, best_v


def optimize_intensity(
    ch: ChannelParams,
    protocol: str,
    e_dZ: float,
    f: float = DEFAULT_F,
    k: int = 0,
    *,
    search: SearchConfig = SearchConfig(),
    bounds: Optional[YieldBoundTable] = None,
    omega: float = DEFAULT_OMEGA,
    nu: float = DEFAULT_NU,
    n_cut: int = DEFAULT_N_CUT,
) -> tuple[float, float]:
    """Signal intensity maximizing the rate, and that rate.

    The search runs over ``log(mu)`` where ``mu`` is the larger of the
    two users' intensities; the partner intensity follows from
    ``mu_a * eta_a == mu_b * eta_b``. A log-spaced grid brackets the best
    point and golden-section search refines it. The returned intensity is
    Alice's. Returns ``(search.mu_min, 0.0)`` when no intensity gives a
    positive rate.
    """
    if protocol == PHASE_RANDOMIZED and bounds is None:
        bounds = yield_bound_table(DecoyIntensities.from_channel(ch, omega, nu), n_cut)
    mu, raw = _search(ch, protocol, e_dZ, f, k, search, bounds, n_cut)
    if not raw > 0.0:
        return search.mu_min, 0.0
    return mu, raw


@dataclass(frozen=True)
class SweepSpec:
    distances: Sequence[float]
    asymmetry_ratio: float = 0.5
    protocols: Sequence[str] = DEFAULT_PROTOCOLS
    channel: ChannelParams = ChannelParams()
    e_dZ: float = 0.03
    f: float = DEFAULT_F
    rep_rate_hz: Optional[float] = None
    omega: float = DEFAULT_OMEGA
    nu: float = DEFAULT_NU
    n_cut: int = DEFAULT_N_CUT
    bound_with_detector: bool = False
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        object.__setattr__(self, "protocols", tuple(self.protocols))
        if any(d < 0 for d in self.distances):
            raise DomainError("distances must be nonnegative")
        if any(b <= a for a, b in zip(self.distances, self.distances[1:])):
            raise DomainError("distances must be strictly increasing")
        if not 0.0 < self.asymmetry_ratio < 1.0:
            raise DomainError("asymmetry_ratio must lie in (0, 1)")
        for p in self.protocols:
            if p != PLOB:
                parse_variant(p)

    def channel_at(self, distance_km: float) -> ChannelParams:
        return replace(
            self.channel,
            L_ac=self.asymmetry_ratio * distance_km,
            L_bc=(1.0 - self.asymmetry_ratio) * distance_km,
        )


@dataclass
class CurvePoint:
    """One row of a rate-versus-distance sweep.

    ``rates`` and ``mu_opt`` are keyed by protocol name and hold bits per
    pulse and Alice's optimal signal intensity. ``plob`` is always
    computed so that crossings can be located even when the bound is not
    an output column.
    """

    distance_km: float
    total_loss_db: float
    rates: dict[str, float] = field(default_factory=dict)
    raw_rates: dict[str, float] = field(default_factory=dict)
    mu_opt: dict[str, float] = field(default_factory=dict)
    plob: Optional[float] = None
    errors: dict[str, str] = field(default_factory=dict)

    def bits_per_second(self, protocol: str, rep_rate_hz: float) -> float:
        value = self.plob if protocol == PLOB else self.rates[protocol]
        return value * rep_rate_hz


def plob_for(ch: ChannelParams, with_detector: bool = False) -> float:
    eta = 10.0 ** (-ch.total_loss_db / 10.0)
    if with_detector:
        eta *= ch.eta_d
    return plob_bound(eta) if eta < 1.0 else math.inf


def evaluate_point(
    spec: SweepSpec,
    distance_km: float,
    bounds: Optional[YieldBoundTable] = None,
) -> CurvePoint:
    """Compute one sweep row; failures land in ``errors`` rather than raising.

    ``bounds`` replaces the model-generated decoy bounds, e.g. with bounds
    derived from measured gains.
    """
    ch = spec.channel_at(distance_km)
    point = CurvePoint(distance_km=distance_km, total_loss_db=ch.total_loss_db)
    point.plob = plob_for(ch, spec.bound_with_detector)
    for name in spec.protocols:
        if name == PLOB:
            continue
        family, k = parse_variant(name)
        try:
            if family == PHASE_RANDOMIZED and bounds is None:
                d = DecoyIntensities.from_channel(ch, spec.omega, spec.nu)
                bounds = yield_bound_table(d, spec.n_cut)
            mu, raw = _search(ch, family, spec.e_dZ, spec.f, k, spec.search, bounds, spec.n_cut)
        except Exception as exc:  # one bad row must not abort a sweep
            log.warning("%s at %g km failed: %s", name, distance_km, exc)
            point.errors[name] = f"{type(exc).__name__}: {exc}"
            continue
        point.raw_rates[name] = raw
        if raw > 0.0:
            point.rates[name], point.mu_opt[name] = raw, mu
        else:
            point.rates[name], point.mu_opt[name] = 0.0, spec.search.mu_min
    return point


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[CurvePoint]:
    """Evaluate every distance of ``spec``; output order follows ``spec.distances``."""
    if workers > 1 and len(spec.distances) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate_point, [spec] * len(spec.distances), spec.distances))
    return [evaluate_point(spec, d) for d in spec.distances]


def max_positive_distance(points: Sequence[CurvePoint], protocol: str) -> Optional[float]:
    """Largest swept distance at which ``protocol`` still has a positive rate."""
    positive = [p.distance_km for p in points if p.rates.get(protocol, 0.0) > 0.0]
    return max(positive) if positive else None


def plob_crossing(points: Sequence[CurvePoint], protocol: str) -> Optional[float]:
    """First swept distance at which ``protocol`` beats the repeaterless bound."""
    for p in points:
        r = p.rates.get(protocol, 0.0)
        if r > 0.0 and p.plob is not None and r > p.plob:
            return p.distance_km
    return None
