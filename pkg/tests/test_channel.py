import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fock_gain, mc_yield, phase_averaged_gain
from tfqkd.channel import (
    ChannelParams,
    InterferenceMismatch,
    OperatingPoint,
    decoy_gain,
    link_efficiencies,
    protocol1_closed_form,
    protocol1_observables,
    yield_exact,
)
from tfqkd.numerics import DomainError

mp.mp.dps = 40


def mp_observables(x, M, pd, e_dZ):
    """Component gains evaluated at 40 digits."""
    x, M, pd, e_dZ = (mp.mpf(v) for v in (x, M, pd, e_dZ))
    e2x = mp.e ** (-2 * x)
    cross = mp.e ** (-2 * M + 2 * x)
    qz_c = (1 - pd) * (1 - e2x + pd * e2x)
    qz_e = pd * (1 - pd) * e2x
    qx_e = (1 - pd) / 2 * ((1 - e2x) * (1 - cross) + 2 * pd * (e2x + cross))
    q_z = qz_c + qz_e
    return q_z, (e_dZ * qz_c + (1 - e_dZ) * qz_e) / q_z, qx_e / q_z


def test_zero_distance_efficiencies():
    assert link_efficiencies(ChannelParams(eta_d=1.0, p_d=0.0)) == (1.0, 1.0)


def test_hundred_km_efficiency():
    eta_a, _ = link_efficiencies(ChannelParams(L_ac=100.0, eta_d=0.85))
    assert eta_a == pytest.approx(0.85 * 10 ** -1.6, rel=1e-14)
    assert eta_a == pytest.approx(0.0213510, abs=1e-7)


def test_symmetric_efficiencies_equal():
    a, b = link_efficiencies(ChannelParams(L_ac=50.0, L_bc=50.0))
    assert a == b


@pytest.mark.parametrize(
    "kw",
    [dict(beta=0.0), dict(beta=-0.1), dict(eta_d=0.0), dict(eta_d=1.2), dict(p_d=-1e-3),
     dict(p_d=1.5), dict(L_ac=-1.0)],
)
def test_invalid_channel(kw):
    with pytest.raises(DomainError):
        ChannelParams(**kw)


def test_qz_example():
    ch = ChannelParams(eta_d=1.0, p_d=0.0)
    obs = protocol1_observables(ch, OperatingPoint.matched(ch, 0.1))
    assert obs.Q_Z == pytest.approx(-math.expm1(-0.2), rel=1e-15)
    assert obs.Q_Z == pytest.approx(0.1812692, abs=1e-7)
    assert obs.E_Z == 0.0


def test_vacuum_without_dark_counts_is_degenerate():
    ch = ChannelParams(p_d=0.0)
    obs = protocol1_observables(ch, OperatingPoint(0.0, 0.0))
    assert obs.Q_Z == 0.0
    assert obs.degenerate
    assert (obs.E_Z, obs.E_X) == (0.0, 0.0)


def test_mismatched_intensities_rejected():
    ch = ChannelParams.split(100.0, 0.7)
    with pytest.raises(InterferenceMismatch):
        protocol1_observables(ch, OperatingPoint(0.1, 0.1))


def test_matched_tolerance_band():
    ch = ChannelParams.split(100.0, 0.7)
    op = OperatingPoint.matched(ch, 1e-3)
    nudged = OperatingPoint(op.mu_a * (1 + 1e-11), op.mu_b)
    protocol1_observables(ch, nudged)


@settings(max_examples=200, deadline=None)
@given(
    total=st.floats(0.0, 500.0),
    ratio=st.floats(0.05, 0.95),
    log_mu=st.floats(-6.0, 0.5),
    pd=st.sampled_from([0.0, 1e-9, 1e-7, 1e-4]),
    e_dZ=st.floats(0.0, 0.5),
)
def test_components_against_high_precision(total, ratio, log_mu, pd, e_dZ):
    ch = ChannelParams.split(total, ratio, p_d=pd)
    x = 10**log_mu * min(ch.eta_a, ch.eta_b)
    op = OperatingPoint.matched(ch, x, e_dZ)
    obs = protocol1_observables(ch, op)
    q, ez, ex = mp_observables(x, op.mu_a + op.mu_b, pd, e_dZ)
    assert obs.Q_Z == pytest.approx(float(q), rel=1e-12)
    assert obs.E_Z == pytest.approx(float(ez), rel=1e-11, abs=1e-300)
    assert obs.E_X == pytest.approx(float(ex), rel=1e-11)


def test_symmetric_ex_formula():
    # equal arms: M = 2x / eta, E_X follows the compact ratio form
    ch = ChannelParams.split(80.0, p_d=1e-6)
    op = OperatingPoint.matched(ch, 0.01)
    M = op.mu_a + op.mu_b
    pd, x = ch.p_d, 0.01
    want = 0.5 * (1 + math.exp(-2 * M) * (1 - (1 - 2 * pd) * math.exp(2 * x)) / (1 - (1 - 2 * pd) * math.exp(-2 * x)))
    assert protocol1_observables(ch, op).E_X == pytest.approx(want, rel=1e-12)


def test_closed_form_error_gain_is_ez_times_qz():
    ch = ChannelParams.split(150.0, 0.6)
    op = OperatingPoint.matched(ch, 0.003, 0.03)
    obs = protocol1_observables(ch, op)
    q, err, ex = protocol1_closed_form(ch, op)
    assert err == pytest.approx(obs.E_Z * obs.Q_Z, rel=1e-12)


def test_qz_nondecreasing_in_x():
    ch = ChannelParams.split(200.0)
    xs = np.logspace(-7, 0, 200)
    q = [protocol1_observables(ch, OperatingPoint.matched(ch, x)).Q_Z for x in xs]
    assert all(b >= a for a, b in zip(q, q[1:]))


@settings(max_examples=200, deadline=None)
@given(total=st.floats(0.0, 400.0), ratio=st.floats(0.1, 0.9), log_mu=st.floats(-5.0, 0.0))
def test_ex_bounded_without_dark_counts(total, ratio, log_mu):
    ch = ChannelParams.split(total, ratio, p_d=0.0)
    x = 10**log_mu * min(ch.eta_a, ch.eta_b)
    op = OperatingPoint.matched(ch, x)
    obs = protocol1_observables(ch, op)
    cap = 0.5 * (1 + math.exp(-2 * (op.mu_a + op.mu_b)))
    assert 0.0 <= obs.E_X <= cap * (1 + 1e-9)


def test_decoy_gain_vacuum():
    assert decoy_gain(0, 0, ChannelParams(p_d=0.0)) == 0.0
    ch = ChannelParams(p_d=1e-7)
    assert decoy_gain(0, 0, ch) == pytest.approx(2e-7 * (1 - 1e-7), rel=1e-14)
    assert decoy_gain(0, 0, ch) == pytest.approx(yield_exact(0, 0, ch), rel=1e-12)


@pytest.mark.parametrize("nu", [(0.1, 0.1), (0.02, 0.1), (0.5, 0.02), (0.0, 0.5)])
@pytest.mark.parametrize("total", [0.0, 100.0, 300.0])
def test_decoy_gain_phase_average(nu, total):
    ch = ChannelParams.split(total)
    assert decoy_gain(*nu, ch) == pytest.approx(phase_averaged_gain(*nu, ch), rel=1e-10)


def test_decoy_gain_fock_expansion_eta_002():
    # 0.02 symmetric, all loss in the fiber
    L = -10 * math.log10(0.02) / 0.16
    ch = ChannelParams.split(2 * L, eta_d=1.0, p_d=1e-7)
    assert ch.eta_a == pytest.approx(0.02)
    want = fock_gain(0.1, 0.1, ch, yield_exact)
    assert decoy_gain(0.1, 0.1, ch) == pytest.approx(want, rel=1e-10)


def test_yield_vacuum():
    assert yield_exact(0, 0, ChannelParams(p_d=0.0)) == 0.0
    ch = ChannelParams(p_d=3e-5)
    assert yield_exact(0, 0, ch) == pytest.approx(2 * 3e-5 * (1 - 3e-5), rel=1e-14)


@pytest.mark.parametrize("total", [0.0, 40.0, 100.0])
def test_single_photon_perfect_detector(total):
    ch = ChannelParams.split(total, eta_d=1.0, p_d=0.0)
    assert yield_exact(1, 0, ch) == pytest.approx(ch.eta_at, rel=1e-13)
    assert yield_exact(0, 1, ch) == pytest.approx(ch.eta_bt, rel=1e-13)


def test_hong_ou_mandel_pair_never_single_clicks_when_lossless():
    # |1,1> bunches, so a lossless perfect setup always fires exactly one detector
    ch = ChannelParams(eta_d=1.0, p_d=0.0)
    assert yield_exact(1, 1, ch) == pytest.approx(1.0)


def test_yield_2_2_monte_carlo():
    L = -10 * math.log10(0.1) / 0.16
    ch = ChannelParams.split(2 * L, eta_d=0.85, p_d=1e-7)
    rng = np.random.default_rng(20260101)
    est, n = mc_yield(2, 2, ch, 1_000_000, rng)
    y = yield_exact(2, 2, ch)
    se = math.sqrt(y * (1 - y) / n)
    assert abs(est - y) < 3 * se


def test_yield_symmetry_and_range():
    ch = ChannelParams.split(120.0)
    for n in range(12):
        for m in range(12):
            y = yield_exact(n, m, ch)
            assert 0.0 <= y <= 1.0
            assert y == pytest.approx(yield_exact(m, n, ch), rel=1e-12, abs=1e-300)


def test_yield_range_errors():
    ch = ChannelParams()
    with pytest.raises(DomainError):
        yield_exact(-1, 0, ch)
    with pytest.raises(DomainError):
        yield_exact(41, 0, ch)
