import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from amt.errors import DomainError, StepSizeError
from amt.geometry import (berry_connection_numeric, eta_from_qgt, fs_metric_tt_analytic,
                          fs_metric_tt_numeric, fs_speed, gaussian_vacuum_overlap,
                          geometry_trace, qgt_tt, vacuum_infidelity)
from amt.protocols import DriveProtocol


def _quadrature_overlap(w1, w2):
    """Independent oracle: integrate the product of the two Gaussian ground states."""
    def psi(w, x):
        return (w / math.pi) ** 0.25 * math.exp(-0.5 * w * x * x)

    val, _ = quad(lambda x: psi(w1, x) * psi(w2, x), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    return val


@pytest.mark.parametrize("w1,w2,expected", [
    (1.0, 4.0, math.sqrt(0.8)),
    (1.0, 100.0, 100 ** 0.25 * math.sqrt(2 / 101)),
])
def test_overlap_examples(w1, w2, expected):
    oracle = _quadrature_overlap(w1, w2)
    assert oracle == pytest.approx(expected, rel=1e-10)
    assert gaussian_vacuum_overlap(w1, w2) == pytest.approx(oracle, rel=1e-10)


def test_overlap_values_frozen():
    assert gaussian_vacuum_overlap(1, 4) == pytest.approx(0.894427, abs=5e-7)
    # the closed form gives 0.444994..., i.e. 0.44500 after rounding to 5 places
    assert gaussian_vacuum_overlap(1, 100) == pytest.approx(0.44500, abs=1e-5)
    assert gaussian_vacuum_overlap(3.3, 3.3) == 1.0


@settings(max_examples=200, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
def test_overlap_symmetric_and_bounded(a, b):
    o = gaussian_vacuum_overlap(a, b)
    assert o == gaussian_vacuum_overlap(b, a)
    assert 0 < o <= 1
    if a != b:
        assert vacuum_infidelity(a, b) > 0
    assert vacuum_infidelity(a, b) == pytest.approx(1 - o * o, abs=1e-14)


def test_overlap_rejects_nonpositive():
    with pytest.raises(DomainError):
        gaussian_vacuum_overlap(0.0, 1.0)
    with pytest.raises(DomainError):
        vacuum_infidelity(1.0, -2.0)


def test_metric_analytic_examples():
    assert fs_metric_tt_analytic(2.0, 0.0) == 0.0
    assert fs_metric_tt_analytic(2.0, 4.0) == 0.5
    assert fs_metric_tt_analytic(1.0, 1.0) == 0.125
    with pytest.raises(DomainError):
        fs_metric_tt_analytic(0.0, 1.0)


def test_metric_numeric_examples():
    assert abs(fs_metric_tt_numeric(DriveProtocol.constant(2.0), 1.0)) < 1e-12
    for lam in (0.3, 1.0, 2.0):
        p = DriveProtocol.exponential_chirp(1.0, lam)
        assert fs_metric_tt_numeric(p, 0.7) == pytest.approx(lam**2 / 8, rel=1e-6)
    ramp = DriveProtocol.linear_ramp(1.0, 0.1, t_start=-1.0)
    assert fs_metric_tt_numeric(ramp, 0.0) == pytest.approx(0.00125, rel=1e-6)


def _smooth_protocol(draw):
    kind = draw(st.sampled_from(["linear_ramp", "exponential_chirp", "tanh_sweep",
                                 "constant_eta"]))
    w0 = draw(st.floats(0.2, 20.0))
    s = draw(st.floats(0.05, 1.0))
    if kind == "linear_ramp":
        p = DriveProtocol.linear_ramp(w0, s * w0, t_end=5.0)
    elif kind == "exponential_chirp":
        p = DriveProtocol.exponential_chirp(w0, s, t_end=5.0)
    elif kind == "tanh_sweep":
        p = DriveProtocol.tanh_sweep(w0, 0.5 * s * w0, 1.0, center=2.5, t_end=5.0)
    else:
        p = DriveProtocol.constant_eta(w0, s)
    frac = draw(st.floats(0.05, 0.9))
    return p, p.t_start + frac * (p.t_end - p.t_start)


@st.composite
def smooth_points(draw):
    return _smooth_protocol(draw)


@settings(max_examples=50, deadline=None)
@given(smooth_points())
def test_numeric_metric_matches_analytic(point):
    p, t = point
    ref = fs_metric_tt_analytic(p.omega(t), p.omega_dot(t))
    got = fs_metric_tt_numeric(p, t)
    assert abs(got - ref) / max(ref, 1e-15) < 1e-6


@settings(max_examples=50, deadline=None)
@given(smooth_points())
def test_berry_connection_vanishes(point):
    p, t = point
    a = berry_connection_numeric(p, t)
    assert isinstance(a, complex)
    assert abs(a) < 1e-8 * p.omega(t)


def test_berry_examples():
    assert berry_connection_numeric(DriveProtocol.constant(1.0), 2.0) == 0
    assert abs(berry_connection_numeric(DriveProtocol.exponential_chirp(1.0, 1.0), 0.5)) < 1e-8
    assert abs(berry_connection_numeric(DriveProtocol.linear_ramp(1.0, 1.0), 1.0)) < 1e-8


def test_metric_raw_estimator_second_order():
    p = DriveProtocol.exponential_chirp(1.0, 1.0)
    t = 0.3
    ref = fs_metric_tt_analytic(p.omega(t), p.omega_dot(t))
    deltas = np.array([0.2, 0.1, 0.05, 0.025])
    errs = [abs(fs_metric_tt_numeric(p, t, d, richardson=False) - ref) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_metric_step_errors():
    p = DriveProtocol.linear_ramp(1.0, 0.1, t_end=1.0)
    with pytest.raises(StepSizeError):
        fs_metric_tt_numeric(p, 0.5, delta=1e-14)
    with pytest.raises(DomainError):
        fs_metric_tt_numeric(p, 0.0, delta=1e-3)  # stencil leaves [0, 1]
    with pytest.raises(DomainError):
        fs_metric_tt_numeric(p, 0.5, delta=-1.0)


def test_qgt_and_speed_examples():
    assert qgt_tt(2.0, 1.0) == 0.5
    assert qgt_tt(3.0, 0.0) == 0.0
    assert qgt_tt(1.0, 0.5) == 0.03125
    assert eta_from_qgt(0.5, 2.0) == 1.0
    assert eta_from_qgt(0.0, 5.0) == 0.0
    assert eta_from_qgt(0.03125, 1.0) == 0.5
    with pytest.raises(DomainError):
        eta_from_qgt(-1.0, 1.0)
    ds, ds2 = fs_speed(2.0, 1.0)
    assert ds == pytest.approx(1 / math.sqrt(2), rel=1e-15) and ds2 == 0.125
    assert fs_speed(3.0, 0.0) == (0.0, 0.0)
    ds, ds2 = fs_speed(1.0, 2 * math.sqrt(2))
    assert ds == pytest.approx(1.0, rel=1e-15) and ds2 == pytest.approx(1.0, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(eta=st.one_of(st.just(0.0), st.floats(1e-100, 10.0)), omega=st.floats(0.1, 100.0))
def test_embedding_round_trip(eta, omega):
    # below ~1e-154 eta**2 underflows, which is a limit of doubles rather than of the map
    back = eta_from_qgt(qgt_tt(omega, eta), omega)
    assert back == pytest.approx(eta, rel=1e-12, abs=0.0)
    # q_tt equals the metric at Omega_dot = eta Omega^2
    assert qgt_tt(omega, eta) == pytest.approx(fs_metric_tt_analytic(omega, eta * omega**2),
                                               rel=1e-12, abs=1e-300)
    ds, ds2 = fs_speed(omega, eta)
    assert ds2 == pytest.approx((ds / omega) ** 2, rel=1e-12, abs=1e-300)


def test_geometry_trace_examples():
    const = geometry_trace(DriveProtocol.constant(1.5), np.linspace(0, 1, 10))
    assert len(const) == 10 and all(s.eta == 0 and s.g_tt == 0 for s in const)
    ce = geometry_trace(DriveProtocol.constant_eta(1.0, 0.5), np.linspace(0, 1.9, 10))
    assert all(s.fs_speed_dtau_sq == pytest.approx(0.03125, rel=1e-12) for s in ce)
    chirp = geometry_trace(DriveProtocol.exponential_chirp(1.0, 2.0), np.linspace(0, 1, 10))
    assert all(s.g_tt == pytest.approx(0.5, rel=1e-12) for s in chirp)
    for s in ce + chirp:
        assert s.q_tt == pytest.approx(s.g_tt, rel=1e-12)
        assert s.fs_speed_dtau_sq == pytest.approx(s.eta**2 / 8, rel=1e-12)
        assert s.berry_connection == 0.0


def test_geometry_trace_rejects_bad_grid():
    from amt.errors import ArgumentError
    p = DriveProtocol.constant(1.0)
    with pytest.raises(ArgumentError):
        geometry_trace(p, [])
    with pytest.raises(ArgumentError):
        geometry_trace(p, [0.0, 2.0, 1.0])
