import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amt.crossover import (DEFAULT_ETA, CrossoverCurve, Normalization, Stability, activation_run,
                           eta_effective, fs_speed_saturated, fs_speed_saturated_direct,
                           model_for_xi, normalize, normalized_fs_suppression, ordered_map,
                           saturation_occupation, stability_classification, stability_table,
                           sweep_crossover, time_averaged_activation, window_grid, worker_count)
from amt.dynamics import rabi_probability
from amt.errors import ArgumentError, DomainError, UndefinedRatioError
from amt.geometry import fs_speed
from amt.models import ModelFamily, ModelSpec

XI_GRID = np.geomspace(0.05, 2.0, 20)
FAMILIES = [(ModelFamily.TWO_LEVEL, None), (ModelFamily.THREE_LEVEL, None),
            (ModelFamily.FOCK_EVEN, 100)]


@pytest.fixture(scope="module")
def curves():
    return {f: sweep_crossover(f, XI_GRID, n_levels=n) for f, n in FAMILIES}


def test_window_grid():
    grid, window = window_grid()
    assert grid[0] == 0.0 and window.size == 451
    assert window[0] == 0.5 and window[-1] == 5.0
    with pytest.raises(ArgumentError):
        window_grid(n_samples=100)
    with pytest.raises(DomainError):
        window_grid(2.0, 1.0)


@pytest.mark.parametrize("xi", [1e-3, 1e-2, 0.05])
def test_two_level_small_xi_bounded_by_rabi_amplitude(xi):
    p_bar = time_averaged_activation(ModelSpec(ModelFamily.TWO_LEVEL, 0.5, 1.0), xi=xi)
    assert p_bar <= 4 * xi**2 + 1e-10


@pytest.mark.parametrize("eta", [0.3, 0.5, 1.0])
def test_two_level_unregulated_window_average(eta):
    tmin, tmax = 0.5, 5.0
    exact = 0.5 - (math.sin(2 * eta * tmax) - math.sin(2 * eta * tmin)) / (4 * eta * (tmax - tmin))
    got, _ = activation_run(ModelSpec(ModelFamily.TWO_LEVEL, eta, 0.0))
    # trapezoid error bound: h^2/12 * max|f''| with f = sin^2(eta tau)
    h = (tmax - tmin) / 450
    assert abs(got - exact) <= h**2 / 12 * 2 * eta**2 + 1e-14
    # same window average of the closed-form Rabi curve
    tau = np.linspace(tmin, tmax, 451)
    assert got == pytest.approx(np.trapezoid(rabi_probability(eta, 0.0, tau), tau) / 4.5,
                                abs=1e-12)


@pytest.mark.parametrize("family,n", FAMILIES)
def test_zero_coupling_gives_zero(family, n):
    model = ModelSpec(family, 0.0, 1.0, n_levels=n)
    assert time_averaged_activation(model) == 0.0


@pytest.mark.parametrize("family,n", FAMILIES)
def test_normalized_curves(curves, family, n):
    c = curves[family]
    assert c.p_bar[-1] == 1.0
    assert c.p_bar.max() <= 1 + 1e-12
    assert np.all(np.diff(c.p_bar) >= -1e-3)
    assert np.all(np.diff(c.xi) > 0)
    for pt in c.points:
        assert pt.xi == pytest.approx(pt.eta_used / pt.u_used, rel=1e-12)
        assert pt.eta_used == DEFAULT_ETA


def test_two_level_separation(curves):
    # frozen from the closed-form Rabi curve averaged with adaptive quadrature
    assert curves[ModelFamily.TWO_LEVEL].p_bar[0] == pytest.approx(0.007917630542498687,
                                                                   abs=1e-6)
    assert curves[ModelFamily.TWO_LEVEL].p_bar[0] < 0.2


def test_single_point_curve():
    c = sweep_crossover(ModelFamily.THREE_LEVEL, [0.3])
    assert len(c.points) == 1 and c.p_bar[0] == 1.0


def test_raw_normalization_and_meta(curves):
    raw = sweep_crossover(ModelFamily.TWO_LEVEL, XI_GRID, normalization="raw")
    np.testing.assert_array_equal(raw.p_bar, curves[ModelFamily.TWO_LEVEL].p_bar_raw)
    fock = curves[ModelFamily.FOCK_EVEN]
    assert fock.meta["n_levels"] == 100 and fock.meta["subspace_dim"] == 50
    assert fock.meta["normalization"] == "by_max_xi_point"


def test_sweep_validation():
    with pytest.raises(ArgumentError):
        sweep_crossover(ModelFamily.TWO_LEVEL, [0.2, 0.1])
    with pytest.raises(DomainError):
        sweep_crossover(ModelFamily.TWO_LEVEL, [-0.1, 0.1])
    with pytest.raises(UndefinedRatioError):
        normalize([0.1, 0.0], Normalization.BY_MAX_XI_POINT)
    pts = sweep_crossover(ModelFamily.TWO_LEVEL, [0.1, 0.2]).points
    with pytest.raises(ArgumentError):
        CrossoverCurve(pts[::-1], Normalization.RAW, "x")


def test_fixed_u_mapping():
    m = model_for_xi(ModelFamily.TWO_LEVEL, 0.5, u=2.0)
    assert (m.eta, m.u) == (1.0, 2.0)
    m = model_for_xi(ModelFamily.FOCK_EVEN, 0.5, eta=0.5, n_levels=20)
    assert m.u == 1.0 and m.protocol.eta == 0.5


def test_sweep_is_parallel_deterministic():
    a = sweep_crossover(ModelFamily.FOCK_EVEN, XI_GRID[:6], n_levels=40, workers=1)
    b = sweep_crossover(ModelFamily.FOCK_EVEN, XI_GRID[:6], n_levels=40, workers=4)
    np.testing.assert_array_equal(a.p_bar_raw, b.p_bar_raw)


def test_ordered_map_and_worker_env(monkeypatch):
    assert ordered_map(lambda x: x * x, range(10), workers=3) == [x * x for x in range(10)]
    monkeypatch.setenv("AMT_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.setenv("AMT_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("AMT_THREADS", "-1")
    with pytest.raises(ArgumentError):
        worker_count()


# -- stability chain ------------------------------------------------------

def test_eta_effective_examples():
    assert eta_effective(1, 1, 1, 1) == 0.25
    assert eta_effective(0.7, 0, 5.0) == 0.7
    assert eta_effective(0.5, 2, 0.5, 1) == 0.125


@settings(max_examples=100, deadline=None)
@given(eta=st.floats(0.01, 5), u=st.floats(0.01, 10), n1=st.floats(0, 50), n2=st.floats(0, 50))
def test_eta_effective_suppression(eta, u, n1, n2):
    assert eta_effective(eta, u, n1) <= eta
    lo, hi = sorted((n1, n2))
    if hi > lo * (1 + 1e-9) + 1e-12:
        assert eta_effective(eta, u, hi) < eta_effective(eta, u, lo)


def test_saturation_occupation_examples():
    assert saturation_occupation(0.0, 1.0, 1.0) == 0.0
    assert saturation_occupation(0.1, 1.0, 1.6) == pytest.approx(0.25, rel=1e-15)
    assert saturation_occupation(0.4, 1.0, 0.1) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(DomainError):
        saturation_occupation(0.5, 1.0, 0.0)


def test_fs_speed_saturated_examples():
    for eta in (0.1, 0.5, 2.0):
        assert fs_speed_saturated(eta, 0.0) == eta**2 / 8
        assert fs_speed_saturated(eta, 0.0) == fs_speed(1.3, eta)[1]
        assert fs_speed_saturated(eta, 0.25) == 0.0
    assert fs_speed_saturated(0.1, 0.0625) == pytest.approx(3.125e-4, rel=1e-12)


def test_fs_speed_direct_variant():
    eta, u = 0.5, 2.0
    assert fs_speed_saturated_direct(eta, u) == pytest.approx(
        eta**2 / 8 / (1 + math.sqrt(eta * u)) ** 4, rel=1e-14)
    # the two forms differ in general: they share only the unregulated limit
    assert fs_speed_saturated_direct(eta, 1e-14) == pytest.approx(eta**2 / 8, rel=1e-6)


def test_classification():
    assert stability_classification(0.1) is Stability.BOUNDED
    assert stability_classification(0.25) is Stability.CRITICAL
    assert stability_classification(1.0) is Stability.UNSTABLE
    assert stability_classification(0.25 * 0.9 * (1 - 1e-12)) is Stability.BOUNDED
    assert stability_classification(0.25 * 0.9) is Stability.CRITICAL
    assert stability_classification(0.25 * 1.1) is Stability.CRITICAL
    assert stability_classification(0.25 * 1.1 * (1 + 1e-12)) is Stability.UNSTABLE


def test_normalized_suppression():
    assert normalized_fs_suppression(0.8, 0.8) == 1.0
    assert normalized_fs_suppression(0.25, 1.0) == 0.0625
    assert normalized_fs_suppression(0.0, 0.3) == 0.0
    with pytest.raises(DomainError):
        normalized_fs_suppression(0.0, 0.0)


def test_stability_table_rows():
    rows = stability_table([0.1, 0.25, 1.0])
    assert [r["classification"] for r in rows] == ["bounded", "critical", "unstable"]
    assert rows[1]["fs_speed_saturated"] == 0.0
    for r in rows:
        assert r["u"] == pytest.approx(r["eta"] / r["xi"])
        assert 0 < r["fs_suppression"] <= 1
