"""Projective-space geometry of the instantaneous oscillator vacuum.

The instantaneous ground state of H(t) = p**2/2 + Omega(t)**2 x**2/2 is the
real Gaussian

    psi_Omega(x) = (Omega/pi)**(1/4) * exp(-Omega x**2 / 2).

Two such states have the closed-form overlap

    <psi_a|psi_b> = (a b)**(1/4) * sqrt(2 / (a + b)),

so every finite-difference quantity below is built from exact overlaps and
no spatial grid is ever introduced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError, StepSizeError
from .protocols import DriveProtocol

_EPS = np.finfo(float).eps


def _check_positive(name, value):
    if not np.all(np.asarray(value) > 0.0):
        raise DomainError(f"{name} must be positive, got {value!r}")


def gaussian_vacuum_overlap(omega1, omega2):
    """Overlap of two instantaneous vacua; symmetric, in (0, 1]."""
    _check_positive("omega1", omega1)
    _check_positive("omega2", omega2)
    a, b = np.asarray(omega1, float), np.asarray(omega2, float)
    # rounding can push equal arguments a hair above 1
    out = np.minimum((a * b) ** 0.25 * np.sqrt(2.0 / (a + b)), 1.0)
    return float(out) if out.ndim == 0 else out


def vacuum_infidelity(omega1, omega2):
    """1 - |<psi_1|psi_2>|**2, evaluated without cancellation.

    Uses 1 - 2 sqrt(ab)/(a+b) = (sqrt(a) - sqrt(b))**2 / (a + b).
    """
    _check_positive("omega1", omega1)
    _check_positive("omega2", omega2)
    a, b = np.asarray(omega1, float), np.asarray(omega2, float)
    out = (np.sqrt(a) - np.sqrt(b)) ** 2 / (a + b)
    return float(out) if out.ndim == 0 else out


def fs_metric_tt_analytic(omega, omega_dot):
    """g_tt = (omega_dot / omega)**2 / 8; exactly 0 for a static frequency."""
    _check_positive("omega", omega)
    if omega_dot == 0:
        return 0.0
    return 0.125 * (omega_dot / omega) ** 2


def _stencil(p, t, points):
    try:
        return p.omega(np.asarray(points, float))
    except DomainError as exc:
        raise DomainError(f"finite-difference stencil around t={t} leaves the protocol domain: {exc}") from None


def _default_delta(p, t, delta):
    if delta is None:
        return 1e-4 / p.omega(t)
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    return float(delta)


def fs_metric_tt_numeric(p: DriveProtocol, t, delta=None, richardson=True):
    """Fubini-Study metric g_tt from overlaps of neighbouring vacua.

    The symmetric stencil E(d) = [1 - |<psi(t - d/2)|psi(t + d/2)>|**2] / d**2
    has an even error series g_tt + c d**2 + ...; with ``richardson`` the
    estimates at d and d/2 are combined as (4 E(d/2) - E(d)) / 3.
    Default d = 1e-4 / Omega(t).
    """
    delta = _default_delta(p, t, delta)
    om = p.omega(t)
    steps = [delta, 0.5 * delta] if richardson else [delta]
    est = []
    for d in steps:
        lo, hi = _stencil(p, t, [t - 0.5 * d, t + 0.5 * d])
        jump = abs(hi - lo)
        infid = vacuum_infidelity(lo, hi)
        if p.omega_dot(t) != 0.0 and (infid == 0.0 or _EPS * om > 1e-4 * jump):
            raise StepSizeError(
                f"delta={delta:.3g} too small to resolve Omega variation at t={t}; "
                "increase delta")
        est.append(infid / d**2)
    if richardson:
        return (4.0 * est[1] - est[0]) / 3.0
    return est[0]


def berry_connection_numeric(p: DriveProtocol, t, delta=None, richardson=True):
    """Finite-difference estimate of A_t = i <psi|d_t psi> in the real gauge.

    <psi(t)|d_t psi(t)> is approximated by the centred difference of the
    real overlaps <psi(t)|psi(t +- d)>; the result is returned as a complex
    number (purely imaginary in this gauge).
    """
    delta = _default_delta(p, t, delta)
    om = p.omega(t)
    steps = [delta, 0.5 * delta] if richardson else [delta]
    est = []
    for d in steps:
        lo, hi = _stencil(p, t, [t - d, t + d])
        f_lo = vacuum_infidelity(om, lo)
        f_hi = vacuum_infidelity(om, hi)
        # sqrt(1 - a) - sqrt(1 - b) = (b - a) / (sqrt(1 - a) + sqrt(1 - b))
        diff = (f_lo - f_hi) / (math.sqrt(1.0 - f_hi) + math.sqrt(1.0 - f_lo))
        est.append(diff / (2.0 * d))
    d_psi = (4.0 * est[1] - est[0]) / 3.0 if richardson else est[0]
    return 1j * d_psi


def qgt_tt(omega, eta):
    """tt-component of the quantum geometric tensor, eta**2 omega**2 / 8."""
    _check_positive("omega", omega)
    if eta < 0:
        raise DomainError(f"eta must be non-negative, got {eta}")
    return 0.125 * eta**2 * omega**2


def eta_from_qgt(q_tt, omega):
    """Invert :func:`qgt_tt`: eta = sqrt(8 q_tt) / omega."""
    _check_positive("omega", omega)
    if q_tt < 0:
        raise DomainError(f"q_tt must be non-negative, got {q_tt}")
    return math.sqrt(8.0 * q_tt) / omega


def fs_speed(omega, eta):
    """Return (ds/dt, (ds/dtau)**2) for the instantaneous vacuum."""
    _check_positive("omega", omega)
    if eta < 0:
        raise DomainError(f"eta must be non-negative, got {eta}")
    return omega * eta / (2.0 * math.sqrt(2.0)), 0.125 * eta**2


@dataclass(frozen=True)
class GeometrySample:
    t: float
    omega: float
    eta: float
    g_tt: float
    q_tt: float
    berry_connection: float
    fs_speed_dt: float
    fs_speed_dtau_sq: float

    FIELDS = ("t", "omega", "eta", "g_tt", "q_tt", "berry_connection",
              "fs_speed_dt", "fs_speed_dtau_sq")

    def row(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


def geometry_trace(p: DriveProtocol, grid):
    """Analytic geometry along ``grid``; one :class:`GeometrySample` per point."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ArgumentError("time grid must be a non-empty 1-d sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ArgumentError("time grid must be strictly increasing")
    om = p.omega(grid)
    om_dot = p.omega_dot(grid)
    eta = p.eta_of(grid)
    out = []
    for t, w, wd, e in zip(grid, om, om_dot, eta):
        g = fs_metric_tt_analytic(float(w), float(wd))
        ds_dt, ds_dtau_sq = fs_speed(float(w), float(e))
        out.append(GeometrySample(
            t=float(t), omega=float(w), eta=float(e), g_tt=g,
            q_tt=qgt_tt(float(w), float(e)), berry_connection=0.0,
            fs_speed_dt=ds_dt, fs_speed_dtau_sq=ds_dtau_sq))
    return out
