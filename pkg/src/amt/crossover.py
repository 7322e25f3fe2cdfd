"""Crossover analysis in the ratio xi = eta / U.

Time-averaged activation sweeps plus the closed-form stability chain
(effective non-adiabaticity, saturation occupancy, suppressed FS speed and
the xi ~ 1/4 threshold).
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Regulator
from .errors import ArgumentError, DomainError, UndefinedRatioError
from .models import ModelFamily, ModelSpec, activation, model_trajectory
from .protocols import DriveProtocol

TAU_MIN = 0.5
TAU_MAX = 5.0
WINDOW_SAMPLES = 451  # d tau = 0.01 across [TAU_MIN, TAU_MAX]
DEFAULT_ETA = 0.5
XI_CRIT = 0.25


class Normalization(enum.Enum):
    RAW = "raw"
    BY_MAX_XI_POINT = "by_max_xi_point"


class Stability(enum.Enum):
    BOUNDED = "bounded"
    CRITICAL = "critical"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class CrossoverPoint:
    xi: float
    p_bar_raw: float
    p_bar: float
    eta_used: float
    u_used: float
    model: ModelSpec

    def __post_init__(self):
        if not self.xi > 0 or not self.p_bar_raw >= 0:
            raise DomainError(f"invalid crossover point xi={self.xi}, p_bar={self.p_bar_raw}")
        if abs(self.xi - self.eta_used / self.u_used) > 1e-12 * self.xi:
            raise DomainError("xi does not equal eta_used / u_used")


@dataclass(frozen=True)
class CrossoverCurve:
    points: tuple
    normalization: Normalization
    family: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xi = [p.xi for p in self.points]
        if any(b <= a for a, b in zip(xi, xi[1:])):
            raise ArgumentError("crossover points must have strictly increasing xi")

    @property
    def xi(self):
        return np.array([p.xi for p in self.points])

    @property
    def p_bar(self):
        return np.array([p.p_bar for p in self.points])

    @property
    def p_bar_raw(self):
        return np.array([p.p_bar_raw for p in self.points])


def window_grid(tau_min=TAU_MIN, tau_max=TAU_MAX, n_samples=WINDOW_SAMPLES):
    """Propagation grid: the drive start tau=0 followed by the averaging window."""
    if not 0 <= tau_min < tau_max:
        raise DomainError(f"need 0 <= tau_min < tau_max, got [{tau_min}, {tau_max}]")
    if n_samples < 200:
        raise ArgumentError(f"averaging window needs >= 200 samples, got {n_samples}")
    window = np.linspace(tau_min, tau_max, int(n_samples))
    if tau_min == 0:
        return window, window
    return np.concatenate([[0.0], window]), window


def activation_run(model: ModelSpec, tau_min=TAU_MIN, tau_max=TAU_MAX,
                   n_samples=WINDOW_SAMPLES, max_step=None):
    """Return (P_bar, trajectory); the trajectory covers [0, tau_max]."""
    grid, window = window_grid(tau_min, tau_max, n_samples)
    traj = model_trajectory(model, grid, max_step=max_step)
    p = activation(model, traj)[-window.size:]
    p_bar = float(np.trapezoid(p, window) / (tau_max - tau_min))
    return max(p_bar, 0.0), traj


def time_averaged_activation(model: ModelSpec, xi=None, tau_min=TAU_MIN, tau_max=TAU_MAX,
                             n_samples=WINDOW_SAMPLES, max_step=None):
    """Window average of P(xi, tau) over [tau_min, tau_max] (trapezoidal rule).

    With ``xi`` given the model is first remapped to u = eta / xi.
    """
    if xi is not None:
        model = model.with_xi(xi)
    return activation_run(model, tau_min, tau_max, n_samples, max_step)[0]


def model_for_xi(family, xi, eta=DEFAULT_ETA, u=None, n_levels=None,
                 regulator=Regulator.KERR_NN1, omega0=1.0, protocol=None):
    """Map xi to (eta, U): eta fixed and U = eta/xi by default, or U fixed
    and eta = xi U when ``u`` is given."""
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    family = ModelFamily(family)
    if u is None:
        eta_used, u_used = eta, eta / xi
    else:
        eta_used, u_used = xi * u, u
    if family in (ModelFamily.FOCK, ModelFamily.FOCK_EVEN) and protocol is None:
        protocol = DriveProtocol.constant_eta(omega0, eta_used)
    return ModelSpec(family, eta_used, u_used, omega0=omega0, n_levels=n_levels,
                     regulator=regulator, protocol=protocol)


def worker_count():
    """Worker cap from AMT_THREADS (0 or unset: one per CPU)."""
    raw = os.environ.get("AMT_THREADS", "").strip()
    n = int(raw) if raw else 0
    if n < 0:
        raise ArgumentError(f"AMT_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def ordered_map(fn, items, workers=None):
    """Parallel map whose output order follows ``items``."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def normalize(values, normalization):
    values = np.asarray(values, dtype=float)
    if Normalization(normalization) is Normalization.RAW:
        return values
    ref = values[-1]
    if ref <= 0:
        raise UndefinedRatioError("activation at the largest xi is zero; cannot normalize")
    return values / ref


def sweep_crossover(family, xi_grid, normalization=Normalization.BY_MAX_XI_POINT,
                    eta=DEFAULT_ETA, u=None, n_levels=None, regulator=Regulator.KERR_NN1,
                    omega0=1.0, protocol=None, tau_min=TAU_MIN, tau_max=TAU_MAX,
                    n_samples=WINDOW_SAMPLES, max_step=None, workers=None):
    """Time-averaged activation at every xi in ``xi_grid``.

    ``family`` is a :class:`ModelFamily`; FOCK_EVEN needs ``n_levels`` (the
    full Fock cutoff N).
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.ndim != 1 or xi_grid.size == 0:
        raise ArgumentError("xi grid must be a non-empty 1-d sequence")
    if np.any(xi_grid <= 0):
        raise DomainError("xi grid values must be positive")
    if xi_grid.size > 1 and not np.all(np.diff(xi_grid) > 0):
        raise ArgumentError("xi grid must be strictly increasing")
    normalization = Normalization(normalization)
    family = ModelFamily(family)
    models = [model_for_xi(family, x, eta=eta, u=u, n_levels=n_levels, regulator=regulator,
                           omega0=omega0, protocol=protocol) for x in xi_grid]
    raw = ordered_map(lambda m: time_averaged_activation(
        m, tau_min=tau_min, tau_max=tau_max, n_samples=n_samples, max_step=max_step),
        models, workers)
    norm = normalize(raw, normalization)
    points = tuple(CrossoverPoint(float(x), float(r), float(v), m.eta, m.u, m)
                   for x, r, v, m in zip(xi_grid, raw, norm, models))
    meta = {
        "family": family.value if n_levels is None else f"{family.value}({n_levels})",
        "normalization": normalization.value,
        "protocol": "constant_eta" if protocol is None else protocol.kind.value,
        "tau_window": f"[{tau_min}, {tau_max}]",
        "window_samples": int(n_samples),
        "propagator": "exact-static" if models[0].is_static and max_step is None
                      else f"midpoint-exponential(max_step={max_step})",
        "xi_map": "u = eta/xi (eta fixed)" if u is None else "eta = xi*u (u fixed)",
    }
    if n_levels is not None:
        meta["n_levels"] = n_levels
        if family is ModelFamily.FOCK_EVEN:
            meta["subspace_dim"] = models[0].basis.dim
    return CrossoverCurve(points, normalization, meta["family"], meta)


# -- stability chain ------------------------------------------------------

def _nonneg(**kw):
    for name, v in kw.items():
        if not v >= 0:
            raise DomainError(f"{name} must be non-negative, got {v}")


def eta_effective(eta, u, mean_n, omega0=1.0):
    """eta / (1 + U <n> / Omega0)**2"""
    _nonneg(eta=eta, u=u, mean_n=mean_n)
    if not omega0 > 0:
        raise DomainError(f"omega0 must be positive, got {omega0}")
    return eta / (1.0 + u * mean_n / omega0) ** 2


def saturation_occupation(eta, omega0, u):
    """Order-of-magnitude saturation occupancy sqrt(eta Omega0 / U).

    A scaling estimate from the gain/detuning balance, not an exact value.
    """
    _nonneg(eta=eta)
    if not omega0 > 0:
        raise DomainError(f"omega0 must be positive, got {omega0}")
    if not u > 0:
        raise DomainError("no saturation without a regulator (u must be > 0)")
    return math.sqrt(eta * omega0 / u)


def fs_speed_saturated(eta, xi):
    """(eta**2 / 8) (1 - 2 sqrt(xi))**2: the small-xi suppressed FS speed squared."""
    _nonneg(eta=eta, xi=xi)
    return 0.125 * eta**2 * (1.0 - 2.0 * math.sqrt(xi)) ** 2


def fs_speed_saturated_direct(eta, u, omega0=1.0):
    """eta_eff**2 / 8 with <n> = sqrt(eta Omega0 / U) substituted, unexpanded.

    Equals (eta**2/8) / (1 + sqrt(eta U / Omega0))**4.
    """
    n_sat = saturation_occupation(eta, omega0, u)
    return 0.125 * eta_effective(eta, u, n_sat, omega0) ** 2


def stability_classification(xi, band=0.1):
    """Bounded below 0.25 (1 - band), Unstable above 0.25 (1 + band)."""
    _nonneg(xi=xi)
    if not 0 <= band < 1:
        raise DomainError(f"band must lie in [0, 1), got {band}")
    if xi < XI_CRIT * (1.0 - band):
        return Stability.BOUNDED
    if xi > XI_CRIT * (1.0 + band):
        return Stability.UNSTABLE
    return Stability.CRITICAL


def normalized_fs_suppression(eta_eff, eta):
    """(eta_eff / eta)**2 in [0, 1]."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    if not 0 <= eta_eff <= eta:
        raise DomainError(f"eta_eff must lie in [0, eta], got {eta_eff}")
    return (eta_eff / eta) ** 2


STABILITY_COLUMNS = ("xi", "classification", "eta", "u", "n_sat", "eta_eff",
                     "fs_suppression", "fs_speed_unregulated", "fs_speed_saturated",
                     "fs_speed_saturated_direct")


def stability_table(xi_grid, eta=DEFAULT_ETA, omega0=1.0, band=0.1):
    """Rows of the closed-form chain for each xi (U = eta / xi).

    ``fs_speed_saturated`` is the small-xi expression in sqrt(xi);
    ``fs_speed_saturated_direct`` substitutes the saturation occupancy into
    eta_eff without expanding, which brings in sqrt(eta U / Omega0) instead.
    """
    rows = []
    for xi in np.asarray(xi_grid, dtype=float):
        if not xi > 0:
            raise DomainError(f"xi must be positive, got {xi}")
        u = eta / xi
        n_sat = saturation_occupation(eta, omega0, u)
        e_eff = eta_effective(eta, u, n_sat, omega0)
        rows.append({
            "xi": float(xi),
            "classification": stability_classification(xi, band).value,
            "eta": eta,
            "u": u,
            "n_sat": n_sat,
            "eta_eff": e_eff,
            "fs_suppression": normalized_fs_suppression(e_eff, eta) if eta > 0 else 1.0,
            "fs_speed_unregulated": 0.125 * eta**2,
            "fs_speed_saturated": fs_speed_saturated(eta, xi),
            "fs_speed_saturated_direct": fs_speed_saturated_direct(eta, u, omega0),
        })
    return rows


# -- saturation scaling -----------------------------------------------------

@dataclass(frozen=True)
class SaturationStudy:
    drive_ratio: np.ndarray  # eta Omega0 / U
    mean_n: np.ndarray
    slope: float
    meta: dict


def saturation_scaling(xi_grid, eta=DEFAULT_ETA, n_levels=100, omega0=1.0,
                       regulator=Regulator.KERR_NN1, tau_min=TAU_MIN, tau_max=200.0,
                       n_samples=20001, workers=None):
    """Long-time average <n> of the even-subspace Fock model versus eta Omega0 / U.

    Returns the least-squares slope of log <n>_sat against log(eta Omega0/U).
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.size < 2:
        raise ArgumentError("saturation scaling needs at least two xi values")
    models = [model_for_xi(ModelFamily.FOCK_EVEN, x, eta=eta, n_levels=n_levels,
                           regulator=regulator, omega0=omega0) for x in xi_grid]
    mean_n = np.array(ordered_map(lambda m: time_averaged_activation(
        m, tau_min=tau_min, tau_max=tau_max, n_samples=n_samples), models, workers))
    ratio = np.array([eta * omega0 / m.u for m in models])
    slope = float(np.polyfit(np.log(ratio), np.log(mean_n), 1)[0])
    meta = {"eta": eta, "n_levels": n_levels, "tau_window": f"[{tau_min}, {tau_max}]",
            "regulator": Regulator(regulator).value}
    return SaturationStudy(ratio, mean_n, slope, meta)


__all__ = [
    "CrossoverCurve", "CrossoverPoint", "Normalization", "Stability", "SaturationStudy",
    "activation_run", "eta_effective", "fs_speed_saturated", "fs_speed_saturated_direct",
    "model_for_xi", "normalize", "normalized_fs_suppression", "ordered_map",
    "saturation_occupation", "saturation_scaling", "stability_classification",
    "stability_table", "sweep_crossover", "time_averaged_activation", "window_grid",
    "worker_count",
]
