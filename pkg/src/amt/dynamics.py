"""Time-evolution engines.

* Few-level and truncated-Fock Hamiltonians and their unitary propagation
  (exact Hermitian exponential of the step-midpoint Hamiltonian).
* The nonlinear spectral-flow equation

      i da_n/dt = omega_n(t) a_n + eta sum_m V_nm(t) a_m - U |a_n|**2 a_n

  integrated with fixed-step RK4 and norm monitoring.
* The classical parametric oscillator x'' + Omega(t)**2 x = 0 with its
  adiabatic invariant J = E / Omega.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import (ArgumentError, DomainError, IntegrationError, StructureError,
                     UndefinedRatioError)
from .protocols import DriveProtocol

NORM_TOL = 1e-10


class BasisKind(enum.Enum):
    TWO_LEVEL = "two_level"
    THREE_LEVEL = "three_level"
    FOCK = "fock"
    EVEN_FOCK = "even_fock"
    MODES = "modes"


class Regulator(enum.Enum):
    """Form r(n) of the occupation-dependent detuning U r(n)."""

    KERR_NN1 = "kerr_nn1"  # n (n - 1)
    QUARTIC_N2 = "quartic_n2"  # n**2

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return n * (n - 1.0) if self is Regulator.KERR_NN1 else n * n


@dataclass(frozen=True)
class Basis:
    """Basis label. ``n_levels`` is the Fock cutoff N for FOCK / EVEN_FOCK
    (the even subspace then has ceil(N/2) states) and the mode count for MODES."""

    kind: BasisKind
    n_levels: int | None = None

    def __post_init__(self):
        fixed = {BasisKind.TWO_LEVEL: 2, BasisKind.THREE_LEVEL: 3}
        if self.kind in fixed:
            object.__setattr__(self, "n_levels", fixed[self.kind])
        elif self.n_levels is None or self.n_levels < 1:
            raise ArgumentError(f"{self.kind.value} basis needs a positive n_levels")

    @classmethod
    def two_level(cls):
        return cls(BasisKind.TWO_LEVEL)

    @classmethod
    def three_level(cls):
        return cls(BasisKind.THREE_LEVEL)

    @classmethod
    def fock(cls, n):
        return cls(BasisKind.FOCK, int(n))

    @classmethod
    def even_fock(cls, n):
        return cls(BasisKind.EVEN_FOCK, int(n))

    @classmethod
    def modes(cls, m):
        return cls(BasisKind.MODES, int(m))

    @property
    def dim(self):
        if self.kind is BasisKind.EVEN_FOCK:
            return (self.n_levels + 1) // 2
        return self.n_levels

    @property
    def is_fock(self):
        return self.kind in (BasisKind.FOCK, BasisKind.EVEN_FOCK)

    def level_numbers(self):
        """Physical level index of every basis vector (Fock n for even subspaces)."""
        k = np.arange(self.dim)
        return 2 * k if self.kind is BasisKind.EVEN_FOCK else k

    def label(self):
        if self.kind in (BasisKind.TWO_LEVEL, BasisKind.THREE_LEVEL):
            return self.kind.value
        return f"{self.kind.value}({self.n_levels})"


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray
    basis: Basis

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ArgumentError(
                f"state of shape {amps.shape} does not fit basis {self.basis.label()}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (norm = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis_state(cls, basis: Basis, index=0):
        amps = np.zeros(basis.dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps, basis)

    @classmethod
    def vacuum(cls, basis: Basis):
        return cls.basis_state(basis, 0)

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self):
        return float(np.sum(self.populations))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray
    basis: Basis

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] != self.basis.dim:
            raise ArgumentError(
                f"{m.shape[0]}x{m.shape[0]} operator does not fit basis {self.basis.label()}")
        scale = float(np.max(np.abs(m))) if m.size else 0.0
        if float(np.max(np.abs(m - m.conj().T))) > 1e-12 * scale:
            raise StructureError("operator is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self):
        return self.matrix.shape[0]


# -- builders -------------------------------------------------------------

def _nonneg(**kw):
    for name, v in kw.items():
        if not v >= 0:
            raise DomainError(f"{name} must be non-negative, got {v}")


def build_two_level(eta, u):
    """[[0, eta], [eta, u]]"""
    _nonneg(eta=eta, u=u)
    return HermitianOperator(np.array([[0.0, eta], [eta, u]]), Basis.two_level())


def build_three_level(eta, u):
    """[[0, eta, 0], [eta, 0, eta/sqrt(2)], [0, eta/sqrt(2), u]]"""
    _nonneg(eta=eta, u=u)
    c = eta / math.sqrt(2.0)
    return HermitianOperator(
        np.array([[0.0, eta, 0.0], [eta, 0.0, c], [0.0, c, u]]), Basis.three_level())


def build_fock_hamiltonian(n_levels, omega, u, g, regulator=Regulator.KERR_NN1):
    """Truncated Fock matrix of omega n + u r(n) + g (a^dag^2 + a^2).

    <n+2|H|n> = g sqrt((n+1)(n+2)) for n + 2 < n_levels.
    """
    if int(n_levels) != n_levels or n_levels < 4:
        raise ArgumentError(f"n_levels must be an integer >= 4, got {n_levels}")
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    n_levels = int(n_levels)
    n = np.arange(n_levels, dtype=float)
    h = np.diag(omega * n + u * Regulator(regulator)(n)).astype(complex)
    k = np.arange(n_levels - 2)
    pair = g * np.sqrt((k + 1.0) * (k + 2.0))
    h[k + 2, k] = pair
    h[k, k + 2] = pair
    return HermitianOperator(h, Basis.fock(n_levels))


def project_even_subspace(h: HermitianOperator):
    """Restrict a Fock-space operator to span{|0>, |2>, |4>, ...}."""
    if h.basis.kind is not BasisKind.FOCK:
        raise ArgumentError(f"expected a Fock-basis operator, got {h.basis.label()}")
    m = h.matrix
    even, odd = slice(0, None, 2), slice(1, None, 2)
    leak = float(np.max(np.abs(m[even, odd]), initial=0.0))
    if leak > 1e-14 * max(1.0, float(np.max(np.abs(m)))):
        raise StructureError(f"operator couples even and odd Fock states (|h_eo| = {leak:.3g})")
    return HermitianOperator(m[even, even], Basis.even_fock(h.basis.n_levels))


# -- trajectories ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled evolution: ``states[k]`` is the amplitude vector at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    basis: Basis
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if times.ndim != 1 or states.shape != (times.size, self.basis.dim):
            raise ArgumentError("trajectory times/states shapes do not match")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ArgumentError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def populations(self):
        return np.abs(self.states) ** 2

    @property
    def norms(self):
        return self.populations.sum(axis=1)

    @property
    def mean_n(self):
        """<n> per time in the physical Fock numbering; level index otherwise."""
        return self.populations @ self.basis.level_numbers()

    def index_of(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * max(1.0, abs(t)):
            raise ArgumentError(f"time {t} is not a trajectory sample")
        return k

    def state_at(self, t):
        return QuantumState(self.states[self.index_of(t)], self.basis)

    @property
    def final_state(self):
        return QuantumState(self.states[-1], self.basis)


def _time_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ArgumentError("time grid must be a non-empty 1-d sequence")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ArgumentError("time grid must be strictly increasing")
    return t


def _as_operator(h, basis):
    if isinstance(h, HermitianOperator):
        op = h
    else:
        op = HermitianOperator(np.asarray(h), basis)
    if op.dimension != basis.dim:
        raise ArgumentError(
            f"operator dimension {op.dimension} does not match state dimension {basis.dim}")
    return op


def _check_norms(states, tol, what):
    norms = np.sum(np.abs(states) ** 2, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if not drift <= tol:
        raise IntegrationError(f"{what}: norm drift {drift:.3g} exceeds {tol:.1g}")


def default_linear_step(h: HermitianOperator, omega=None):
    """Largest step with ||H|| dt <= 0.05 (and Omega dt <= 0.01 if given)."""
    spread = float(np.max(np.abs(np.linalg.eigvalsh(h.matrix))))
    dt = math.inf if spread == 0.0 else 0.05 / spread
    if omega is not None:
        dt = min(dt, 0.01 / omega)
    return dt


# target change of the sampled populations when the default step is halved
_HALVING_TOL = 2e-9


def _midpoint_run(h_of_t, basis, psi, t, max_step):
    out = np.empty((t.size, basis.dim), dtype=complex)
    out[0] = psi
    n_steps = 0
    for k in range(1, t.size):
        span = t[k] - t[k - 1]
        m = max(1, math.ceil(span / max_step - 1e-9))
        dt = span / m
        for j in range(m):
            op = _as_operator(h_of_t(t[k - 1] + (j + 0.5) * dt), basis)
            w, v = eigh(op.matrix)
            psi = v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi))
        n_steps += m
        out[k] = psi
    return out, n_steps


def propagate_linear(h_of_t, psi0: QuantumState, t_grid, max_step=None, omega=1.0):
    """Solve i d(psi)/dt = H(t) psi on ``t_grid`` starting from ``psi0`` at t_grid[0].

    ``h_of_t`` is either a fixed operator (matrix or :class:`HermitianOperator`)
    or a callable t -> operator. Every step applies exp(-i H(t_mid) dt); a fixed
    operator is diagonalised once and applied exactly between samples, which
    is the same rule with an arbitrarily coarse step.

    Default step for the time-dependent case: the caps of
    :func:`default_linear_step` at the initial time (``omega`` is the
    characteristic frequency in units of t, 1 in local time), shrunk further
    from a pilot run until halving the step changes the sampled populations
    by about 2e-9.
    """
    t = _time_grid(t_grid)
    basis = psi0.basis
    psi = np.array(psi0.amplitudes)
    out = np.empty((t.size, basis.dim), dtype=complex)
    out[0] = psi

    if not callable(h_of_t):
        op = _as_operator(h_of_t, basis)
        w, v = eigh(op.matrix)
        coeff = v.conj().T @ psi
        phases = np.exp(-1j * np.outer(t[1:] - t[0], w))
        out[1:] = (phases * coeff) @ v.T
        _check_norms(out, 1e-9, "linear propagation")
        return Trajectory(t, out, basis, meta={"propagator": "exact-static"})

    if max_step is not None:
        if not max_step > 0:
            raise DomainError(f"max_step must be positive, got {max_step}")
        out, n_steps = _midpoint_run(h_of_t, basis, psi, t, max_step)
    else:
        # pilot at the cap and half of it; the rule is second order, so the
        # halving change scales as dt**2 and the cap is shrunk accordingly
        cap = default_linear_step(_as_operator(h_of_t(t[0]), basis), omega)
        coarse, _ = _midpoint_run(h_of_t, basis, psi, t, cap)
        out, n_steps = _midpoint_run(h_of_t, basis, psi, t, 0.5 * cap)
        change = float(np.max(np.abs(np.abs(coarse) ** 2 - np.abs(out) ** 2)))
        max_step = 0.5 * cap
        if change > _HALVING_TOL:
            max_step = cap * math.sqrt(_HALVING_TOL / change)
            out, n_steps = _midpoint_run(h_of_t, basis, psi, t, max_step)
    _check_norms(out, 1e-9, "linear propagation")
    return Trajectory(t, out, basis, meta={"propagator": "midpoint-exponential",
                                           "max_step": max_step, "steps": n_steps})


def rabi_probability(eta, u, t):
    """Closed-form excited-state probability of [[0, eta], [eta, u]] from |0>."""
    rate = math.sqrt(eta**2 + 0.25 * u**2)
    if rate == 0.0:
        return np.zeros_like(np.asarray(t, dtype=float))
    return eta**2 / rate**2 * np.sin(rate * np.asarray(t, dtype=float)) ** 2


# -- nonlinear spectral flow ----------------------------------------------

def _as_function(x):
    if callable(x):
        return x
    value = np.asarray(x)
    return lambda t: value


def propagate_spectral_flow(omega_n, v_nm, eta, u, a0: QuantumState, t_grid,
                            dt=None, norm_tol=1e-8):
    """Integrate the nonlinear spectral-flow equation with classical RK4.

    ``omega_n`` (length-M vector) and ``v_nm`` (M x M, Hermitian) may be
    constants or callables of t. The flow conserves sum |a_n|**2 exactly; the
    integrator's drift is monitored at every grid sample and an
    :class:`IntegrationError` is raised once it exceeds ``norm_tol``.
    Default step: 0.01 / (max|omega_n| + eta ||V|| + |U|) at t_grid[0].
    """
    t = _time_grid(t_grid)
    om_f, v_f = _as_function(omega_n), _as_function(v_nm)
    dim = a0.basis.dim

    def coupling(s):
        v = np.asarray(v_f(s), dtype=complex)
        if v.shape != (dim, dim):
            raise ArgumentError(f"V has shape {v.shape}, expected {(dim, dim)}")
        scale = max(1.0, float(np.max(np.abs(v))))
        if float(np.max(np.abs(v - v.conj().T))) > 1e-12 * scale:
            raise StructureError(f"coupling matrix V is not Hermitian at t={s}")
        return v

    def frequencies(s):
        om = np.asarray(om_f(s), dtype=float)
        if om.shape != (dim,):
            raise ArgumentError(f"omega_n has shape {om.shape}, expected {(dim,)}")
        return om

    def rhs(s, a):
        lin = frequencies(s) * a + eta * (coupling(s) @ a)
        return -1j * (lin - u * np.abs(a) ** 2 * a)

    if dt is None:
        scale = (float(np.max(np.abs(frequencies(t[0]))))
                 + abs(eta) * float(np.linalg.norm(coupling(t[0]), 2)) + abs(u))
        dt = math.inf if scale == 0.0 else 0.01 / scale
    elif not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")

    a = np.array(a0.amplitudes)
    out = np.empty((t.size, dim), dtype=complex)
    out[0] = a
    for k in range(1, t.size):
        span = t[k] - t[k - 1]
        m = max(1, math.ceil(span / dt - 1e-9))
        h = span / m
        s = t[k - 1]
        for _ in range(m):
            k1 = rhs(s, a)
            k2 = rhs(s + 0.5 * h, a + 0.5 * h * k1)
            k3 = rhs(s + 0.5 * h, a + 0.5 * h * k2)
            k4 = rhs(s + h, a + h * k3)
            a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            s += h
            drift = abs(float(np.vdot(a, a).real) - 1.0)
            if not drift <= norm_tol:
                raise IntegrationError(
                    f"spectral flow norm drift {drift:.3g} at t={s:.6g} exceeds "
                    f"{norm_tol:.1g}; retry with dt <= {0.5 * h:.3g}")
        out[k] = a
    return Trajectory(t, out, a0.basis, meta={"integrator": "rk4", "dt": dt})


# -- classical parametric oscillator --------------------------------------

@dataclass(frozen=True, eq=False)
class ClassicalTrajectory:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    @property
    def energy(self):
        return 0.5 * (self.v**2 + self.omega**2 * self.x**2)

    @property
    def adiabatic_invariant(self):
        return self.energy / self.omega


_GL = math.sqrt(3.0) / 6.0


def evolve_classical_oscillator(p: DriveProtocol, x0, v0, t_grid, phase_step=0.02):
    """Integrate x'' + Omega(t)**2 x = 0 with the fourth-order Magnus method.

    Each step is the exact exponential of the two-point Gauss-Legendre Magnus
    generator for y' = [[0, 1], [-Omega**2, 0]] y, so every step map has unit
    determinant (symplectic) and a constant protocol is integrated exactly.
    Steps satisfy Omega_max * h <= ``phase_step`` on each grid interval (all
    protocol kinds are monotone, so the interval endpoints bound Omega).
    """
    t = _time_grid(t_grid)
    om_grid = p.omega(t)
    xs = np.empty(t.size)
    vs = np.empty(t.size)
    x, v = float(x0), float(v0)
    xs[0], vs[0] = x, v
    for k in range(1, t.size):
        span = t[k] - t[k - 1]
        om_max = max(om_grid[k - 1], om_grid[k])
        m = max(1, math.ceil(span * om_max / phase_step))
        h = span / m
        starts = t[k - 1] + h * np.arange(m)
        w1 = p.omega(np.minimum(starts + (0.5 - _GL) * h, t[k])) ** 2
        w2 = p.omega(np.minimum(starts + (0.5 + _GL) * h, t[k])) ** 2
        # Magnus generator [[a, b], [c, -a]]
        a = (math.sqrt(3.0) / 12.0) * h**2 * (w2 - w1)
        b = h
        c = -0.5 * h * (w1 + w2)
        s2 = a * a + b * c
        s = np.sqrt(np.abs(s2))
        with np.errstate(invalid="ignore", divide="ignore"):
            ch = np.where(s2 < 0, np.cos(s), np.cosh(s))
            sh = np.where(s == 0, 1.0, np.where(s2 < 0, np.sin(s), np.sinh(s)) / s)
        m00 = (ch + sh * a).tolist()
        m01 = (sh * b).tolist()
        m10 = (sh * c).tolist()
        m11 = (ch - sh * a).tolist()
        for j in range(m):
            x, v = m00[j] * x + m01[j] * v, m10[j] * x + m11[j] * v
        xs[k], vs[k] = x, v
    return ClassicalTrajectory(times=t, x=xs, v=vs, omega=np.asarray(om_grid, float))


def max_invariant_change(p: DriveProtocol, t0, t1, phase_step=0.02):
    """Worst-case relative change of J = E/Omega between t0 and t1 over all initial phases.

    In scaled coordinates q = sqrt(Omega) x, w = v / sqrt(Omega) one has
    J = (q**2 + w**2) / 2 and the evolution is a linear map M with det M = 1,
    so J(t1)/J(t0) ranges over [s_min**2, s_max**2] with s the singular values
    of M. Returns s_max**2 - 1 (>= 1 - s_min**2).
    """
    grid = [t0, t1]
    r0, r1 = math.sqrt(p.omega(t0)), math.sqrt(p.omega(t1))
    cols = []
    for q0, w0 in ((1.0, 0.0), (0.0, 1.0)):
        tr = evolve_classical_oscillator(p, q0 / r0, w0 * r0, grid, phase_step)
        cols.append([r1 * tr.x[-1], tr.v[-1] / r1])
    s = np.linalg.svd(np.array(cols).T, compute_uv=False)
    return float(s[0] ** 2 - 1.0)


# -- observables ----------------------------------------------------------

def mean_occupation(s: QuantumState):
    """sum_n n |c_n|**2 in the physical Fock numbering."""
    if not s.basis.is_fock:
        raise ArgumentError(f"mean occupation needs a Fock basis, got {s.basis.label()}")
    return float(s.populations @ s.basis.level_numbers())


def leakage_from_state(s: QuantumState):
    """P2 / (P1 + P2) for a three-level state."""
    if s.basis.kind is not BasisKind.THREE_LEVEL:
        raise ArgumentError(f"leakage fraction needs a three-level state, got {s.basis.label()}")
    _, p1, p2 = s.populations
    if p1 + p2 < 1e-15:
        raise UndefinedRatioError("P1 + P2 vanishes; leakage fraction undefined")
    return float(p2 / (p1 + p2))


def leakage_fraction(traj: Trajectory, t):
    return leakage_from_state(traj.state_at(t))


def parity_populations(traj: Trajectory):
    """(even, odd) total population per sample of a full Fock trajectory."""
    if traj.basis.kind is not BasisKind.FOCK:
        raise ArgumentError("parity split needs a full Fock-basis trajectory")
    pops = traj.populations
    return pops[:, 0::2].sum(axis=1), pops[:, 1::2].sum(axis=1)
