"""Model specifications shared by the crossover and convergence studies.

All models are evolved in dimensionless local time tau (d tau = Omega dt).
The regulator ``u`` is normalised to the instantaneous spectral scale, so in
local time the Fock Hamiltonian is

    H_tau = n + u r(n) + (eta(tau) / 4) (a^dag^2 + a^2),

i.e. the lab-frame H = Omega n + U r(n) + G (a^dag^2 + a^2) divided by
Omega(t), with G = eta Omega / 4 and U = u Omega. The few-level models use
the 2x2 / 3x3 matrices directly with coupling eta(tau). With the default
constant-eta protocol every H_tau is time independent.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (Basis, QuantumState, Regulator, build_fock_hamiltonian,
                       build_three_level, build_two_level, project_even_subspace,
                       propagate_linear, propagate_spectral_flow)
from .errors import ArgumentError, DomainError
from .protocols import DriveProtocol, ProtocolKind


class ModelFamily(enum.Enum):
    TWO_LEVEL = "two_level"
    THREE_LEVEL = "three_level"
    FOCK = "fock"
    FOCK_EVEN = "fock_even"
    SPECTRAL_FLOW = "spectral_flow"


@dataclass(frozen=True)
class ModelSpec:
    """Which system to evolve and with what parameters.

    ``protocol`` is optional; without it (or with a constant-eta protocol) the
    coupling is the constant ``eta``. Any other protocol makes the coupling
    follow eta(t(tau)) of that protocol, and ``eta`` only enters through
    ``xi = eta / u``.
    """

    family: ModelFamily
    eta: float
    u: float
    omega0: float = 1.0
    n_levels: int | None = None
    regulator: Regulator = Regulator.KERR_NN1
    protocol: DriveProtocol | None = None

    def __post_init__(self):
        if not isinstance(self.family, ModelFamily):
            object.__setattr__(self, "family", ModelFamily(self.family))
        if not isinstance(self.regulator, Regulator):
            object.__setattr__(self, "regulator", Regulator(self.regulator))
        if not self.eta >= 0 or not self.u >= 0:
            raise DomainError(f"eta and u must be non-negative (eta={self.eta}, u={self.u})")
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if self.family in (ModelFamily.FOCK, ModelFamily.FOCK_EVEN):
            if self.n_levels is None or self.n_levels < 4:
                raise ArgumentError("Fock models need n_levels >= 4")
        if self.family is ModelFamily.SPECTRAL_FLOW and self.n_levels is None:
            object.__setattr__(self, "n_levels", 3)

    @property
    def xi(self):
        if self.u == 0:
            return np.inf
        return self.eta / self.u

    def with_xi(self, xi):
        """Same model with u = eta / xi (eta held fixed)."""
        if not xi > 0:
            raise DomainError(f"xi must be positive, got {xi}")
        return replace(self, u=self.eta / xi)

    @property
    def basis(self):
        f = self.family
        if f is ModelFamily.TWO_LEVEL:
            return Basis.two_level()
        if f is ModelFamily.THREE_LEVEL:
            return Basis.three_level()
        if f is ModelFamily.FOCK:
            return Basis.fock(self.n_levels)
        if f is ModelFamily.FOCK_EVEN:
            return Basis.even_fock(self.n_levels)
        return Basis.modes(self.n_levels)

    @property
    def is_static(self):
        p = self.protocol
        return p is None or p.kind in (ProtocolKind.CONSTANT_ETA, ProtocolKind.CONSTANT)

    def coupling(self, tau):
        """eta at local time tau (measured from the protocol's t_start)."""
        p = self.protocol
        if p is None or p.kind is ProtocolKind.CONSTANT_ETA:
            return self.eta
        return float(p.eta_of(p.time_at_local_time(p.t_start, tau)))

    def hamiltonian(self, tau=0.0):
        eta = self.coupling(tau)
        f = self.family
        if f is ModelFamily.TWO_LEVEL:
            return build_two_level(eta, self.u)
        if f is ModelFamily.THREE_LEVEL:
            return build_three_level(eta, self.u)
        if f in (ModelFamily.FOCK, ModelFamily.FOCK_EVEN):
            h = build_fock_hamiltonian(self.n_levels, 1.0, self.u, eta / 4.0, self.regulator)
            return h if f is ModelFamily.FOCK else project_even_subspace(h)
        raise ArgumentError("the spectral-flow model has no linear Hamiltonian")

    # spectral-flow ingredients: omega_n = n, nearest-neighbour V
    def flow_terms(self):
        m = self.n_levels
        v = np.zeros((m, m))
        k = np.arange(m - 1)
        v[k, k + 1] = v[k + 1, k] = 1.0
        return np.arange(m, dtype=float), v

    def describe(self):
        out = {"family": self.family.value, "eta": self.eta, "u": self.u,
               "omega0": self.omega0}
        if self.n_levels is not None:
            out["n_levels"] = self.n_levels
            if self.family is ModelFamily.FOCK_EVEN:
                out["subspace_dim"] = self.basis.dim
        if self.family in (ModelFamily.FOCK, ModelFamily.FOCK_EVEN):
            out["regulator"] = self.regulator.value
        out["protocol"] = "constant_eta" if self.protocol is None else self.protocol.kind.value
        return out


def model_trajectory(model: ModelSpec, tau_grid, max_step=None, norm_tol=1e-8):
    """Evolve ``model`` from its lowest basis state over ``tau_grid``.

    ``tau_grid[0]`` is the start of the drive. Static models are propagated
    exactly; for time-dependent ones ``max_step`` bounds the midpoint step
    (RK4 step for the spectral-flow family, whose norm monitor uses
    ``norm_tol``).
    """
    basis = model.basis
    psi0 = QuantumState.vacuum(basis)
    tau = np.asarray(tau_grid, dtype=float)
    if model.family is ModelFamily.SPECTRAL_FLOW:
        om, v = model.flow_terms()
        eta = model.eta if model.is_static else (lambda s: model.coupling(s))
        if callable(eta):
            # eta(tau) enters as a time-dependent scaling of V
            return propagate_spectral_flow(om, lambda s: eta(s - tau[0]) * v, 1.0,
                                           model.u, psi0, tau, dt=max_step, norm_tol=norm_tol)
        return propagate_spectral_flow(om, v, eta, model.u, psi0, tau, dt=max_step,
                                       norm_tol=norm_tol)
    if model.is_static and max_step is None:
        return propagate_linear(model.hamiltonian(), psi0, tau)
    if model.is_static:
        h = model.hamiltonian()
        return propagate_linear(lambda s: h, psi0, tau, max_step=max_step)
    return propagate_linear(lambda s: model.hamiltonian(s - tau[0]), psi0, tau,
                            max_step=max_step)


def activation(model: ModelSpec, traj):
    """P(xi, tau): excited / top-level probability, or <n> for Fock models."""
    f = model.family
    if f in (ModelFamily.FOCK, ModelFamily.FOCK_EVEN):
        return traj.mean_n
    return traj.populations[:, -1]
