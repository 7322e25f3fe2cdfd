"""Adiabatic-driving toolkit: drive protocols, vacuum geometry, few-level and
truncated-Fock dynamics, nonlinear-saturation crossover sweeps and their
convergence checks."""

__version__ = "0.1.0"

from .errors import (AmtError, ArgumentError, DomainError, IntegrationError,  # noqa: E402
                     StepSizeError, StructureError, UndefinedRatioError)
from .protocols import DriveProtocol, ProtocolKind, make_protocol  # noqa: E402
from .geometry import (berry_connection_numeric, fs_metric_tt_analytic,  # noqa: E402
                       fs_metric_tt_numeric, fs_speed, gaussian_vacuum_overlap,
                       geometry_trace, qgt_tt, vacuum_infidelity)
from .dynamics import (Basis, BasisKind, HermitianOperator, QuantumState,  # noqa: E402
                       Regulator, Trajectory, build_fock_hamiltonian, build_three_level,
                       build_two_level, evolve_classical_oscillator, project_even_subspace,
                       propagate_linear, propagate_spectral_flow)
from .models import ModelFamily, ModelSpec, model_trajectory  # noqa: E402
from .crossover import (CrossoverCurve, CrossoverPoint, Normalization,  # noqa: E402
                        stability_table, sweep_crossover, time_averaged_activation)
from .convergence import ConvergenceReport, timestep_refinement, truncation_study  # noqa: E402
