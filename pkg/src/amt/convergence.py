"""Truncation and time-step convergence checks."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .crossover import (DEFAULT_ETA, TAU_MAX, TAU_MIN, WINDOW_SAMPLES, Normalization,
                        activation_run, model_for_xi, normalize, ordered_map)
from .dynamics import BasisKind, Regulator, Trajectory
from .errors import AmtError, ArgumentError
from .models import ModelFamily, ModelSpec, model_trajectory

# operational meaning of "indistinguishable" for the truncation study
INDISTINGUISHABLE = 1e-6


@dataclass(frozen=True)
class ConvergenceReport:
    n_values: tuple
    subspace_dims: tuple
    xi_grid: np.ndarray
    curves: dict  # N -> normalized P_bar over xi_grid
    raw_curves: dict  # N -> raw P_bar
    max_pairwise_deviation: dict  # (N, N') -> max |P_bar_N - P_bar_N'|
    tail_population_max: dict  # N -> max tail population over the sweep
    timestep_order: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_deviation(self):
        return max(self.max_pairwise_deviation.values(), default=0.0)

    def summary(self):
        lines = [
            "truncation convergence report",
            f"  Fock cutoffs N        : {', '.join(map(str, self.n_values))}",
            f"  even-subspace dims    : {', '.join(map(str, self.subspace_dims))}",
            f"  xi grid               : {len(self.xi_grid)} points in "
            f"[{self.xi_grid[0]:.4g}, {self.xi_grid[-1]:.4g}]",
        ]
        for (a, b), dev in self.max_pairwise_deviation.items():
            lines.append(f"  max |P_{a} - P_{b}|    : {dev:.3e}")
        for n, tail in self.tail_population_max.items():
            lines.append(f"  tail population N={n:<4}: {tail:.3e}")
        if self.timestep_order is not None:
            lines.append(f"  measured step order   : {self.timestep_order:.3f}")
        verdict = "indistinguishable" if self.max_deviation < INDISTINGUISHABLE else "DIFFERENT"
        lines.append(f"  verdict (bound {INDISTINGUISHABLE:g}, operational): {verdict}")
        return "\n".join(lines)


def tail_population(traj: Trajectory, top_fraction=0.1):
    """Max over time of the population in the top ceil(top_fraction * N) Fock levels."""
    if not 0 < top_fraction < 1:
        raise ArgumentError(f"top_fraction must lie in (0, 1), got {top_fraction}")
    if traj.basis.kind not in (BasisKind.FOCK, BasisKind.EVEN_FOCK):
        raise ArgumentError(f"tail population needs a Fock trajectory, got {traj.basis.label()}")
    n_cut = traj.basis.n_levels
    top = math.ceil(top_fraction * n_cut)
    mask = traj.basis.level_numbers() >= n_cut - top
    return float(np.max(traj.populations[:, mask].sum(axis=1)))


def truncation_study(n_values, xi_grid, eta=DEFAULT_ETA, regulator=Regulator.KERR_NN1,
                     omega0=1.0, normalization=Normalization.BY_MAX_XI_POINT,
                     tau_min=TAU_MIN, tau_max=TAU_MAX, n_samples=WINDOW_SAMPLES,
                     top_fraction=0.1, workers=None):
    """Run the identical even-subspace Fock sweep at every cutoff in ``n_values``."""
    n_values = tuple(int(n) for n in n_values)
    if len(n_values) < 2:
        raise ArgumentError("truncation study needs at least two cutoffs")
    if any(n < 20 for n in n_values):
        raise ArgumentError(f"every cutoff must be >= 20, got {n_values}")
    if any(b < a for a, b in zip(n_values, n_values[1:])):
        raise ArgumentError("cutoffs must be given in non-decreasing order")
    xi_grid = np.asarray(xi_grid, dtype=float)

    jobs = [(n, x) for n in n_values for x in xi_grid]

    def run(job):
        n, x = job
        model = model_for_xi(ModelFamily.FOCK_EVEN, x, eta=eta, n_levels=n,
                             regulator=regulator, omega0=omega0)
        try:
            p_bar, traj = activation_run(model, tau_min, tau_max, n_samples)
        except AmtError as exc:
            raise type(exc)(f"N={n}, xi={x:.6g}: {exc}") from exc
        return p_bar, tail_population(traj, top_fraction)

    results = ordered_map(run, jobs, workers)
    raw, curves, tails = {}, {}, {}
    for i, n in enumerate(n_values):
        chunk = results[i * xi_grid.size:(i + 1) * xi_grid.size]
        raw[n] = np.array([r[0] for r in chunk])
        curves[n] = normalize(raw[n], normalization)
        tails[n] = max(r[1] for r in chunk)
    deviations = {}
    for a, b in itertools.combinations(range(len(n_values)), 2):
        na, nb = n_values[a], n_values[b]
        deviations[(na, nb)] = float(np.max(np.abs(curves[na] - curves[nb])))
    meta = {"eta": eta, "regulator": Regulator(regulator).value,
            "normalization": Normalization(normalization).value,
            "tau_window": f"[{tau_min}, {tau_max}]", "window_samples": n_samples,
            "top_fraction": top_fraction, "deviation_bound": INDISTINGUISHABLE}
    return ConvergenceReport(
        n_values=n_values, subspace_dims=tuple((n + 1) // 2 for n in n_values),
        xi_grid=xi_grid, curves=curves, raw_curves=raw,
        max_pairwise_deviation=deviations, tail_population_max=tails, meta=meta)


@dataclass(frozen=True)
class RefinementResult:
    steps: np.ndarray
    errors: np.ndarray  # error of each step against the finest one (last entry 0)
    order: float  # nan when every error vanishes
    exact: bool


def timestep_refinement(model: ModelSpec, steps, xi=None, t_final=1.0):
    """Empirical order of the time integrator for ``model``.

    The model is evolved to ``t_final`` with each step in ``steps`` (a geometric
    progression); the error of every coarser run is the 2-norm distance of its
    final state from the finest-step run, and the order is the least-squares
    slope of log(error) against log(step).
    """
    steps = np.sort(np.asarray(steps, dtype=float))[::-1]
    if steps.size < 3:
        raise ArgumentError("need at least three step sizes")
    if np.any(steps <= 0):
        raise ArgumentError("step sizes must be positive")
    ratios = steps[:-1] / steps[1:]
    if not np.allclose(ratios, ratios[0], rtol=1e-9, atol=0.0) or ratios[0] == 1.0:
        raise ArgumentError(f"step sizes must form a geometric progression, got {steps}")
    if xi is not None:
        model = model.with_xi(xi)
    # coarse RK4 steps drift in norm by design here; the drift is part of the error
    finals = [model_trajectory(model, [0.0, t_final], max_step=h, norm_tol=math.inf).states[-1]
              for h in steps]
    ref = finals[-1]
    errors = np.array([float(np.linalg.norm(f - ref)) for f in finals])
    coarse = errors[:-1]
    if np.all(coarse <= 1e-15 * max(1.0, float(np.linalg.norm(ref)))):
        return RefinementResult(steps, errors, math.nan, True)
    order = float(np.polyfit(np.log(steps[:-1]), np.log(coarse), 1)[0])
    return RefinementResult(steps, errors, order, False)
