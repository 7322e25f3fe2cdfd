import numpy as np
import pytest

from amt.convergence import (INDISTINGUISHABLE, tail_population, timestep_refinement,
                             truncation_study)
from amt.dynamics import Basis, QuantumState, Trajectory
from amt.errors import ArgumentError
from amt.models import ModelFamily, ModelSpec
from amt.protocols import DriveProtocol

XI_GRID = np.geomspace(0.05, 2.0, 20)


@pytest.fixture(scope="module")
def study():
    return truncation_study([100, 200, 400], XI_GRID)


def test_published_cutoffs_indistinguishable(study):
    assert set(study.max_pairwise_deviation) == {(100, 200), (100, 400), (200, 400)}
    assert all(0 <= d < INDISTINGUISHABLE for d in study.max_pairwise_deviation.values())
    assert study.subspace_dims == (50, 100, 200)
    assert "operational" in study.summary()


def test_tail_population_negligible(study):
    # worst sweep point, top 10% of the N=100 cutoff
    assert study.tail_population_max[100] < 1e-8


def test_identical_cutoffs_give_exact_zero():
    rep = truncation_study([100, 100], [0.7])
    assert rep.max_pairwise_deviation[(100, 100)] == 0.0


def test_small_cutoffs_reported():
    rep = truncation_study([20, 40], [2.0])
    assert rep.max_deviation >= 0.0 and np.isfinite(rep.max_deviation)


def test_truncation_error_monotone():
    rep = truncation_study([50, 100, 200, 400], XI_GRID)
    devs = [rep.max_pairwise_deviation[(n, 400)] for n in (50, 100, 200)]
    # all three sit at the rounding floor (~1e-15); allow for that floor
    assert all(b <= a + 1e-13 for a, b in zip(devs, devs[1:]))


def test_truncation_validation():
    with pytest.raises(ArgumentError):
        truncation_study([100], [0.5])
    with pytest.raises(ArgumentError):
        truncation_study([10, 100], [0.5])
    with pytest.raises(ArgumentError):
        truncation_study([200, 100], [0.5])


def test_deterministic(study):
    again = truncation_study([100, 200, 400], XI_GRID)
    for n in study.n_values:
        np.testing.assert_array_equal(study.curves[n], again.curves[n])


def test_tail_population_examples():
    b = Basis.fock(40)
    vac = Trajectory([0.0, 1.0], [QuantumState.vacuum(b).amplitudes] * 2, b)
    assert tail_population(vac) == 0.0
    top = QuantumState.basis_state(b, 39).amplitudes
    assert tail_population(Trajectory([0.0], [top], b), 0.1) == 1.0
    with pytest.raises(ArgumentError):
        tail_population(vac, 1.5)
    with pytest.raises(ArgumentError):
        other = Basis.two_level()
        tail_population(Trajectory([0.0], [QuantumState.vacuum(other).amplitudes], other))


def test_refinement_linear_second_order():
    model = ModelSpec(ModelFamily.TWO_LEVEL, 0.5, 1.0, protocol=DriveProtocol.linear_ramp(1.0, 0.5))
    res = timestep_refinement(model, [0.2, 0.1, 0.05, 0.025])
    assert not res.exact and res.order >= 1.8


def test_refinement_spectral_flow_fourth_order():
    model = ModelSpec(ModelFamily.SPECTRAL_FLOW, 1.0, 2.0)
    res = timestep_refinement(model, [0.2, 0.1, 0.05, 0.025])
    assert res.order >= 3.8


def test_refinement_zero_hamiltonian_exact():
    model = ModelSpec(ModelFamily.TWO_LEVEL, 0.0, 0.0, protocol=DriveProtocol.constant(1.0))
    res = timestep_refinement(model, [0.4, 0.2, 0.1])
    assert res.exact and np.isnan(res.order)
    assert np.all(res.errors == 0.0)


def test_refinement_validation():
    model = ModelSpec(ModelFamily.TWO_LEVEL, 0.5, 1.0)
    with pytest.raises(ArgumentError):
        timestep_refinement(model, [0.1, 0.05])
    with pytest.raises(ArgumentError):
        timestep_refinement(model, [0.3, 0.1, 0.05])
