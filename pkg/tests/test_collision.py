"""
Tests for collision schedules, Kraus operators, the trajectory engine and
the unconditional channel.
"""
import numpy as np
import pytest
from scipy import stats

from src.collision.channel import evolve_density_matrix
from src.collision.engine import (
    ensemble_density_matrix,
    mean_population_trace,
    mean_vacuum_trace,
    predicted_population,
    run_ensemble,
    run_trajectory,
    validity_report,
)
from src.collision.kraus import (
    completeness_deficit,
    excitation_probability,
    interaction_unitary_blocks,
    loss_kraus,
    measurement_kraus,
    outcome_probabilities,
    small_phi_blocks,
)
from src.collision.schedule import (
    PHI_SWAP,
    CollisionSchedule,
    MeasurementBasis,
    MeasurementRecord,
)
from src.fockspace.operators import quadrature_operator
from src.fockspace.states import CavityState, prepare_state, random_state, trace_distance
from src.records.assembly import homodyne_samples
from src.records.filters import filter_constant
from src.utils.exceptions import TrajectoryError

WEAK_PHI = 0.1 * PHI_SWAP


# Bases and schedules

def test_quadrature_bases():
    assert MeasurementBasis.for_quadrature(np.pi / 2).matches(MeasurementBasis.x())
    assert MeasurementBasis.for_quadrature(np.pi).matches(MeasurementBasis.y())
    basis = MeasurementBasis.for_quadrature(0.0)
    assert basis.name == "axis"
    assert basis.quadrature_angle == pytest.approx(0.0)
    assert MeasurementBasis.parse(basis.label).matches(basis)
    assert not MeasurementBasis.z().matches(MeasurementBasis.x())
    with pytest.raises(ValueError):
        MeasurementBasis.parse("W")


def test_schedule_validation():
    basis = MeasurementBasis.x()
    with pytest.raises(ValueError):
        CollisionSchedule.constant(0.0, 10, basis)
    with pytest.raises(ValueError):
        CollisionSchedule.constant(PHI_SWAP + 0.1, 10, basis)
    with pytest.raises(ValueError):
        CollisionSchedule.constant(0.1, 10, basis, p_read_err=0.5)
    with pytest.raises(ValueError):
        CollisionSchedule.constant(0.1, 10, basis, dt=1e-6, t_step=1e-7)
    with pytest.raises(ValueError):
        CollisionSchedule(np.full(3, 0.1), (basis,) * 2)


def test_schedule_properties():
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 50, theta=0.3, dt=2e-6, kappa=1000.0)
    assert schedule.n_bit == 50
    assert schedule.is_constant
    assert schedule.t_step == 2e-6
    assert schedule.loss_per_step == pytest.approx(2e-3)
    assert np.allclose(schedule.gamma, WEAK_PHI ** 2 / 2e-6)
    assert schedule.times[-1] == pytest.approx(49 * 2e-6)
    assert schedule.summary()["bases"] == [MeasurementBasis.for_quadrature(0.3).label]


def test_ramp_is_clipped():
    schedule = CollisionSchedule.ramp(0.1, 0.05, 40, MeasurementBasis.x(), phi_max=1.0)
    assert schedule.phi[0] == pytest.approx(0.1)
    assert schedule.phi.max() == pytest.approx(1.0)
    assert not schedule.is_constant


def test_with_n_bit_keeps_heterodyne_alternation():
    schedule = CollisionSchedule.heterodyne(WEAK_PHI, 4).with_n_bit(9)
    labels = [b.label for b in schedule.basis_seq]
    assert labels == ["Y", "X", "Y", "X", "Y", "X", "Y", "X", "Y"]
    assert schedule.with_n_bit(3).n_bit == 3
    with pytest.raises(ValueError):
        CollisionSchedule.ramp(0.1, 0.01, 5, MeasurementBasis.x()).with_n_bit(10)


def test_record_strings():
    record = MeasurementRecord.from_strings("0110", "X X Y Z", 1e-6)
    assert list(record.outcomes) == [1, -1, -1, 1]
    assert record.bitstring() == "0110"
    assert record.basis_string() == "X X Y Z"
    with pytest.raises(ValueError):
        MeasurementRecord(np.array([1, 0]), (MeasurementBasis.x(),) * 2, np.zeros(2))


# Kraus operators

@pytest.mark.parametrize("basis", [
    MeasurementBasis.x(), MeasurementBasis.y(), MeasurementBasis.z(), MeasurementBasis.axis(1.1),
])
def test_measurement_kraus_complete(basis):
    assert completeness_deficit(measurement_kraus(0.4, basis, 15)) < 1e-12


def test_interaction_blocks_on_fock_states():
    k_g, k_e = interaction_unitary_blocks(0.3, 5)
    assert k_g[2, 2] == pytest.approx(np.cos(0.3 * np.sqrt(2)))
    assert k_e[1, 2] == pytest.approx(-1j * np.sin(0.3 * np.sqrt(2)))
    assert k_e[0, 0] == 0


def test_loss_kraus_small_deficit():
    l0, l1 = loss_kraus(2000.0, 1e-6, 10)
    assert l0[3, 3] == pytest.approx(np.exp(-0.5 * 0.002 * 3))
    assert completeness_deficit([l0, l1]) < 1e-3


@pytest.mark.parametrize("lam", [2e-4, 2e-3])
def test_loss_deficit_is_second_order(lam):
    n_fock = 10
    l0, l1 = loss_kraus(lam / 1e-6, 1e-6, n_fock)
    deficit = np.real(np.diag(np.eye(n_fock) - l0.conj().T @ l0 - l1.conj().T @ l1))
    levels = np.arange(n_fock)
    exact = -np.expm1(-lam * levels) - levels * -np.expm1(-lam) * np.exp(-lam * (levels - 1))
    assert np.allclose(deficit, exact, rtol=1e-8, atol=1e-14)
    # n(n-1)λ²/2 up to O(nλ) relative corrections
    leading = levels * (levels - 1) * lam ** 2 / 2
    assert deficit[:2] == pytest.approx([0.0, 0.0], abs=1e-14)
    assert deficit[2:] == pytest.approx(leading[2:], rel=10 * n_fock * lam)
    assert completeness_deficit([l0, l1]) == pytest.approx(leading[-1], rel=10 * n_fock * lam)


def test_outcome_probabilities():
    vacuum = prepare_state("vacuum", 10)
    assert outcome_probabilities(vacuum, 0.3, MeasurementBasis.x()) == pytest.approx((0.5, 0.5))
    assert outcome_probabilities(vacuum, 0.3, MeasurementBasis.z()) == pytest.approx((1.0, 0.0))
    coherent = prepare_state("coherent", 30, alpha=1.0)
    p_plus, p_minus = outcome_probabilities(coherent, 0.1, MeasurementBasis.for_quadrature(0.0))
    assert p_plus + p_minus == pytest.approx(1.0)
    # +1 is favoured along the displacement
    assert p_plus - p_minus == pytest.approx(2 * 0.1 * 1.0, rel=0.02)


def test_excitation_probability_small_phi():
    state = prepare_state("coherent", 30, alpha=1.5)
    exact = excitation_probability(state, 0.02, exact=True)
    assert excitation_probability(state, 0.02) == pytest.approx(exact, rel=1e-3)
    k_g, k_e = small_phi_blocks(0.02, 30)
    exact_g, exact_e = interaction_unitary_blocks(0.02, 30)
    assert np.max(np.abs(k_e[:5, :5] - exact_e[:5, :5])) < 1e-4
    assert np.max(np.abs(k_g[:5, :5] - exact_g[:5, :5])) < 1e-5


# Trajectories

def test_photocount_single_photon():
    result = run_trajectory(prepare_state("fock", 6, n=1), CollisionSchedule.constant(PHI_SWAP, 3, MeasurementBasis.z()), 7, 0)
    assert list(result.record.outcomes) == [-1, 1, 1]
    assert result.final_state.photon_distribution()[0] == pytest.approx(1.0)
    assert result.vacuum_trace[-1] == pytest.approx(1.0)


def test_trajectory_is_reproducible():
    state = prepare_state("coherent", 20, alpha=1.0)
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 60, p_read_err=0.05)
    first = run_trajectory(state, schedule, 11, 3)
    second = run_trajectory(state, schedule, 11, 3)
    other = run_trajectory(state, schedule, 11, 4)
    assert first.record.bitstring() == second.record.bitstring()
    assert first.record.bitstring() != other.record.bitstring()
    assert np.allclose(first.final_state.amps, second.final_state.amps)


def test_ensemble_independent_of_workers():
    state = prepare_state("cat", 20, alpha=1.5)
    schedule = CollisionSchedule.heterodyne(WEAK_PHI, 80)
    serial = run_ensemble(state, schedule, 150, 5, workers=1)
    threaded = run_ensemble(state, schedule, 150, 5, workers=3)
    assert [r.index for r in threaded] == list(range(150))
    assert [r.record.bitstring() for r in serial] == [r.record.bitstring() for r in threaded]


def test_ensemble_offset_selects_streams():
    state = prepare_state("vacuum", 8)
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 40)
    shifted = run_ensemble(state, schedule, 3, 9, workers=1, offset=5)
    assert shifted[0].index == 5
    assert shifted[0].record.bitstring() == run_trajectory(state, schedule, 9, 5).record.bitstring()
    assert run_ensemble(state, schedule, 0, 9) == []


def test_ensemble_reports_failing_index():
    bad = CavityState(np.array([1.0, 1.0]), "unnormalized")
    with pytest.raises(TrajectoryError) as info:
        run_ensemble(bad, CollisionSchedule.homodyne(WEAK_PHI, 5), 2, 1, workers=1)
    assert info.value.index == 0


def test_vacuum_homodyne_variance():
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 200)
    weights = filter_constant(WEAK_PHI, schedule.dt, 200)
    results = run_ensemble(prepare_state("vacuum", 8), schedule, 4000, 21, record_population=False)
    values = homodyne_samples(results, weights)
    assert abs(np.mean(values)) < 0.05
    # vacuum outcomes are independent fair coins
    assert np.var(values, ddof=1) == pytest.approx(weights.sum_of_squares(), abs=0.05)


def test_coherent_homodyne_mean():
    phi = 0.05 * PHI_SWAP
    schedule = CollisionSchedule.homodyne(phi, 1000)
    weights = filter_constant(phi, schedule.dt, 1000)
    results = run_ensemble(prepare_state("coherent", 30, alpha=2.0), schedule, 2000, 3, record_population=False)
    values = homodyne_samples(results, weights)
    assert np.mean(values) == pytest.approx(2 * np.sqrt(2), abs=0.1)


def test_population_traces_follow_channel():
    state = prepare_state("coherent", 25, alpha=np.sqrt(2))
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 100)
    results = run_ensemble(state, schedule, 500, 8)
    _, channel_population = evolve_density_matrix(state, schedule, return_population=True)
    assert np.max(np.abs(mean_population_trace(results) - channel_population)) < 0.05
    vacuum = mean_vacuum_trace(results)
    assert vacuum[-1] > vacuum[0]


def test_ensemble_state_matches_channel():
    state = prepare_state("coherent", 20, alpha=1.0)
    schedule = CollisionSchedule.homodyne(0.3, 30)
    results = run_ensemble(state, schedule, 2000, 12, record_population=False)
    rho_traj = ensemble_density_matrix(results)
    rho_channel = evolve_density_matrix(state, schedule)
    assert rho_traj.mean_photon_number() == pytest.approx(rho_channel.mean_photon_number(), abs=0.02)


def test_channel_decay_with_loss():
    state = prepare_state("coherent", 25, alpha=np.sqrt(3))
    schedule = CollisionSchedule.homodyne(0.05, 300, dt=1e-6, kappa=2000.0)
    _, population = evolve_density_matrix(state, schedule, return_population=True)
    predicted = predicted_population(state.mean_photon_number(), schedule)
    # predicted[n] is the population before step n, i.e. after step n-1
    assert np.allclose(population[:-1], predicted[1:], rtol=1e-2)


def test_validity_report():
    state = prepare_state("coherent", 40, alpha=np.sqrt(6))
    strong = validity_report(state, CollisionSchedule.homodyne(0.3 * PHI_SWAP, 50))
    assert not strong.valid
    assert strong.step_of_max == 0
    weak = validity_report(state, CollisionSchedule.homodyne(0.02 * PHI_SWAP, 50))
    assert weak.valid
    assert weak.max_excitation == pytest.approx((0.02 * PHI_SWAP) ** 2 * 6.0, rel=1e-6)


@pytest.mark.parametrize("phi", [0.01 * PHI_SWAP, 0.03 * PHI_SWAP, 0.05 * PHI_SWAP])
def test_outcome_bias_tracks_quadrature(phi):
    # p+ - p- = √2 φ <x_θ> up to O(φ³) on low-photon states
    rng = np.random.default_rng(17)
    for trial in range(5):
        state = random_state(12, 3, rng)
        for theta in np.linspace(0.0, 2 * np.pi, 7, endpoint=False):
            p_plus, p_minus = outcome_probabilities(state, phi, MeasurementBasis.for_quadrature(theta))
            x_theta = np.real(state.expectation(quadrature_operator(theta, n_fock=12)))
            assert abs((p_plus - p_minus) - np.sqrt(2) * phi * x_theta) <= 10 * phi ** 3


@pytest.mark.slow
def test_outcome_frequencies_follow_born_rule():
    state = prepare_state("coherent", 15, alpha=0.8 + 0.3j)
    schedule = CollisionSchedule.homodyne(0.3, 3, theta=0.4)
    results = run_ensemble(state, schedule, 100_000, 31, record_population=False)
    outcomes = np.vstack([r.record.outcomes for r in results])
    for step in range(schedule.n_bit):
        before = state if step == 0 else evolve_density_matrix(state, schedule.with_n_bit(step))
        p_plus, p_minus = outcome_probabilities(before, schedule.phi[step], schedule.basis_seq[step])
        observed = [np.sum(outcomes[:, step] == 1), np.sum(outcomes[:, step] == -1)]
        expected = np.array([p_plus, p_minus]) / (p_plus + p_minus) * outcomes.shape[0]
        assert stats.chisquare(observed, expected).pvalue > 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("n_steps", [200, 300])
def test_cat_population_decays_exponentially(n_steps):
    state = prepare_state("cat", 30, alpha=2.0)
    schedule = CollisionSchedule.homodyne(WEAK_PHI, n_steps)
    final = evolve_density_matrix(state, schedule)
    expected = state.mean_photon_number() * np.exp(-WEAK_PHI ** 2 * n_steps)
    assert final.mean_photon_number() == pytest.approx(expected, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("make_state", [
    lambda: prepare_state("coherent", 10, alpha=0.8),
    lambda: random_state(10, 3, np.random.default_rng(5)),
])
def test_sampled_loss_matches_channel(make_state):
    state = make_state()
    schedule = CollisionSchedule.homodyne(0.2, 20, theta=0.3, dt=1e-6, kappa=1e4)
    results = run_ensemble(state, schedule, 5000, 41, record_population=False)
    assert trace_distance(ensemble_density_matrix(results), evolve_density_matrix(state, schedule)) <= 0.02
