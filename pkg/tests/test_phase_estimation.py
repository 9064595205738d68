"""
Tests for phase-estimation homodyne: controlled kicks, the three protocols
and their error bounds.
"""
import logging

import numpy as np
import pytest

from src.evaluation.statistics import ks_statistic, reference_cdf
from src.fockspace.states import prepare_state
from src.phase_estimation.base_estimator import EigenFrame, PhaseEstConfig, wrap_phase
from src.phase_estimation.bounds import chernoff_bound, empirical_error_rate, iterative_error_bound
from src.phase_estimation.estimators import (
    AdaptivePhaseEstimator,
    adaptive_posterior,
    estimates_frame,
    estimates_sample,
    estimator_for,
    run_adaptive_pe,
    run_iterative_pe,
    run_nonadaptive_pe,
    run_phase_estimation,
)
from src.phase_estimation.unitary import (
    controlled_phase_unitary,
    default_epsilon,
    kick_phases,
    pad_state,
    quadrature_eigenstate,
    quadrature_eigensystem,
)

WORKING_DIM = 64
EPSILON = np.pi / 8


def _eigen_config(mode, n_m, epsilon=EPSILON, **kwargs):
    return PhaseEstConfig(n_m=n_m, mode=mode, epsilon=epsilon, n_fock=WORKING_DIM, **kwargs)


# Kicks

def test_wrap_phase():
    assert wrap_phase(np.pi) == pytest.approx(np.pi)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_phase(0.3) == pytest.approx(0.3)


def test_kick_phases_reduce_exactly():
    values = np.array([-2.3, 0.0, 0.7, 4.1])
    for power in range(4):
        phases = kick_phases(0.4, values, power)
        assert np.all((phases >= 0) & (phases < 2 * np.pi))
        assert np.allclose(np.exp(1j * phases), np.exp(1j * 0.4 * 2 ** power * values))


def test_controlled_phase_unitary():
    unitary = controlled_phase_unitary(0.3, 1, 0.5, 16)
    assert np.allclose(unitary @ unitary.conj().T, np.eye(32), atol=1e-10)
    assert np.allclose(unitary[:16, :16], np.eye(16))
    assert np.allclose(unitary[:16, 16:], 0)
    values, vectors = quadrature_eigensystem(0.5, 16)
    kicked = unitary[16:, 16:] @ vectors[:, 3]
    assert np.allclose(kicked, np.exp(1j * 0.6 * values[3]) * vectors[:, 3])


def test_controlled_phase_unitary_warns_at_boundary(caplog):
    with caplog.at_level(logging.WARNING):
        controlled_phase_unitary(0.5, 0, 0.0, 20)
    assert "truncation boundary" in caplog.text


def test_quadrature_eigenstate_and_padding():
    state, value = quadrature_eigenstate(1.0, 0.0, WORKING_DIM)
    values, _ = quadrature_eigensystem(0.0, WORKING_DIM)
    assert value in values
    assert abs(value - 1.0) < 0.2
    assert state.norm == pytest.approx(1.0)
    padded = pad_state(prepare_state("fock", 4, n=2), 10)
    assert padded.size == 10 and padded[2] == 1.0
    with pytest.raises(ValueError):
        pad_state(prepare_state("vacuum", 10), 4)


def test_default_epsilon_for_vacuum():
    # 1 - 1e-6 of N(0, 1/2) lies within |x| ≤ 4.892/√2
    expected = np.pi / (4.892 / np.sqrt(2) + 2)
    assert default_epsilon(prepare_state("vacuum", 10)) == pytest.approx(expected, rel=0.01)


def test_config_validation():
    with pytest.raises(ValueError):
        PhaseEstConfig(n_m=10, mode="quantum-fourier")
    with pytest.raises(ValueError):
        PhaseEstConfig(n_m=0)
    with pytest.raises(ValueError):
        PhaseEstConfig(n_m=10, epsilon=-1.0)
    resolved = PhaseEstConfig(n_m=10, n_fock=WORKING_DIM).resolved(prepare_state("vacuum", 10))
    assert resolved.epsilon == pytest.approx(default_epsilon(prepare_state("vacuum", 10)))
    assert resolved.n_fock == WORKING_DIM


# Protocols on exact eigenstates

def test_eigen_frame_probabilities():
    state, value = quadrature_eigenstate(0.8, 0.0, WORKING_DIM)
    frame = EigenFrame(state, _eigen_config("iterative", 4))
    assert frame.probability_g(0, 0.0) == pytest.approx((1 + np.cos(EPSILON * value)) / 2)
    assert frame.probability_g(0, -np.pi / 2) == pytest.approx((1 + np.sin(EPSILON * value)) / 2)


def test_iterative_reads_dyadic_phase_exactly():
    state, value = quadrature_eigenstate(1.3, 0.0, WORKING_DIM)
    # ε x / 2π = 0.0101 in binary
    epsilon = 2 * np.pi * 0.3125 / value
    estimate = run_iterative_pe(state, _eigen_config("iterative", 4, epsilon), seed=3)
    assert estimate.outcome_string() == "1010"
    assert estimate.phi_tilde == pytest.approx(2 * np.pi * 0.3125)
    assert estimate.x_tilde == pytest.approx(value)
    assert list(estimate.phases) == pytest.approx([0.0, -np.pi / 2, -np.pi / 4, -5 * np.pi / 8])


@pytest.mark.parametrize("x0", [1.0, -1.5])
def test_iterative_precision(x0):
    state, value = quadrature_eigenstate(x0, 0.0, WORKING_DIM)
    config = _eigen_config("iterative", 30)
    for index in range(10):
        estimate = run_iterative_pe(state, config, seed=7, index=index)
        assert abs(estimate.x_tilde - value) < 1e-3


def test_nonadaptive_estimate():
    state, value = quadrature_eigenstate(-0.7, 0.0, WORKING_DIM)
    config = _eigen_config("nonadaptive", 2000)
    estimates = [run_nonadaptive_pe(state, config, seed=2, index=i) for i in range(5)]
    assert all(len(e.outcomes) == 4000 for e in estimates)
    assert set(np.unique(estimates[0].phases)) == {0.0, -np.pi / 2}
    assert all(abs(e.x_tilde - value) < 0.3 for e in estimates)


def test_nonadaptive_error_rate_within_chernoff_bound():
    state, value = quadrature_eigenstate(0.5, 0.0, WORKING_DIM)
    config = _eigen_config("nonadaptive", 50)
    delta = 1.3
    bound = chernoff_bound(delta, EPSILON, 50)
    estimates = run_phase_estimation(state, config, 200, seed=4, workers=2)
    rate = empirical_error_rate([e.x_tilde for e in estimates], value, delta)
    assert bound < 0.25
    assert rate <= bound


def test_adaptive_estimate():
    state, value = quadrature_eigenstate(1.2, 0.0, WORKING_DIM)
    config = _eigen_config("adaptive", 400)
    for index in range(3):
        estimate = run_adaptive_pe(state, config, seed=5, index=index)
        assert estimate.phases[0] == 0.0
        assert abs(estimate.x_tilde - value) < 0.5


def test_adaptive_phase_selection_ties_go_first():
    config = _eigen_config("adaptive", 5)
    flat = np.full(config.grid_points, -np.log(config.grid_points))
    assert AdaptivePhaseEstimator(config).select_phase(flat, config) == 0


def test_adaptive_posterior():
    grid, probabilities = adaptive_posterior(np.zeros(20, dtype=int), np.zeros(20))
    assert probabilities.sum() == pytest.approx(1.0)
    assert grid[np.argmax(probabilities)] == pytest.approx(0.0, abs=1e-12)
    grid, probabilities = adaptive_posterior(np.ones(20, dtype=int), np.zeros(20))
    assert abs(grid[np.argmax(probabilities)]) == pytest.approx(np.pi, abs=1e-2)


# Ensembles

def test_runs_are_reproducible_and_thread_independent():
    state = prepare_state("fock", 8, n=1)
    config = PhaseEstConfig(n_m=12, n_fock=WORKING_DIM)
    serial = run_phase_estimation(state, config, 20, seed=9, workers=1)
    threaded = run_phase_estimation(state, config, 20, seed=9, workers=4)
    assert [e.outcome_string() for e in serial] == [e.outcome_string() for e in threaded]
    assert [e.index for e in threaded] == list(range(20))
    assert run_phase_estimation(state, config, 0, seed=9) == []


def test_photon_tracking():
    config = PhaseEstConfig(n_m=5, n_fock=WORKING_DIM, track_photons=True)
    estimate = estimator_for(config).run(prepare_state("fock", 8, n=1), seed=1)
    assert estimate.photon_trace.shape == (6,)
    assert estimate.photon_trace[0] == pytest.approx(1.0)


def test_estimates_table():
    state = prepare_state("vacuum", 8)
    estimates = run_phase_estimation(state, PhaseEstConfig(n_m=6, n_fock=WORKING_DIM), 4, seed=1, workers=1)
    frame = estimates_frame(estimates)
    assert list(frame.columns) == ["index", "x_tilde", "phi_tilde", "outcomes"]
    assert all(len(bits) == 6 for bits in frame["outcomes"])
    sample = estimates_sample(estimates, {"label": "vacuum"})
    assert np.allclose(sample.values, frame["x_tilde"])


@pytest.mark.slow
def test_single_photon_estimates_follow_quadrature_distribution():
    state = prepare_state("fock", 12, n=1)
    config = PhaseEstConfig(n_m=16)
    estimates = run_phase_estimation(state, config, 1500, seed=11)
    sample = estimates_sample(estimates)
    assert ks_statistic(sample, reference_cdf(state, 0.0)) < 0.08

@pytest.mark.slow
def test_hundred_round_estimates_follow_single_photon_distribution():
    state = prepare_state("fock", 12, n=1)
    estimates = run_phase_estimation(state, PhaseEstConfig(n_m=100), 500, seed=19)
    assert ks_statistic(estimates_sample(estimates), reference_cdf(state, 0.0)) < 0.08


@pytest.mark.slow
def test_adaptive_beats_nonadaptive_at_equal_readouts():
    state, value = quadrature_eigenstate(0.0, 0.0, WORKING_DIM)
    # non-adaptive N_m counts rounds per component, so 100 there is 200 readouts
    adaptive = run_phase_estimation(state, _eigen_config("adaptive", 200), 300, seed=23)
    nonadaptive = run_phase_estimation(state, _eigen_config("nonadaptive", 100), 300, seed=23)
    assert all(len(e.outcomes) == 200 for e in adaptive + nonadaptive)
    spread_adaptive = np.var([e.x_tilde - value for e in adaptive])
    spread_nonadaptive = np.var([e.x_tilde - value for e in nonadaptive])
    assert spread_adaptive <= spread_nonadaptive


@pytest.mark.slow
def test_kicks_never_lower_mean_photon_number():
    state = prepare_state("coherent", 30, alpha=1.0)
    config = PhaseEstConfig(n_m=10, mode="nonadaptive", epsilon=1.0, n_fock=512, track_photons=True)
    estimates = run_phase_estimation(state, config, 500, seed=29)
    mean_trace = np.mean([e.photon_trace for e in estimates], axis=0)
    assert mean_trace.shape == (21,)
    assert mean_trace[0] == pytest.approx(1.0, abs=1e-9)
    # each round mixes in a momentum kick of ε/√2; sampling noise is far below the rise
    assert np.all(np.diff(mean_trace) > -0.02)
    assert mean_trace[-1] > mean_trace[0] + 5.0


# Bounds

def test_chernoff_bound():
    assert chernoff_bound(1.0, np.pi / 4, 100) == pytest.approx(4 * np.exp(-12.5))
    assert chernoff_bound(0.01, 0.1, 10) == 1.0
    assert chernoff_bound(3.0, 1.0, 10) == 1.0
    with pytest.raises(ValueError):
        chernoff_bound(-1.0, 1.0, 10)


@pytest.mark.parametrize("angle", [0.05, 0.4, 1.0, np.pi / 2])
def test_chernoff_bound_is_conservative(angle):
    for n_m in (10, 100, 1000):
        linear = min(1.0, 4 * np.exp(-n_m * np.sin(angle) / (2 * np.sqrt(2))))
        assert chernoff_bound(angle, 1.0, n_m) >= linear


def test_iterative_error_bound():
    assert iterative_error_bound(1.0, np.pi, 4) == pytest.approx(1 / 14)
    assert iterative_error_bound(0.1, 0.5, 2) == 1.0
    assert iterative_error_bound(1.0, np.pi, 20) < 1e-5


def test_empirical_error_rate():
    assert empirical_error_rate(np.array([0.0, 0.5, 2.0]), 0.0, 1.0) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        empirical_error_rate(np.zeros(0), 0.0, 1.0)
