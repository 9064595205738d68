"""
Tests for filter functions, value assembly and efficiency bookkeeping.
"""
import numpy as np
import pytest

from src.collision.engine import run_ensemble, validity_report
from src.collision.schedule import PHI_SWAP, CollisionSchedule, MeasurementBasis, MeasurementRecord
from src.evaluation.statistics import EmpiricalSample, ReferenceCdf, husimi_reference_cdf, ks_statistic
from src.fockspace.states import prepare_state
from src.records.assembly import (
    assemble_heterodyne,
    assemble_homodyne,
    assemble_photocount,
    heterodyne_samples,
    homodyne_samples,
    photocount_samples,
)
from src.records.efficiency import (
    collection_efficiency,
    compensate_efficiency,
    efficiency_from_schedule,
    readout_contrast,
    readout_efficiency,
    steps_to_vacuum,
)
from src.records.filters import (
    FilterWeights,
    chebyshev_bound,
    filter_constant,
    filter_lossy_optimal,
    filter_time_dependent,
    lossy_normalization,
    predicted_variance,
)
from src.utils.exceptions import BasisMismatchError, BasisPatternError, DimensionMismatchError

WEAK_PHI = 0.1 * PHI_SWAP


def _weights(values):
    values = np.asarray(values, dtype=np.float64)
    return FilterWeights(values, 1 / np.sqrt(2), "constant", np.arange(values.size) * 1e-6)


# Filters

def test_constant_filter_normalization():
    weights = filter_constant(WEAK_PHI, 1e-6, 2000)
    phi2 = WEAK_PHI ** 2
    expected = 0.5 * phi2 / -np.expm1(-phi2)
    assert weights.sum_of_squares() == pytest.approx(expected, rel=1e-9)
    assert weights.weights[0] == pytest.approx(WEAK_PHI / np.sqrt(2))
    assert np.all(np.diff(weights.weights) < 0)


def test_filter_scales_with_convention():
    sqrt_half = filter_constant(WEAK_PHI, 1e-6, 100)
    unit = filter_constant(WEAK_PHI, 1e-6, 100, c=1.0)
    assert np.allclose(unit.weights, np.sqrt(2) * sqrt_half.weights)
    assert np.allclose(sqrt_half.rescaled(1.0).weights, unit.weights)


def test_time_dependent_matches_constant_for_constant_coupling():
    constant = filter_constant(WEAK_PHI, 1e-6, 150)
    varying = filter_time_dependent(np.full(150, WEAK_PHI), 1e-6)
    assert np.allclose(constant.weights, varying.weights)
    with pytest.raises(ValueError):
        filter_time_dependent([0.1, 0.0], 1e-6)


def test_lossless_optimal_filter_reduces_to_time_dependent():
    phi = np.minimum(0.05 + 0.002 * np.arange(300), PHI_SWAP)
    assert lossy_normalization(phi, 0.0) == pytest.approx(1.0, abs=1e-12)
    lossy = filter_lossy_optimal(phi, 1e-6, kappa=0.0)
    assert np.allclose(lossy.weights, filter_time_dependent(phi, 1e-6).weights)


def test_lossy_optimal_filter_compensates_loss_and_contrast():
    phi = np.full(400, WEAK_PHI)
    plain = filter_time_dependent(phi, 1e-6)
    lossy = filter_lossy_optimal(phi, 1e-6, kappa=2000.0, eta_m=0.9)
    norm = lossy.parameters["normalization"]
    # η = φ²/(φ² + κT) in the continuum limit
    assert norm == pytest.approx(collection_efficiency(WEAK_PHI, 1e-6, 2000.0), rel=0.02)
    decay = np.exp(-0.5 * 0.002 * np.arange(400))
    assert np.allclose(lossy.weights, plain.weights * decay / (0.9 * norm))
    with pytest.raises(ValueError):
        filter_lossy_optimal(phi, 1e-6, kappa=0.0, eta_m=0.4)


def test_filter_weights_validation(tmp_path):
    with pytest.raises(ValueError):
        FilterWeights(np.array([0.1, -0.1]), 0.5, "constant", np.zeros(2))
    with pytest.raises(ValueError):
        FilterWeights(np.array([0.1]), 0.5, "boxcar", np.zeros(1))
    path = filter_constant(WEAK_PHI, 1e-6, 10).to_csv(tmp_path / "filter.csv")
    assert path.read_text().splitlines()[0] == "t_n,f"


def test_predicted_variance_and_chebyshev():
    assert predicted_variance(0.0) == pytest.approx(0.5)
    assert predicted_variance(0.1, eta_m=0.9) == pytest.approx(0.5 * 1.1 / 0.81)
    assert chebyshev_bound(2.0, 0.0) == pytest.approx(0.125)
    assert chebyshev_bound(0.1, 0.0) == 1.0
    with pytest.raises(ValueError):
        chebyshev_bound(0.0, 0.0)


# Assembly

def test_assemble_homodyne_by_hand():
    theta = np.pi / 2
    record = MeasurementRecord(np.array([1, -1, 1]), (MeasurementBasis.x(),) * 3, np.zeros(3))
    value = assemble_homodyne(record, _weights([0.3, 0.2, 0.1]), theta)
    assert value.value == pytest.approx(0.2)
    assert value.angle == theta


def test_homodyne_basis_and_length_checks():
    record = MeasurementRecord(np.array([1, 1]), (MeasurementBasis.x(),) * 2, np.zeros(2))
    with pytest.raises(BasisMismatchError):
        assemble_homodyne(record, _weights([0.1, 0.1]), theta=0.0)
    with pytest.raises(DimensionMismatchError):
        assemble_homodyne(record, _weights([0.1, 0.1, 0.1]), theta=np.pi / 2)


def test_assemble_heterodyne_by_hand():
    bases = (MeasurementBasis.y(), MeasurementBasis.x()) * 2
    record = MeasurementRecord(np.array([-1, 1, 1, 1]), bases, np.zeros(4))
    value = assemble_heterodyne(record, _weights([0.4, 0.3, 0.2, 0.1]))
    # Re: 2(0.4·1 + 0.2·(-1)), Im: 2(0.3 + 0.1)
    assert value.value == pytest.approx(0.4 + 0.8j)


def test_heterodyne_pattern_and_odd_length():
    wrong = MeasurementRecord(np.array([1, 1]), (MeasurementBasis.x(), MeasurementBasis.y()), np.zeros(2))
    with pytest.raises(BasisPatternError):
        assemble_heterodyne(wrong, _weights([0.1, 0.1]))
    odd = MeasurementRecord(
        np.array([-1, 1, -1]), (MeasurementBasis.y(), MeasurementBasis.x(), MeasurementBasis.y()), np.zeros(3)
    )
    assert assemble_heterodyne(odd, _weights([0.5, 0.5, 0.5])).value == pytest.approx(1.0 + 1.0j)


def test_photocount():
    record = MeasurementRecord(np.array([-1, 1, -1, 1]), (MeasurementBasis.z(),) * 4, np.zeros(4))
    assert assemble_photocount(record) == 2
    with pytest.raises(BasisMismatchError):
        assemble_photocount(MeasurementRecord(np.array([1]), (MeasurementBasis.x(),), np.zeros(1)))


def test_vectorized_assembly_matches_single_records():
    state = prepare_state("coherent", 20, alpha=0.8 + 0.3j)
    weights = filter_constant(WEAK_PHI, 1e-6, 60)
    homodyne = run_ensemble(state, CollisionSchedule.homodyne(WEAK_PHI, 60, theta=0.4), 20, 2, workers=1)
    values = homodyne_samples(homodyne, weights, 0.4)
    assert np.allclose(values, [assemble_homodyne(r.record, weights, 0.4).value for r in homodyne])
    heterodyne = run_ensemble(state, CollisionSchedule.heterodyne(WEAK_PHI, 60), 20, 2, workers=1)
    values = heterodyne_samples(heterodyne, weights)
    assert np.allclose(values, [assemble_heterodyne(r.record, weights).value for r in heterodyne])


def test_photocount_samples_of_fock_state():
    results = run_ensemble(
        prepare_state("fock", 6, n=2), CollisionSchedule.constant(0.3, 200, MeasurementBasis.z()), 30, 4, workers=1
    )
    assert np.all(photocount_samples(results) == 2)


def test_heterodyne_statistics_of_coherent_state():
    schedule = CollisionSchedule.heterodyne(WEAK_PHI, 300)
    weights = filter_constant(WEAK_PHI, schedule.dt, 300)
    results = run_ensemble(prepare_state("coherent", 30, alpha=1.0 + 0.5j), schedule, 3000, 17, record_population=False)
    values = heterodyne_samples(results, weights)
    # J_het estimates <x> + i<p> = 2cα with unit variance per axis
    assert np.mean(values.real) == pytest.approx(np.sqrt(2) * 1.0, abs=0.1)
    assert np.mean(values.imag) == pytest.approx(np.sqrt(2) * 0.5, abs=0.1)
    assert np.var(values.real) == pytest.approx(1.0, abs=0.12)
    assert np.var(values.imag) == pytest.approx(1.0, abs=0.12)


# Efficiency

def test_efficiency_formulas():
    assert collection_efficiency(WEAK_PHI, 1e-6, 2000.0) == pytest.approx(WEAK_PHI ** 2 / (WEAK_PHI ** 2 + 0.002))
    assert collection_efficiency(WEAK_PHI, 1e-6, 0.0) == 1.0
    assert readout_contrast(0.05) == pytest.approx(0.9)
    assert readout_efficiency(0.05) == pytest.approx(0.81)
    with pytest.raises(ValueError):
        readout_contrast(0.5)


def test_compensation_bookkeeping():
    compensation = compensate_efficiency(0.9, 0.81)
    assert compensation.eta_det == pytest.approx(0.729)
    assert not compensation.ill_conditioned
    assert compensation.to_dict()["eta_det"] == pytest.approx(0.729)
    assert compensate_efficiency(0.4).ill_conditioned
    with pytest.raises(ValueError):
        compensate_efficiency(0.0)


def test_efficiency_from_schedule():
    lossless = CollisionSchedule.homodyne(WEAK_PHI, 100)
    assert efficiency_from_schedule(lossless).eta == 1.0
    lossy = CollisionSchedule.homodyne(WEAK_PHI, 100, kappa=2000.0)
    assert efficiency_from_schedule(lossy, 0.9).eta_det == pytest.approx(
        0.9 * collection_efficiency(WEAK_PHI, 1e-6, 2000.0)
    )
    ramp = CollisionSchedule.ramp(WEAK_PHI, 0.0018, 200, MeasurementBasis.x(), kappa=2000.0)
    assert 0.9 < efficiency_from_schedule(ramp).eta < 1.0


def test_steps_to_vacuum():
    # population rule: Σ φ² ≥ -ln(0.05) first holds after 122 steps
    assert steps_to_vacuum(WEAK_PHI) == 122
    assert steps_to_vacuum(WEAK_PHI, loss_per_step=0.002) < 122
    ramp = np.minimum(WEAK_PHI + 0.0018 * np.arange(500), PHI_SWAP)
    assert steps_to_vacuum(ramp) < 122
    fock = prepare_state("fock", 10, n=3).photon_distribution()
    # (1 - e^{-S})³ ≥ 0.95
    expected = int(np.ceil(-np.log1p(-0.95 ** (1 / 3)) / WEAK_PHI ** 2))
    assert steps_to_vacuum(WEAK_PHI, photon_distribution=fock) == expected
    assert steps_to_vacuum(1e-4, max_steps=10) is None


def test_vacuum_rule_steps_for_cat_state():
    cat = prepare_state("cat", 30, alpha=2.0).photon_distribution()
    constant = steps_to_vacuum(WEAK_PHI, photon_distribution=cat)
    ramp_phi = np.minimum(WEAK_PHI + 0.0018 * np.arange(500), PHI_SWAP)
    ramp = steps_to_vacuum(ramp_phi, photon_distribution=cat)
    # P_0 ≥ 0.95 needs e^{-S} ≲ 0.0128 for |α|² = 4
    assert 170 <= constant <= 200
    assert ramp < 100
    assert steps_to_vacuum(ramp_phi) < ramp < constant


def test_ramp_stays_weak():
    state = prepare_state("cat", 30, alpha=2.0)
    n_bit = steps_to_vacuum(np.minimum(WEAK_PHI + 0.0018 * np.arange(500), PHI_SWAP),
                            photon_distribution=state.photon_distribution())
    ramp = CollisionSchedule.ramp(WEAK_PHI, 0.0018, n_bit, MeasurementBasis.x())
    report = validity_report(state, ramp)
    assert report.valid
    assert report.max_excitation < 0.1
    assert report.step_of_max == 0


def test_weak_coupling_efficiency_figures():
    eta = collection_efficiency(WEAK_PHI, 1e-6, 2000.0)
    assert round(eta, 3) == 0.925
    assert round(compensate_efficiency(eta, 0.98).eta_det, 2) == 0.91
    assert readout_efficiency(0.005) == pytest.approx(0.9801)


@pytest.mark.slow
def test_vacuum_homodyne_baseline():
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 200)
    weights = filter_constant(WEAK_PHI, schedule.dt, 200)
    results = run_ensemble(prepare_state("vacuum", 8), schedule, 2000, 101, record_population=False)
    values = homodyne_samples(results, weights)
    assert abs(np.mean(values)) < 0.05
    assert np.var(values, ddof=1) == pytest.approx(0.5, rel=0.1)
    assert ks_statistic(EmpiricalSample(values), ReferenceCdf.gaussian(0.0, 0.5)) < 0.05


@pytest.mark.slow
def test_heterodyne_of_coherent_state_matches_husimi_marginals():
    state = prepare_state("coherent", 30, alpha=2.0)
    schedule = CollisionSchedule.heterodyne(WEAK_PHI, 300)
    results = run_ensemble(state, schedule, 10_000, 103, record_population=False)
    sample = EmpiricalSample(heterodyne_samples(results, filter_constant(WEAK_PHI, schedule.dt, 300)))
    real, imag = sample.real_part(), sample.imag_part()
    assert abs(imag.mean()) < 3 * imag.standard_error()
    # the cos/sin saturation of a 4-photon field pulls the centre in by a few percent
    assert real.mean() == pytest.approx(2 * np.sqrt(2), rel=0.05)
    assert real.variance() == pytest.approx(1.0, rel=0.1)
    assert imag.variance() == pytest.approx(1.0, rel=0.1)
    assert ks_statistic(real, husimi_reference_cdf(state, "re")) < 0.06
    assert ks_statistic(imag, husimi_reference_cdf(state, "im")) < 0.06


@pytest.mark.slow
def test_lossy_optimal_filter_is_unbiased_with_predicted_spread():
    state = prepare_state("coherent", 30, alpha=1.0)
    schedule = CollisionSchedule.homodyne(WEAK_PHI, 400, kappa=2000.0, p_read_err=0.05)
    weights = filter_lossy_optimal(schedule.phi, schedule.dt, schedule.kappa, schedule.readout_contrast)
    results = run_ensemble(state, schedule, 5000, 107, record_population=False)
    values = homodyne_samples(results, weights)
    kappa_over_gamma = schedule.loss_per_step / WEAK_PHI ** 2
    variance = predicted_variance(kappa_over_gamma, 0.9)
    assert np.mean(values) == pytest.approx(np.sqrt(2), abs=0.06)
    assert np.var(values, ddof=1) == pytest.approx(variance, rel=0.1)
    for delta in (1.0, 1.5, 2.0):
        assert np.mean(np.abs(values - np.sqrt(2)) >= delta) <= chebyshev_bound(delta, kappa_over_gamma, 0.9)
