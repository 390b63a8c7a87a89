import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from src.core.channel import ChannelParams, compose, identity_tensor, oracle_tensor
from src.core.fock import FockDim, SqueezingSpec, fock_state
from src.core.homodyne import BinnedHistogram, DetectionParams, phase_ramp
from src.core.process_mle import (
    Probe,
    ProbeSet,
    ProcessMleConfig,
    bootstrap,
    fitted_channel,
    output_phase,
    phase_slice,
    predict_qubit,
    predict_squeezed,
    probe_phases,
    process_fidelity,
    reconstruct_process,
    truncated_coherent,
    working_dim,
)
from src.data.generate_data import generate_probe_set, probe_amplitudes
from src.errors import DimensionMismatchError, NumericError
from src.utils import wrap_phase

from tests.conftest import random_density_matrix

DESK_CHANNEL = ChannelParams(0.8, 0.6, label="desk")


@pytest.fixture(scope="module")
def analytic_probes():
    det = DetectionParams(efficiency=0.85, samples=10**9, phase_sweep=phase_ramp(100))
    data = generate_probe_set(
        DESK_CHANNEL, det, amplitudes=np.linspace(0.0, 1.5, 6), analytic=True, phase_bins=16, quad_bins=20
    )
    return data.probe_set


@pytest.fixture(scope="module")
def desk_reconstruction(analytic_probes):
    config = ProcessMleConfig(dim=FockDim(3), iterations=150)
    tensor, diagnostics = reconstruct_process(analytic_probes, config)
    return tensor, diagnostics


def test_working_dim_follows_strongest_probe(analytic_probes):
    assert working_dim(analytic_probes, ProcessMleConfig(dim=FockDim(3))).n_max == 13
    assert working_dim(analytic_probes, ProcessMleConfig(dim=FockDim(3), working_n_max=15)).n_max == 15


def test_analytic_reconstruction_matches_oracle(desk_reconstruction):
    tensor, _ = desk_reconstruction
    assert tensor.dim == FockDim(3)
    tensor.validate()
    assert process_fidelity(tensor, oracle_tensor(DESK_CHANNEL, FockDim(3))) >= 0.98


def test_covariant_reconstruction_has_no_off_band_elements(desk_reconstruction):
    tensor, _ = desk_reconstruction
    k, l, m, n = np.indices(tensor.elements.shape)
    assert np.all(tensor.elements[(m - k) != (n - l)] == 0)


def test_process_likelihood_never_decreases(desk_reconstruction):
    _, diagnostics = desk_reconstruction
    trace = np.asarray(diagnostics.log_likelihood_trace)
    assert trace.size > 1
    assert np.all(np.diff(trace) >= -1e-10 * np.abs(trace[:-1]))


def test_bootstrap_of_analytic_counts_is_the_point_estimate(analytic_probes, desk_reconstruction):
    tensor, _ = desk_reconstruction
    config = ProcessMleConfig(dim=FockDim(3), iterations=150)
    summary = bootstrap(analytic_probes, config, n_resamples=2, seed=1, point_estimate=tensor)
    assert summary.fidelities == pytest.approx([1.0, 1.0], abs=1e-6)
    assert summary.max_relative_spread == pytest.approx(0.0, abs=1e-12)
    assert summary.to_dict()["min_fidelity"] == pytest.approx(1.0, abs=1e-6)


def test_fitted_channel_reads_rotation_and_loss(analytic_probes):
    params = fitted_channel(analytic_probes)
    assert params.phase_shift == pytest.approx(DESK_CHANNEL.phase_shift, abs=1e-3)
    assert params.transmission == pytest.approx(DESK_CHANNEL.transmission, abs=1e-3)


def test_vacuum_only_probes_start_maximally_mixed(caplog):
    det = DetectionParams(samples=10**6, phase_sweep=phase_ramp(24))
    probes = generate_probe_set(DESK_CHANNEL, det, amplitudes=[0.0], analytic=True, phase_bins=12, quad_bins=10)
    assert fitted_channel(probes.probe_set) is None
    with caplog.at_level(logging.INFO):
        reconstruct_process(probes.probe_set, ProcessMleConfig(dim=FockDim(1), iterations=1))
    assert "starting from I / d" in caplog.text


def test_maximally_mixed_start(analytic_probes):
    config = ProcessMleConfig(dim=FockDim(3), iterations=150, start="maximally-mixed")
    tensor, diagnostics = reconstruct_process(analytic_probes, config)
    assert diagnostics.log_likelihood_trace[0] < diagnostics.final_log_likelihood
    assert process_fidelity(tensor, oracle_tensor(DESK_CHANNEL, FockDim(3))) >= 0.95
    with pytest.raises(ValueError):
        ProcessMleConfig(start="random")


def test_probe_order_does_not_matter(analytic_probes, desk_reconstruction):
    tensor, diagnostics = desk_reconstruction
    reversed_probes = replace(analytic_probes, probes=analytic_probes.probes[::-1])
    shuffled, shuffled_diagnostics = reconstruct_process(reversed_probes, ProcessMleConfig(dim=FockDim(3), iterations=150))
    assert shuffled_diagnostics.final_log_likelihood == pytest.approx(diagnostics.final_log_likelihood, rel=1e-9)
    np.testing.assert_allclose(shuffled.elements, tensor.elements, atol=1e-6)


@pytest.mark.parametrize("k, l", [(0, 1), (1, 0), (0, 2), (2, 1), (3, 1)])
def test_output_phase_follows_a_rotation(k, l):
    delta = 0.4
    dim = FockDim(3)
    rho = random_density_matrix(3, seed=21)
    tensor = oracle_tensor(ChannelParams(0.67, 0.5), dim)
    rotated = compose(tensor, oracle_tensor(ChannelParams(delta, 1.0), dim))
    shift = output_phase(rotated, rho, k, l) - output_phase(tensor, rho, k, l)
    assert wrap_phase(shift - (k - l) * delta) == pytest.approx(0.0, abs=1e-9)


def test_single_amplitude_probe_set_warns(caplog):
    det = DetectionParams(samples=10**6, phase_sweep=phase_ramp(24))
    probes = generate_probe_set(DESK_CHANNEL, det, amplitudes=[0.5], analytic=True, phase_bins=12, quad_bins=10)
    with caplog.at_level(logging.WARNING):
        reconstruct_process(probes.probe_set, ProcessMleConfig(dim=FockDim(1), iterations=1))
    assert "single amplitude" in caplog.text


def test_probe_set_requires_shared_edges():
    a = BinnedHistogram(np.linspace(0, 2 * np.pi, 3), np.linspace(-1, 1, 3), np.ones((2, 2)))
    b = BinnedHistogram(np.linspace(0, 2 * np.pi, 3), np.linspace(-2, 2, 3), np.ones((2, 2)))
    with pytest.raises(DimensionMismatchError):
        ProbeSet((Probe(0.0, a), Probe(1.0, b)), efficiency=1.0)
    with pytest.raises(ValueError):
        ProbeSet((), efficiency=1.0)


@pytest.mark.parametrize("theta", [0.67, 2.13, -1.0])
def test_oracle_qubit_prediction(theta):
    prediction = predict_qubit(oracle_tensor(ChannelParams(theta, 0.25), FockDim(4)))
    assert prediction.phase == pytest.approx(wrap_phase(-theta))
    assert prediction.retention == pytest.approx(math.sqrt(0.25))
    assert prediction.transmission == pytest.approx(1.0)


def test_oracle_probe_phases_are_constant():
    tensor = oracle_tensor(ChannelParams(2.13, 0.25), FockDim(6))
    phases = probe_phases(tensor, probe_amplitudes(5, 1.0))
    assert phases.shape == (4,)
    np.testing.assert_allclose(phases, wrap_phase(-2.13), atol=1e-12)


def test_vacuum_output_coherence_is_undefined():
    tensor = oracle_tensor(ChannelParams(0.67, 0.5), FockDim(3))
    with pytest.raises(NumericError):
        output_phase(tensor, fock_state(0, FockDim(3)), 0, 1)
    with pytest.raises(ValueError):
        output_phase(tensor, fock_state(0, FockDim(3)), 0, 4)


def test_oracle_phase_slice():
    theta = 0.67
    slice_ = phase_slice(oracle_tensor(ChannelParams(theta, 0.5), FockDim(6)))
    m, n = np.indices(slice_.values.shape)
    np.testing.assert_array_equal(slice_.defined, (m - n) == -1)
    np.testing.assert_allclose(slice_.values[slice_.defined], -theta)
    assert np.all(np.isnan(slice_.values[~slice_.defined]))
    assert len(slice_.rows()) == 49


def test_process_fidelity():
    dim = FockDim(4)
    a = oracle_tensor(ChannelParams(0.67, 0.5), dim)
    assert process_fidelity(a, a) == pytest.approx(1.0, abs=1e-9)
    assert process_fidelity(a, oracle_tensor(ChannelParams(1.2, 0.5), dim)) < 0.99
    with pytest.raises(DimensionMismatchError):
        process_fidelity(a, identity_tensor(FockDim(3)))


def test_truncated_coherent_keeps_unit_trace():
    rho = truncated_coherent(2.0, FockDim(3))
    assert np.trace(rho.elements).real == pytest.approx(1.0)
    assert rho.tail_weight > 0


def test_identity_keeps_squeezing():
    prediction = predict_squeezed(identity_tensor(FockDim(20)), SqueezingSpec.symmetric(4.3), curve_points=91)
    assert prediction.output_min_db == pytest.approx(-4.3, abs=1e-2)
    assert prediction.output_max_db == pytest.approx(4.3, abs=1e-2)
    assert math.sin(prediction.phase_shift) == pytest.approx(0.0, abs=1e-9)
    assert prediction.transmission == pytest.approx(1.0)
    assert prediction.theta.shape == prediction.output_curve_db.shape == (91,)


def test_lossy_rotation_of_squeezed_vacuum():
    tensor = oracle_tensor(ChannelParams(1.46, 0.25), FockDim(20))
    prediction = predict_squeezed(tensor, SqueezingSpec(-4.3, 4.3))
    assert prediction.input_min_db == pytest.approx(-4.3, abs=1e-2)
    assert prediction.output_min_db == pytest.approx(-0.742, abs=0.02)
    assert prediction.output_max_db == pytest.approx(1.532, abs=0.02)
    assert prediction.phase_shift == pytest.approx(1.46, abs=1e-6)
    assert set(prediction.to_dict()) == {
        "input_min_db",
        "input_max_db",
        "output_min_db",
        "output_max_db",
        "phase_shift",
        "transmission",
    }


@pytest.mark.slow
def test_sampled_reconstruction_recovers_phase():
    channel = ChannelParams(0.67, 0.5)
    det = DetectionParams(efficiency=0.85, samples=20_000, phase_sweep=phase_ramp(200))
    data = generate_probe_set(channel, det, seed=99, amplitudes=probe_amplitudes(7, 2.0), phase_bins=20, quad_bins=30)
    tensor, _ = reconstruct_process(data.probe_set, ProcessMleConfig(dim=FockDim(3), iterations=100))
    phases = probe_phases(tensor, probe_amplitudes(7, 2.0)[1:])
    np.testing.assert_allclose(phases, wrap_phase(-0.67), atol=0.15)


# --- Protocol scale: 13 probes up to 3.3, 40 x 40 bins, n_max = 6 ---

PROTOCOL_CHANNEL = ChannelParams(1.46, 0.25, label="protocol")
PROTOCOL_AMPLITUDES = probe_amplitudes(13, 3.3)
PROTOCOL_DIM = FockDim(6)


def _analytic_protocol_probes(channel):
    det = DetectionParams(efficiency=0.85, samples=10**9, phase_sweep=phase_ramp(100))
    return generate_probe_set(channel, det, amplitudes=PROTOCOL_AMPLITUDES, analytic=True).probe_set


@pytest.fixture(scope="module")
def sampled_protocol():
    det = DetectionParams(efficiency=0.85, samples=50_000)
    probes = generate_probe_set(PROTOCOL_CHANNEL, det, seed=1746, amplitudes=PROTOCOL_AMPLITUDES).probe_set
    working_config = ProcessMleConfig(keep_working_dim=True)
    tensor, _ = reconstruct_process(probes, working_config)
    return probes, working_config, tensor


@pytest.mark.slow
def test_protocol_analytic_reconstruction_reaches_the_oracle():
    probes = _analytic_protocol_probes(PROTOCOL_CHANNEL)
    tensor, diagnostics = reconstruct_process(probes, ProcessMleConfig(iterations=1000))
    assert process_fidelity(tensor, oracle_tensor(PROTOCOL_CHANNEL, PROTOCOL_DIM)) >= 1.0 - 1e-4
    trace = np.asarray(diagnostics.log_likelihood_trace)
    assert np.all(np.diff(trace) >= -1e-10 * np.abs(trace[:-1]))


@pytest.mark.slow
def test_protocol_identity_is_a_fixed_point():
    probes = _analytic_protocol_probes(ChannelParams(0.0, 1.0))
    tensor, _ = reconstruct_process(probes, ProcessMleConfig(iterations=1000))
    assert np.max(np.abs(tensor.elements - identity_tensor(PROTOCOL_DIM).elements)) <= 1e-4


@pytest.mark.slow
def test_protocol_sampled_reconstruction(sampled_protocol):
    _, _, tensor = sampled_protocol
    truncated = tensor.truncated(PROTOCOL_DIM)
    assert process_fidelity(truncated, oracle_tensor(PROTOCOL_CHANNEL, PROTOCOL_DIM)) >= 0.98
    phases = probe_phases(truncated, PROTOCOL_AMPLITUDES)
    assert phases.shape == (12,)
    assert np.ptp(phases) < 0.06


@pytest.mark.slow
def test_protocol_bootstrap_is_stable(sampled_protocol):
    probes, _, tensor = sampled_protocol
    summary = bootstrap(
        probes, ProcessMleConfig(), seed=1746, point_estimate=tensor.truncated(PROTOCOL_DIM), threads=4
    )
    assert min(summary.fidelities) >= 0.995
    assert summary.max_relative_spread <= 0.01


@pytest.mark.slow
def test_protocol_squeezed_prediction_agrees_with_oracle(sampled_protocol):
    probes, working_config, tensor = sampled_protocol
    spec = SqueezingSpec.symmetric(4.3)
    oracle = predict_squeezed(oracle_tensor(PROTOCOL_CHANNEL, FockDim(20)), spec)
    assert oracle.output_min_db == pytest.approx(-0.742, abs=0.02)
    assert oracle.output_max_db == pytest.approx(1.532, abs=0.02)

    predicted = predict_squeezed(tensor, spec)
    summary = bootstrap(probes, working_config, n_resamples=5, seed=1746, point_estimate=tensor)
    resampled = [predict_squeezed(t, spec) for t in summary.tensors]
    for name in ("output_min_db", "output_max_db"):
        spread = np.std([getattr(p, name) for p in resampled])
        assert abs(getattr(predicted, name) - getattr(oracle, name)) <= 3.0 * spread + 0.02
