import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.channel import (
    ChannelParams,
    ProcessTensor,
    SignalPowerMap,
    apply_loss_adjoint,
    apply_process,
    compose,
    identity_tensor,
    loss_kraus,
    loss_map,
    oracle_tensor,
    photon_transmission,
    process_trace,
    rotate,
    simulate_channel,
    thermalize,
)
from src.core.fock import FockDim, coherent_state, expect_a, fock_state, mean_variance, state_fidelity
from src.core.process_mle import bernoulli_attenuation
from src.errors import NumericError

from tests.conftest import random_density_matrix

transmissions = st.floats(min_value=0.01, max_value=1.0, allow_nan=False)
phases = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(transmissions)
def test_loss_kraus_completeness(t):
    operators = loss_kraus(t, FockDim(6))
    total = sum(a.conj().T @ a for a in operators)
    np.testing.assert_allclose(total, np.eye(7), atol=1e-10)


def test_loss_of_single_photon():
    out = loss_map(fock_state(1, FockDim(3)), 0.5)
    np.testing.assert_allclose(out.elements, np.diag([0.5, 0.5, 0.0, 0.0]), atol=1e-12)


def test_loss_map_matches_kraus_sum():
    rho = random_density_matrix(5, seed=2)
    expected = sum(a @ rho.elements @ a.conj().T for a in loss_kraus(0.3, rho.dim))
    np.testing.assert_allclose(loss_map(rho, 0.3).elements, expected, atol=1e-12)


def test_loss_adjoint_is_dual_of_loss():
    rho = random_density_matrix(5, seed=4)
    x = random_density_matrix(5, seed=5).elements
    forward = np.trace(x @ loss_map(rho, 0.6).elements)
    backward = np.trace(apply_loss_adjoint(x, 0.6) @ rho.elements)
    assert forward == pytest.approx(backward, abs=1e-12)


def test_coherent_through_channel_stays_coherent():
    alpha, theta, t = 1.5, 0.9, 0.4
    out = simulate_channel(coherent_state(alpha, FockDim(20)), ChannelParams(theta, t))
    expected = coherent_state(math.sqrt(t) * alpha * np.exp(1j * theta), FockDim(20))
    assert state_fidelity(out, expected) == pytest.approx(1.0, abs=1e-9)


def test_excess_noise_raises_vacuum_variance():
    out = thermalize(fock_state(0, FockDim(10)), 0.062)
    assert mean_variance(out) == pytest.approx(0.562, abs=1e-9)


def test_thermalize_keeps_the_mean_amplitude():
    rho = coherent_state(1.5, FockDim(30))
    out = thermalize(rho, 0.3)
    assert expect_a(out) == pytest.approx(1.5, abs=1e-6)
    assert mean_variance(out) == pytest.approx(mean_variance(rho) + 0.3, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(phases, phases)
def test_rotations_compose(a, b):
    rho = random_density_matrix(4, seed=7)
    np.testing.assert_allclose(rotate(rotate(rho, a), b).elements, rotate(rho, a + b).elements, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(phases, transmissions, phases, transmissions)
def test_oracle_composition_law(theta1, t1, theta2, t2):
    dim = FockDim(5)
    composed = compose(oracle_tensor(ChannelParams(theta2, t2), dim), oracle_tensor(ChannelParams(theta1, t1), dim))
    expected = oracle_tensor(ChannelParams(theta1 + theta2, t1 * t2), dim)
    np.testing.assert_allclose(composed.elements, expected.elements, atol=1e-9)


@pytest.mark.parametrize("params", [
    ChannelParams(2.13, 0.25),
    ChannelParams(0.67, 0.035),
    ChannelParams(2.13, 0.25, excess_noise=0.062),
])
def test_oracle_tensor_matches_direct_simulation(params):
    rho = random_density_matrix(5, seed=11)
    tensor = oracle_tensor(params, rho.dim)
    tensor.validate()
    np.testing.assert_allclose(apply_process(tensor, rho).elements, simulate_channel(rho, params).elements, atol=1e-10)


def test_oracle_tensor_is_phase_covariant():
    tensor = oracle_tensor(ChannelParams(1.46, 0.25, excess_noise=0.05), FockDim(4))
    k, l, m, n = np.indices(tensor.elements.shape)
    assert np.all(tensor.elements[(k - l) != (m - n)] == 0)


def test_oracle_attenuation_is_bernoulli():
    dim = FockDim(6)
    tensor = oracle_tensor(ChannelParams(0.3, 0.25), dim)
    np.testing.assert_allclose(tensor.attenuation(), bernoulli_attenuation(0.25, dim), atol=1e-12)
    np.testing.assert_allclose(bernoulli_attenuation(0.25, dim).sum(axis=0), 1.0, atol=1e-12)


def test_photon_transmission_and_trace():
    dim = FockDim(12)
    tensor = oracle_tensor(ChannelParams(1.0, 0.25), dim)
    rho = coherent_state(1.0, dim)
    assert photon_transmission(tensor, rho) == pytest.approx(0.25, abs=1e-9)
    assert process_trace(tensor, rho) == pytest.approx(1.0, abs=1e-12)


def test_jamiolkowski_of_identity():
    tensor = identity_tensor(FockDim(3))
    j = tensor.jamiolkowski()
    np.testing.assert_allclose(j.partial_trace_output(), np.eye(4))
    np.testing.assert_allclose(j.to_tensor().elements, tensor.elements)
    np.testing.assert_allclose(np.trace(j.normalized()), 1.0)


def test_validate_rejects_transpose_map():
    size = 3
    eye = np.eye(size)
    transpose = ProcessTensor(FockDim(size - 1), np.einsum("lm,kn->klmn", eye, eye))
    with pytest.raises(NumericError, match="completely positive"):
        transpose.validate()


def test_validate_rejects_trace_increase():
    doubled = ProcessTensor(FockDim(2), 2.0 * identity_tensor(FockDim(2)).elements)
    with pytest.raises(NumericError, match="increases trace"):
        doubled.validate()


def test_apply_process_records_lost_weight():
    dim = FockDim(2)
    tensor = oracle_tensor(ChannelParams(0.0, 0.5), dim)
    leaky = ProcessTensor(dim, 0.5 * tensor.elements)
    out = apply_process(leaky, fock_state(1, dim))
    assert out.tail_weight == pytest.approx(0.5)


def test_tensor_dict_round_trip():
    tensor = oracle_tensor(ChannelParams(0.4, 0.7), FockDim(3))
    restored = ProcessTensor.from_dict(tensor.to_dict())
    np.testing.assert_array_equal(restored.elements, tensor.elements)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(0.0, 0.0)
    with pytest.raises(ValueError):
        ChannelParams(0.0, 0.5, excess_noise=-0.1)
    with pytest.raises(ValueError):
        ChannelParams(float("nan"), 0.5)


def test_signal_power_map_ordering():
    channel = ChannelParams(1.0, 0.5)
    with pytest.raises(ValueError):
        SignalPowerMap(((1.0, channel), (1.0, channel)))
    power_map = SignalPowerMap(((0.5, channel), (1.0, channel)))
    assert SignalPowerMap.from_list(power_map.to_list()) == power_map
