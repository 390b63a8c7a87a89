import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.fock import (
    DensityMatrix,
    FockDim,
    SqueezingSpec,
    WignerGridSpec,
    coherent_state,
    expect_a,
    fock_qubit,
    fock_state,
    mean_photon_number,
    mean_variance,
    quadrature_mean,
    quadrature_variance,
    required_n_max,
    squeezed_vacuum,
    state_fidelity,
    thermal_state,
    variance_db,
    variance_extrema,
    wigner,
)
from src.core.homodyne import quadrature_pdf
from src.errors import DimensionMismatchError, NumericError

from tests.conftest import random_density_matrix


def test_fock_dim_rejects_negative():
    with pytest.raises(ValueError):
        FockDim(-1)
    assert FockDim(6).size == 7


def test_density_matrix_shape_must_match_dim():
    with pytest.raises(DimensionMismatchError):
        DensityMatrix(FockDim(2), np.eye(2))


def test_from_matrix_rejects_non_psd():
    with pytest.raises(NumericError):
        DensityMatrix.from_matrix(FockDim(1), np.diag([1.5, -0.5]))


def test_resized_crop_records_tail():
    rho = thermal_state(1.0, FockDim(10))
    cropped = rho.resized(FockDim(2))
    assert np.trace(cropped.elements).real == pytest.approx(1.0)
    assert cropped.tail_weight == pytest.approx(rho.tail_weight + 1.0 - rho.populations[:3].sum())


def test_required_n_max_guard():
    assert required_n_max(0) == 4
    assert required_n_max(math.sqrt(5.4)) == 19


def test_coherent_state_warns_below_guard(caplog):
    with caplog.at_level(logging.WARNING):
        rho = coherent_state(3.0, FockDim(5))
    assert "truncated" in caplog.text
    assert rho.tail_weight > 0.1


@settings(max_examples=25, deadline=None)
@given(
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
)
def test_coherent_state_moments(re, im):
    alpha = complex(re, im)
    rho = coherent_state(alpha, FockDim(30))
    assert expect_a(rho) == pytest.approx(alpha, abs=1e-6)
    assert mean_photon_number(rho) == pytest.approx(abs(alpha) ** 2, abs=1e-6)
    theta = np.linspace(0.0, np.pi, 7)
    np.testing.assert_allclose(quadrature_variance(rho, theta), 0.5, atol=1e-6)
    np.testing.assert_allclose(
        quadrature_mean(rho, theta), math.sqrt(2.0) * np.real(alpha * np.exp(-1j * theta)), atol=1e-6
    )


def test_vacuum_variance_is_half():
    rho = fock_state(0, FockDim(3))
    assert quadrature_variance(rho, 0.3) == pytest.approx(0.5)
    assert mean_variance(rho) == pytest.approx(0.5)
    vmin, vmax, _ = variance_extrema(rho)
    assert vmin == pytest.approx(0.5) and vmax == pytest.approx(0.5)


def test_fock_qubit_normalizes_and_rejects_zero():
    rho = fock_qubit(1.0, 1.0j, FockDim(3))
    assert rho.elements[0, 1] == pytest.approx(-0.5j)
    with pytest.raises(ValueError):
        fock_qubit(0.0, 0.0, FockDim(3))


def test_squeezed_vacuum_variances():
    rho = squeezed_vacuum(SqueezingSpec.symmetric(4.3), FockDim(30))
    vmin, vmax, theta_min = variance_extrema(rho)
    assert float(variance_db(vmin)) == pytest.approx(-4.3, abs=1e-3)
    assert float(variance_db(vmax)) == pytest.approx(4.3, abs=1e-3)
    assert theta_min == pytest.approx(0.0, abs=1e-9)


def test_squeezed_axis_follows_phase():
    rho = squeezed_vacuum(SqueezingSpec.symmetric(3.0, phase=1.0), FockDim(30))
    _, _, theta_min = variance_extrema(rho)
    assert theta_min == pytest.approx(0.5, abs=1e-9)


def test_squeezed_thermal_asymmetric():
    spec = SqueezingSpec(-0.5, 3.0, thermal=True)
    vmin, vmax, _ = variance_extrema(squeezed_vacuum(spec, FockDim(30)))
    assert float(variance_db(vmin)) == pytest.approx(-0.5, abs=1e-3)
    assert float(variance_db(vmax)) == pytest.approx(3.0, abs=1e-3)


def test_pure_squeezing_must_be_symmetric():
    with pytest.raises(ValueError):
        SqueezingSpec(-0.5, 3.0)


def test_vacuum_wigner_peaks_at_one_over_pi():
    grid = wigner(fock_state(0, FockDim(4)), WignerGridSpec(-1.0, 1.0, -1.0, 1.0, 3, 3))
    assert grid.values[1, 1] == pytest.approx(1.0 / math.pi)
    assert grid.values.max() == pytest.approx(1.0 / math.pi)


def test_fock_one_wigner_is_negative_at_origin():
    grid = wigner(fock_state(1, FockDim(2)), WignerGridSpec(-1.0, 1.0, -1.0, 1.0, 3, 3))
    assert grid.values[1, 1] == pytest.approx(-1.0 / math.pi)


def test_wigner_rejects_degenerate_grid():
    with pytest.raises(ValueError):
        wigner(fock_state(0, FockDim(1)), WignerGridSpec(0.0, 1.0, 0.0, 1.0, 1, 5))


@pytest.mark.parametrize("make_state", [
    lambda: coherent_state(1.0 + 0.5j, FockDim(15)),
    lambda: squeezed_vacuum(SqueezingSpec.symmetric(3.0), FockDim(20)),
    lambda: random_density_matrix(4, seed=3),
])
def test_wigner_marginal_matches_quadrature_pdf(make_state):
    rho = make_state()
    grid = wigner(rho, WignerGridSpec.covering(rho.dim, 121))
    assert grid.normalization() == pytest.approx(1.0, abs=1e-3)
    expected = quadrature_pdf(rho, 0.0)(grid.x_axis)
    np.testing.assert_allclose(grid.x_marginal(), expected, atol=1e-3)


def test_state_fidelity():
    a = random_density_matrix(3, seed=1)
    assert state_fidelity(a, a) == pytest.approx(1.0, abs=1e-9)
    assert state_fidelity(fock_state(0, FockDim(3)), fock_state(1, FockDim(3))) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionMismatchError):
        state_fidelity(a, fock_state(0, FockDim(2)))


@pytest.mark.parametrize("db, phase", [(1.0, 0.0), (4.3, 0.0), (4.3, 1.3), (6.0, -0.7)])
def test_squeezed_vacuum_is_minimum_uncertainty(db, phase):
    vmin, vmax, _ = variance_extrema(squeezed_vacuum(SqueezingSpec.symmetric(db, phase=phase), FockDim(80)))
    assert vmin * vmax == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize("make_state", [
    lambda dim: coherent_state(1.2 + 0.9j, dim),
    lambda dim: squeezed_vacuum(SqueezingSpec.symmetric(4.3), dim),
])
def test_truncation_never_lowers_fidelity(make_state):
    reference_dim = FockDim(60)
    reference = make_state(reference_dim)
    fidelities = [state_fidelity(make_state(FockDim(n)).resized(reference_dim), reference) for n in range(1, 25)]
    # eigenvalue clipping in the fidelity leaves ~1e-7 noise on pure states
    assert np.all(np.diff(fidelities) >= -1e-6)
    assert fidelities[-1] >= 1.0 - 1e-6


@pytest.mark.parametrize("alpha", [1j, 0.8 + 0.6j, -0.5 + 1.0j])
def test_coherent_wigner_peaks_at_scaled_amplitude(alpha):
    x0, p0 = math.sqrt(2.0) * alpha.real, math.sqrt(2.0) * alpha.imag
    grid = wigner(coherent_state(alpha, FockDim(20)), WignerGridSpec(x0 - 1.0, x0 + 1.0, p0 - 1.0, p0 + 1.0, 21, 21))
    assert np.unravel_index(np.argmax(grid.values), grid.values.shape) == (10, 10)
    assert grid.values[10, 10] == pytest.approx(1.0 / math.pi, abs=1e-6)


def test_mean_variance_examples():
    dim = FockDim(30)
    assert mean_variance(fock_state(0, dim)) == pytest.approx(0.5)
    mixed = DensityMatrix.from_matrix(dim, 0.9 * fock_state(0, dim).elements + 0.1 * fock_state(1, dim).elements)
    assert mean_variance(mixed) == pytest.approx(0.6)
    assert mean_variance(coherent_state(2.0, dim)) == pytest.approx(0.5, abs=1e-9)
