# fock.py
# Single-mode states in a truncated photon-number basis: constructors,
# quadrature moments, Wigner functions and fidelity.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from src.config import TRUNCATION_TAIL_WARNING, VACUUM_VARIANCE
from src.errors import DimensionMismatchError, NumericError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
PSD_TOL = 1e-9


@dataclass(frozen=True)
class FockDim:
    """Truncation of the photon-number basis; matrices are (n_max + 1) square."""

    n_max: int

    def __post_init__(self):
        if isinstance(self.n_max, bool) or int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def size(self) -> int:
        return self.n_max + 1


def check_same_dim(*objects) -> FockDim:
    dims = {o.dim for o in objects}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mismatched Fock dimensions: {sorted(d.n_max for d in dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Density matrix rho_mn; row and column indices are photon numbers.

    `tail_weight` records the population discarded by truncation (or lost by a
    trace-decreasing map) before the matrix was renormalized.
    """

    dim: FockDim
    elements: np.ndarray
    tail_weight: float = 0.0

    def __post_init__(self):
        elements = np.array(self.elements, dtype=np.complex128)
        if elements.shape != (self.dim.size, self.dim.size):
            raise DimensionMismatchError(
                f"elements of shape {elements.shape} do not match n_max={self.dim.n_max}"
            )
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "tail_weight", float(self.tail_weight))

    @classmethod
    def from_matrix(cls, dim: FockDim, matrix, tail_weight: float = 0.0) -> DensityMatrix:
        """Hermitize, renormalize to unit trace and validate."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = float(np.trace(matrix).real)
        if not trace > 0:
            raise NumericError(f"density matrix has non-positive trace {trace:.3e}")
        rho = cls(dim, matrix / trace, tail_weight)
        rho.validate()
        return rho

    @classmethod
    def from_pure(cls, dim: FockDim, amplitudes, tail_weight: float = 0.0) -> DensityMatrix:
        psi = np.asarray(amplitudes, dtype=np.complex128)
        return cls.from_matrix(dim, np.outer(psi, psi.conj()), tail_weight)

    @property
    def size(self) -> int:
        return self.dim.size

    @property
    def populations(self) -> np.ndarray:
        return self.elements.diagonal().real.copy()

    def validate(self) -> None:
        rho = self.elements
        if not np.all(np.isfinite(rho)):
            raise NumericError("density matrix contains non-finite elements")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise NumericError("density matrix is not Hermitian")
        trace = float(np.trace(rho).real)
        if abs(trace - 1.0) > TRACE_TOL:
            raise NumericError(f"density matrix trace {trace:.12f} differs from 1")
        smallest = float(np.linalg.eigvalsh(rho)[0])
        if smallest < -PSD_TOL:
            raise NumericError(f"density matrix is not positive semidefinite (min eigenvalue {smallest:.3e})")

    def resized(self, dim: FockDim) -> DensityMatrix:
        """Embed into a larger space, or crop to a smaller one and renormalize."""
        if dim.size >= self.size:
            padded = np.zeros((dim.size, dim.size), dtype=np.complex128)
            padded[: self.size, : self.size] = self.elements
            return DensityMatrix(dim, padded, self.tail_weight)
        cropped = self.elements[: dim.size, : dim.size]
        kept = float(np.trace(cropped).real)
        return DensityMatrix.from_matrix(dim, cropped, self.tail_weight + (1.0 - kept))

    def to_dict(self) -> dict:
        return {
            "n_max": self.dim.n_max,
            "re": self.elements.real.tolist(),
            "im": self.elements.imag.tolist(),
            "tail_weight": self.tail_weight,
        }

    @classmethod
    def from_dict(cls, data: dict) -> DensityMatrix:
        dim = FockDim(int(data["n_max"]))
        elements = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return cls(dim, elements, float(data.get("tail_weight", 0.0)))


@dataclass(frozen=True)
class SqueezingSpec:
    """Quadrature variances in dB relative to vacuum; `phase` is the squeezing angle phi."""

    squeezing_db: float
    antisqueezing_db: float
    phase: float = 0.0
    thermal: bool = False

    def __post_init__(self):
        if not self.squeezing_db <= 0.0 <= self.antisqueezing_db:
            raise ValueError("expected squeezing_db <= 0 <= antisqueezing_db")
        if self.thermal:
            if self.squeezing_db + self.antisqueezing_db < -1e-12:
                raise ValueError("variances violate the uncertainty relation")
        elif not math.isclose(self.squeezing_db, -self.antisqueezing_db, abs_tol=1e-9):
            raise ValueError(
                "a pure squeezed vacuum needs squeezing_db == -antisqueezing_db; set thermal=True otherwise"
            )

    @classmethod
    def symmetric(cls, db: float, phase: float = 0.0) -> SqueezingSpec:
        return cls(-abs(db), abs(db), phase)

    @property
    def squeeze_parameter(self) -> float:
        return (self.antisqueezing_db - self.squeezing_db) * math.log(10.0) / 40.0


@dataclass(frozen=True)
class WignerGridSpec:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    x_points: int
    p_points: int

    @classmethod
    def covering(cls, dim: FockDim, points: int = 121, padding: float = 2.0) -> WignerGridSpec:
        half = math.sqrt(2.0 * dim.n_max) + padding
        return cls(-half, half, -half, half, points, points)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(x_axis[i], p_axis[j])

    def normalization(self) -> float:
        dx = self.x_axis[1] - self.x_axis[0]
        dp = self.p_axis[1] - self.p_axis[0]
        return float(self.values.sum() * dx * dp)

    def x_marginal(self) -> np.ndarray:
        dp = self.p_axis[1] - self.p_axis[0]
        return self.values.sum(axis=1) * dp


def _photon_numbers(dim: FockDim) -> np.ndarray:
    return np.arange(dim.size)


def annihilation(dim: FockDim) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim.size, dtype=float)), k=1).astype(np.complex128)


def required_n_max(alpha: complex) -> int:
    """Truncation guard |alpha|^2 + 4|alpha| + 4 for a coherent state."""
    amplitude = abs(alpha)
    return int(math.ceil(amplitude**2 + 4.0 * amplitude + 4.0 - 1e-12))


def coherent_amplitudes(alpha: complex, dim: FockDim) -> np.ndarray:
    """Poissonian amplitudes exp(-|a|^2/2) a^n / sqrt(n!), without renormalization."""
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError(f"coherent amplitude must be finite, got {alpha!r}")
    n = _photon_numbers(dim)
    psi = np.zeros(dim.size, dtype=np.complex128)
    if alpha == 0:
        psi[0] = 1.0
        return psi
    r, phi = abs(alpha), math.atan2(alpha.imag, alpha.real)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * phi * n)


def coherent_state(alpha: complex, dim: FockDim) -> DensityMatrix:
    psi = coherent_amplitudes(alpha, dim)
    if dim.n_max < required_n_max(alpha):
        logging.warning(
            f"Coherent state |alpha|={abs(alpha):.3f} truncated at n_max={dim.n_max} "
            f"(guard {required_n_max(alpha)}); tail weight {1.0 - np.sum(np.abs(psi) ** 2):.2e}"
        )
    tail = max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2)))
    return DensityMatrix.from_pure(dim, psi, tail)


def fock_state(n: int, dim: FockDim) -> DensityMatrix:
    if not 0 <= n <= dim.n_max:
        raise ValueError(f"photon number {n} outside 0..{dim.n_max}")
    psi = np.zeros(dim.size, dtype=np.complex128)
    psi[n] = 1.0
    return DensityMatrix.from_pure(dim, psi)


def thermal_state(mean_photons: float, dim: FockDim) -> DensityMatrix:
    if mean_photons < 0:
        raise ValueError("mean photon number must be non-negative")
    n = _photon_numbers(dim)
    if mean_photons == 0:
        populations = (n == 0).astype(float)
    else:
        populations = mean_photons**n / (1.0 + mean_photons) ** (n + 1)
    tail = max(0.0, 1.0 - float(populations.sum()))
    return DensityMatrix.from_matrix(dim, np.diag(populations), tail)


def fock_qubit(c0: complex, c1: complex, dim: FockDim) -> DensityMatrix:
    if dim.n_max < 1:
        raise ValueError("a Fock qubit needs n_max >= 1")
    norm = math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    if norm == 0:
        raise ValueError("both qubit coefficients are zero")
    psi = np.zeros(dim.size, dtype=np.complex128)
    psi[0], psi[1] = complex(c0) / norm, complex(c1) / norm
    return DensityMatrix.from_pure(dim, psi)


def _squeezed_vacuum_amplitudes(spec: SqueezingSpec, dim: FockDim) -> np.ndarray:
    r = spec.squeeze_parameter
    psi = np.zeros(dim.size, dtype=np.complex128)
    if r == 0:
        psi[0] = 1.0
        return psi
    k = np.arange(dim.n_max // 2 + 1)
    ratio = -np.exp(1j * spec.phase) * math.tanh(r)
    log_coefficient = 0.5 * gammaln(2 * k + 1) - k * math.log(2.0) - gammaln(k + 1)
    psi[2 * k] = ratio**k * np.exp(log_coefficient) / math.sqrt(math.cosh(r))
    return psi


def _squeezed_thermal(spec: SqueezingSpec, dim: FockDim) -> tuple[np.ndarray, float]:
    v_minus = VACUUM_VARIANCE * 10.0 ** (spec.squeezing_db / 10.0)
    v_plus = VACUUM_VARIANCE * 10.0 ** (spec.antisqueezing_db / 10.0)
    r = math.log(v_plus / v_minus) / 4.0
    mean_photons = math.sqrt(v_minus * v_plus) - 0.5
    work = FockDim(dim.n_max + 40)
    a = annihilation(work)
    xi = r * np.exp(1j * spec.phase)
    squeeze = expm(0.5 * (np.conj(xi) * a @ a - xi * a.conj().T @ a.conj().T))
    thermal = thermal_state(mean_photons, work).elements
    rho = squeeze @ thermal @ squeeze.conj().T
    cropped = rho[: dim.size, : dim.size]
    return cropped, max(0.0, 1.0 - float(np.trace(cropped).real))


def squeezed_vacuum(spec: SqueezingSpec, dim: FockDim) -> DensityMatrix:
    """Squeezed vacuum whose quadrature x_theta is squeezed at theta = phase / 2."""
    if spec.thermal:
        matrix, tail = _squeezed_thermal(spec, dim)
    else:
        psi = _squeezed_vacuum_amplitudes(spec, dim)
        matrix, tail = np.outer(psi, psi.conj()), max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2)))
    if tail > TRUNCATION_TAIL_WARNING:
        logging.warning(f"Squeezed state truncated at n_max={dim.n_max}: tail weight {tail:.2e}")
    return DensityMatrix.from_matrix(dim, matrix, tail)


def expect_a(rho: DensityMatrix) -> complex:
    return complex(np.trace(rho.elements @ annihilation(rho.dim)))


def expect_a2(rho: DensityMatrix) -> complex:
    a = annihilation(rho.dim)
    return complex(np.trace(rho.elements @ a @ a))


def mean_photon_number(rho: DensityMatrix) -> float:
    return float(np.dot(_photon_numbers(rho.dim), rho.populations))


def quadrature_mean(rho: DensityMatrix, theta):
    """<x_theta> with x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)."""
    theta = np.asarray(theta, dtype=float)
    result = math.sqrt(2.0) * np.real(expect_a(rho) * np.exp(-1j * theta))
    return float(result) if result.ndim == 0 else result


def quadrature_variance(rho: DensityMatrix, theta):
    """Var(x_theta); the vacuum gives 1/2 at every theta."""
    theta = np.asarray(theta, dtype=float)
    a1, a2 = expect_a(rho), expect_a2(rho)
    second = mean_photon_number(rho) + 0.5 + np.real(a2 * np.exp(-2j * theta))
    result = second - 2.0 * np.real(a1 * np.exp(-1j * theta)) ** 2
    return float(result) if result.ndim == 0 else result


def mean_variance(rho: DensityMatrix) -> float:
    """Phase-averaged quadrature variance (Var(x) + Var(p)) / 2."""
    return mean_photon_number(rho) + 0.5 - abs(expect_a(rho)) ** 2


def variance_extrema(rho: DensityMatrix) -> tuple[float, float, float]:
    """
    Minimum and maximum of Var(x_theta) over theta and the squeezed angle in [0, pi).

    Var(x_theta) = c + Re[(<a^2> - <a>^2) e^{-2 i theta}] exactly, so the
    extrema are c -/+ |<a^2> - <a>^2|.
    """
    a1 = expect_a(rho)
    z = expect_a2(rho) - a1 * a1
    c = mean_variance(rho)
    if abs(z) < 1e-15:
        return c, c, 0.0
    theta_min = ((np.angle(z) - math.pi) / 2.0) % math.pi
    return c - abs(z), c + abs(z), float(theta_min)


def variance_db(variance) -> float:
    """10 log10(variance / vacuum variance)."""
    return 10.0 * np.log10(np.asarray(variance, dtype=float) / VACUUM_VARIANCE)


def wigner(rho: DensityMatrix, grid_spec: WignerGridSpec) -> WignerGrid:
    """Wigner function from the Laguerre kernel; the vacuum peaks at 1/pi."""
    if grid_spec.x_points <= 1 or grid_spec.p_points <= 1:
        raise ValueError("Wigner grid needs at least two points per axis")
    x_axis = np.linspace(grid_spec.x_min, grid_spec.x_max, grid_spec.x_points)
    p_axis = np.linspace(grid_spec.p_min, grid_spec.p_max, grid_spec.p_points)
    x, p = np.meshgrid(x_axis, p_axis, indexing="ij")
    r2 = x * x + p * p
    z = x - 1j * p
    gaussian = np.exp(-r2) / math.pi
    values = np.zeros_like(r2)
    elements = rho.elements
    for m in range(rho.size):
        for n in range(m + 1):
            coefficient = elements[m, n]
            if coefficient == 0:
                continue
            k = m - n
            scale = math.exp(0.5 * (k * math.log(2.0) + gammaln(n + 1) - gammaln(m + 1)))
            kernel = (-1) ** n * scale * z**k * eval_genlaguerre(n, k, 2.0 * r2) * gaussian
            if k == 0:
                values += coefficient.real * kernel.real
            else:
                values += 2.0 * np.real(coefficient * kernel)
    return WignerGrid(x_axis, p_axis, values)


def _psd_sqrt(matrix: np.ndarray, label: str) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    if eigenvalues[0] < -PSD_TOL:
        raise NumericError(f"{label} is not positive semidefinite (min eigenvalue {eigenvalues[0]:.3e})")
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.conj().T


def uhlmann_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """(Tr sqrt(sqrt(a) b sqrt(a)))^2 for unit-trace PSD matrices, clipped to [0, 1]."""
    root_a = _psd_sqrt(a, "first argument")
    _psd_sqrt(b, "second argument")
    inner = root_a @ b @ root_a
    eigenvalues = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    fidelity = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))) ** 2)
    return min(1.0, max(0.0, fidelity))


def state_fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    check_same_dim(a, b)
    return uhlmann_fidelity(a.elements, b.elements)
