# channel.py
# Ground-truth Kerr phase-shift channel: phase rotation, generalized Bernoulli
# loss and Gaussian excess noise, plus the rank-4 process tensor they define.

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from src.core.fock import DensityMatrix, FockDim, check_same_dim
from src.errors import DimensionMismatchError, NumericError

HERMITICITY_PRESERVATION_TOL = 1e-10
CP_TOL = 1e-8
TRACE_INCREASE_TOL = 1e-8


@dataclass(frozen=True)
class ChannelParams:
    phase_shift: float
    transmission: float
    excess_noise: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.phase_shift):
            raise ValueError("phase_shift must be finite")
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission}")
        if not self.excess_noise >= 0.0:
            raise ValueError(f"excess_noise must be >= 0, got {self.excess_noise}")

    def to_dict(self) -> dict:
        return {
            "phase_shift": self.phase_shift,
            "transmission": self.transmission,
            "excess_noise": self.excess_noise,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChannelParams:
        return cls(
            phase_shift=float(data["phase_shift"]),
            transmission=float(data["transmission"]),
            excess_noise=float(data.get("excess_noise", 0.0)),
            label=str(data.get("label", "")),
        )


@dataclass(frozen=True)
class SignalPowerMap:
    """Channel parameters per signal-field power (mW), powers strictly increasing."""

    entries: tuple[tuple[float, ChannelParams], ...]

    def __post_init__(self):
        entries = tuple((float(p), c) for p, c in self.entries)
        if not entries:
            raise ValueError("a signal power map needs at least one entry")
        powers = [p for p, _ in entries]
        if any(b <= a for a, b in zip(powers, powers[1:])):
            raise ValueError(f"signal powers must be strictly increasing, got {powers}")
        object.__setattr__(self, "entries", entries)

    @property
    def powers(self) -> list[float]:
        return [p for p, _ in self.entries]

    @property
    def channels(self) -> list[ChannelParams]:
        return [c for _, c in self.entries]

    def to_list(self) -> list[dict]:
        return [{"signal_power_mw": p, **c.to_dict()} for p, c in self.entries]

    @classmethod
    def from_list(cls, data: list[dict]) -> SignalPowerMap:
        return cls(tuple((float(e["signal_power_mw"]), ChannelParams.from_dict(e)) for e in data))


@dataclass(frozen=True, eq=False)
class JamiolkowskiOperator:
    """J = sum E_kl^mn |m><n| (input) (x) |k><l| (output); row index m * d + k."""

    dim: FockDim
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        d2 = self.dim.size**2
        if matrix.shape != (d2, d2):
            raise DimensionMismatchError(f"Jamiolkowski matrix {matrix.shape} does not match n_max={self.dim.n_max}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def to_tensor(self) -> ProcessTensor:
        d = self.dim.size
        return ProcessTensor(self.dim, self.matrix.reshape(d, d, d, d).transpose(1, 3, 0, 2))

    def partial_trace_output(self) -> np.ndarray:
        d = self.dim.size
        return np.einsum("mknk->mn", self.matrix.reshape(d, d, d, d))

    def normalized(self) -> np.ndarray:
        return self.matrix / np.trace(self.matrix).real


@dataclass(frozen=True, eq=False)
class ProcessTensor:
    """E_kl^mn with rho_out[k, l] = sum_mn E[k, l, m, n] rho_in[m, n]."""

    dim: FockDim
    elements: np.ndarray

    def __post_init__(self):
        elements = np.array(self.elements, dtype=np.complex128)
        d = self.dim.size
        if elements.shape != (d, d, d, d):
            raise DimensionMismatchError(f"process tensor {elements.shape} does not match n_max={self.dim.n_max}")
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)

    def jamiolkowski(self) -> JamiolkowskiOperator:
        d = self.dim.size
        return JamiolkowskiOperator(self.dim, self.elements.transpose(2, 0, 3, 1).reshape(d * d, d * d))

    def trace_operator(self) -> np.ndarray:
        """sum_k E_kk^mn as a matrix over (m, n); the identity for trace-preserving maps."""
        return np.einsum("kkmn->mn", self.elements)

    def attenuation(self) -> np.ndarray:
        """On-diagonal elements E_kk^mm as a real (k, m) matrix."""
        d = self.dim.size
        idx = np.arange(d)
        return self.elements[idx[:, None], idx[:, None], idx[None, :], idx[None, :]].real

    def truncated(self, dim: FockDim) -> ProcessTensor:
        if dim.size > self.dim.size:
            raise DimensionMismatchError("cannot truncate a process tensor to a larger dimension")
        s = dim.size
        return ProcessTensor(dim, self.elements[:s, :s, :s, :s])

    def validate(self) -> None:
        e = self.elements
        if not np.all(np.isfinite(e)):
            raise NumericError("process tensor contains non-finite elements")
        # E_lk^nm = conj(E_kl^mn)
        if np.max(np.abs(e.transpose(1, 0, 3, 2) - e.conj())) > HERMITICITY_PRESERVATION_TOL:
            raise NumericError("process tensor does not preserve Hermiticity")
        j = self.jamiolkowski().matrix
        smallest = float(np.linalg.eigvalsh(0.5 * (j + j.conj().T))[0])
        if smallest < -CP_TOL:
            raise NumericError(f"process is not completely positive (min Jamiolkowski eigenvalue {smallest:.3e})")
        trace_op = self.trace_operator()
        largest = float(np.linalg.eigvalsh(0.5 * (trace_op + trace_op.conj().T))[-1])
        if largest > 1.0 + TRACE_INCREASE_TOL:
            raise NumericError(f"process increases trace (largest eigenvalue {largest:.6f})")

    def to_dict(self) -> dict:
        flat = self.elements.reshape(-1)
        return {"n_max": self.dim.n_max, "elements": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_dict(cls, data: dict) -> ProcessTensor:
        dim = FockDim(int(data["n_max"]))
        pairs = np.asarray(data["elements"], dtype=float)
        d = dim.size
        return cls(dim, (pairs[:, 0] + 1j * pairs[:, 1]).reshape(d, d, d, d))


def _log_binomial(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _rotate_matrix(matrix: np.ndarray, theta: float) -> np.ndarray:
    n = np.arange(matrix.shape[0])
    return matrix * np.exp(1j * theta * (n[:, None] - n[None, :]))


def _loss_coefficients(transmission: float, size: int, j: int) -> np.ndarray:
    """sqrt(C(k+j, j) C(l+j, j)) T^{(k+l)/2} (1-T)^j for k, l < size - j."""
    k = np.arange(size - j)
    if j > 0 and transmission == 1.0:
        return np.zeros((size - j, size - j))
    log_binom = 0.5 * _log_binomial(k + j, j)
    with np.errstate(divide="ignore"):
        log_t = 0.5 * k * math.log(transmission)
        log_r = j * math.log1p(-transmission) if j > 0 else 0.0
    row = log_binom + log_t
    return np.exp(row[:, None] + row[None, :] + log_r)


def _apply_loss_matrix(matrix: np.ndarray, transmission: float) -> np.ndarray:
    size = matrix.shape[0]
    out = np.zeros_like(matrix, dtype=np.complex128)
    for j in range(size):
        coefficients = _loss_coefficients(transmission, size, j)
        if not coefficients.any():
            continue
        out[: size - j, : size - j] += coefficients * matrix[j:, j:]
    return out


def apply_loss_adjoint(operators: np.ndarray, transmission: float) -> np.ndarray:
    """
    Heisenberg-picture loss sum_j A_j^dag X A_j, broadcast over leading axes.

    Exact inside the truncation: element (m, n) only reads X[m - j, n - j].
    """
    if not 0.0 < transmission <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {transmission}")
    operators = np.asarray(operators, dtype=np.complex128)
    if transmission == 1.0:
        return operators.copy()
    size = operators.shape[-1]
    out = np.zeros_like(operators)
    for j in range(size):
        coefficients = _loss_coefficients(transmission, size, j)
        out[..., j:, j:] += coefficients * operators[..., : size - j, : size - j]
    return out


def _apply_amplifier_matrix(matrix: np.ndarray, gain: float) -> np.ndarray:
    """Quantum-limited amplifier with Kraus B_j|n> = sqrt(C(n+j, j)) q^{j/2} G^{-(n+1)/2} |n+j>."""
    size = matrix.shape[0]
    q = (gain - 1.0) / gain
    out = np.zeros_like(matrix, dtype=np.complex128)
    n = np.arange(size)
    log_g = math.log(gain)
    for j in range(size):
        if j > 0 and q == 0.0:
            break
        k = n[j:]
        row = 0.5 * _log_binomial(k, j) - 0.5 * (k - j + 1) * log_g
        log_q = j * math.log(q) if j > 0 else 0.0
        coefficients = np.exp(row[:, None] + row[None, :] + log_q)
        out[j:, j:] += coefficients * matrix[: size - j, : size - j]
    return out


def _noise_margin(added_variance: float, size: int) -> int:
    q = added_variance / (1.0 + added_variance)
    decay = math.ceil(math.log(1e-18) / math.log(q)) if q > 0 else 0
    return min(size + decay + 10, 400)


def _thermalize_matrix(matrix: np.ndarray, added_variance: float) -> np.ndarray:
    """
    Classical Gaussian noise raising both quadrature variances by `added_variance`:
    loss 1/G followed by amplification G = 1 + added_variance, evaluated in a
    padded space and cropped back without renormalization.
    """
    if added_variance == 0:
        return np.array(matrix, dtype=np.complex128)
    size = matrix.shape[0]
    work = size + _noise_margin(added_variance, size)
    padded = np.zeros((work, work), dtype=np.complex128)
    padded[:size, :size] = matrix
    gain = 1.0 + added_variance
    noisy = _apply_amplifier_matrix(_apply_loss_matrix(padded, 1.0 / gain), gain)
    return noisy[:size, :size]


def _channel_matrix(matrix: np.ndarray, params: ChannelParams) -> np.ndarray:
    out = _apply_loss_matrix(_rotate_matrix(matrix, params.phase_shift), params.transmission)
    return _thermalize_matrix(out, params.excess_noise)


def _from_map_output(rho: DensityMatrix, matrix: np.ndarray) -> DensityMatrix:
    trace = float(np.trace(matrix).real)
    if not trace > 0:
        raise NumericError(f"map output has non-positive trace {trace:.3e}")
    return DensityMatrix.from_matrix(rho.dim, matrix, rho.tail_weight + max(0.0, 1.0 - trace))


def loss_kraus(transmission: float, dim: FockDim) -> list[np.ndarray]:
    """Kraus operators A_j = sum_n sqrt(C(n, j)) T^{(n-j)/2} (1-T)^{j/2} |n-j><n|."""
    if not 0.0 < transmission <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {transmission}")
    size = dim.size
    operators = []
    for j in range(size):
        a = np.zeros((size, size), dtype=np.complex128)
        n = np.arange(j, size)
        if j == 0 or transmission < 1.0:
            log_mag = 0.5 * _log_binomial(n, j) + 0.5 * (n - j) * math.log(transmission)
            if j > 0:
                log_mag = log_mag + 0.5 * j * math.log1p(-transmission)
            a[n - j, n] = np.exp(log_mag)
        operators.append(a)
    return operators


def loss_map(rho: DensityMatrix, transmission: float) -> DensityMatrix:
    """Generalized Bernoulli transformation (beam splitter with vacuum)."""
    if not 0.0 < transmission <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {transmission}")
    if transmission == 1.0:
        return rho
    return _from_map_output(rho, _apply_loss_matrix(rho.elements, transmission))


def thermalize(rho: DensityMatrix, added_variance: float) -> DensityMatrix:
    if not added_variance >= 0:
        raise ValueError(f"added_variance must be >= 0, got {added_variance}")
    if added_variance == 0:
        return rho
    return _from_map_output(rho, _thermalize_matrix(rho.elements, added_variance))


def rotate(rho: DensityMatrix, theta: float) -> DensityMatrix:
    return DensityMatrix.from_matrix(rho.dim, _rotate_matrix(rho.elements, theta), rho.tail_weight)


def simulate_channel(rho: DensityMatrix, params: ChannelParams) -> DensityMatrix:
    """Apply rotation, loss and excess noise directly to a state (no tensor)."""
    return _from_map_output(rho, _channel_matrix(rho.elements, params))


def tensor_from_map(linear_map: Callable[[np.ndarray], np.ndarray], dim: FockDim) -> ProcessTensor:
    """Tabulate a linear map on the matrix units |m><n|."""
    d = dim.size
    elements = np.zeros((d, d, d, d), dtype=np.complex128)
    for m in range(d):
        for n in range(d):
            unit = np.zeros((d, d), dtype=np.complex128)
            unit[m, n] = 1.0
            elements[:, :, m, n] = linear_map(unit)
    return ProcessTensor(dim, elements)


def compose(first: ProcessTensor, second: ProcessTensor) -> ProcessTensor:
    """The process `second` applied after `first`."""
    dim = check_same_dim(first, second)
    return ProcessTensor(dim, np.einsum("klab,abmn->klmn", second.elements, first.elements))


def identity_tensor(dim: FockDim) -> ProcessTensor:
    d = dim.size
    eye = np.eye(d)
    return ProcessTensor(dim, np.einsum("km,ln->klmn", eye, eye).astype(np.complex128))


def oracle_tensor(params: ChannelParams, dim: FockDim) -> ProcessTensor:
    """
    Closed-form phase rotation plus loss,
    E_kl^mn = sqrt(C(m, m-k) C(n, n-l)) T^{(k+l)/2} (1-T)^{m-k} e^{i theta (m-n)}
    for m - k = n - l >= 0, composed numerically with excess noise when n_th > 0.
    """
    d = dim.size
    elements = np.zeros((d, d, d, d), dtype=np.complex128)
    for j in range(d):
        coefficients = _loss_coefficients(params.transmission, d, j)
        for k in range(d - j):
            for l in range(d - j):
                m, n = k + j, l + j
                elements[k, l, m, n] = coefficients[k, l] * np.exp(1j * params.phase_shift * (m - n))
    tensor = ProcessTensor(dim, elements)
    if params.excess_noise > 0:
        noise = tensor_from_map(lambda unit: _thermalize_matrix(unit, params.excess_noise), dim)
        tensor = compose(tensor, noise)
    return tensor


def process_trace(tensor: ProcessTensor, rho: DensityMatrix) -> float:
    check_same_dim(tensor, rho)
    return float(np.einsum("kkmn,mn->", tensor.elements, rho.elements).real)


def apply_process(tensor: ProcessTensor, rho: DensityMatrix) -> DensityMatrix:
    """
    rho_out = E(rho), renormalized. The weight the process did not return
    (1 - pre-normalization trace) is added to the output's tail_weight.
    """
    check_same_dim(tensor, rho)
    out = np.einsum("klmn,mn->kl", tensor.elements, rho.elements)
    trace = float(np.trace(out).real)
    if not trace > 0:
        raise NumericError(f"process output has non-positive trace {trace:.3e}")
    return DensityMatrix.from_matrix(rho.dim, out, rho.tail_weight + max(0.0, 1.0 - trace))


def photon_transmission(tensor: ProcessTensor, rho: DensityMatrix) -> float:
    """<n>_out / <n>_in, with the output left unnormalized."""
    check_same_dim(tensor, rho)
    out = np.einsum("klmn,mn->kl", tensor.elements, rho.elements)
    n = np.arange(rho.size)
    n_in = float(np.dot(n, rho.populations))
    if n_in == 0:
        raise ValueError("input state has no photons")
    return float(np.dot(n, out.diagonal().real)) / n_in
