# state_mle.py
# Maximum-likelihood state reconstruction from binned homodyne data with the
# iterative R rho R algorithm.

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from tqdm import tqdm

from src.config import (
    EXTRAPOLATION_HALVINGS,
    LINE_SEARCH_BISECTIONS,
    LOW_EFFICIENCY_WARNING,
    MAX_STEP_LENGTH,
    PROBABILITY_FLOOR,
    STATE_MLE_MAX_ITERATIONS,
    STATE_MLE_N_MAX,
    STATE_MLE_TOLERANCE,
)
from src.core.fock import DensityMatrix, FockDim
from src.core.homodyne import BinnedHistogram, povm_elements
from src.errors import DimensionMismatchError


@dataclass(frozen=True)
class StateMleConfig:
    dim: FockDim = field(default_factory=lambda: FockDim(STATE_MLE_N_MAX))
    max_iterations: int = STATE_MLE_MAX_ITERATIONS
    log_likelihood_tol: float = STATE_MLE_TOLERANCE
    efficiency: float = 1.0
    phase_sweep: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.log_likelihood_tol > 0:
            raise ValueError("log_likelihood_tol must be positive")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")


@dataclass
class MleDiagnostics:
    iterations_run: int = 0
    final_log_likelihood: float = float("-inf")
    log_likelihood_trace: list[float] = field(default_factory=list)
    converged: bool = False
    floored: bool = False
    extrapolated_steps: int = 0
    step_lengths: list[float] = field(default_factory=list)

    def record(self, value: float) -> None:
        self.log_likelihood_trace.append(value)
        self.final_log_likelihood = value

    def to_dict(self) -> dict:
        return {
            "iterations_run": self.iterations_run,
            "final_log_likelihood": self.final_log_likelihood,
            "log_likelihood_trace": list(self.log_likelihood_trace),
            "converged": self.converged,
            "floored": self.floored,
            "extrapolated_steps": self.extrapolated_steps,
            "step_lengths": list(self.step_lengths),
        }


def log_likelihood(counts: np.ndarray, probabilities: np.ndarray) -> float:
    """sum_j f_j ln p_j with p_j floored at PROBABILITY_FLOOR."""
    counts = np.asarray(counts, dtype=float)
    probabilities = np.maximum(np.asarray(probabilities, dtype=float), PROBABILITY_FLOOR)
    used = counts > 0
    return float(np.sum(counts[used] * np.log(probabilities[used])))


def line_search(counts: np.ndarray, p: np.ndarray, q: np.ndarray, max_step: float = MAX_STEP_LENGTH) -> float:
    """
    argmax over t in [0, max_step] of sum_j f_j ln(p_j + t q_j).

    The objective is concave in t, so its slope decreases and bisection on the
    slope finds the maximum. The interval stops short of the first t at which
    an occupied bin would get a non-positive probability.
    """
    used = np.asarray(counts, dtype=float).ravel() > 0
    f = np.asarray(counts, dtype=float).ravel()[used]
    p = np.maximum(np.asarray(p, dtype=float).ravel()[used], PROBABILITY_FLOOR)
    q = np.asarray(q, dtype=float).ravel()[used]

    def slope(t: float) -> float:
        return float(np.sum(f * q / (p + t * q)))

    if f.size == 0 or not slope(0.0) > 0:
        return 0.0
    falling = q < 0
    if np.any(falling):
        max_step = min(max_step, 0.999 * float(np.min(-p[falling] / q[falling])))
    if slope(max_step) >= 0:
        return max_step
    lower, upper = 0.0, max_step
    for _ in range(LINE_SEARCH_BISECTIONS):
        middle = 0.5 * (lower + upper)
        if slope(middle) > 0:
            lower = middle
        else:
            upper = middle
    return lower


def ascent_step(
    counts: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    feasible: Callable[[float], bool],
    max_step: float = MAX_STEP_LENGTH,
) -> float:
    """
    Step length along X + t (N[R X R] - X). Up to t = 1 the candidate is a
    mixture of two valid operators; longer steps must pass `feasible` and are
    pulled back towards 1 until they do.
    """
    step = line_search(counts, p, q, max_step)
    for _ in range(EXTRAPOLATION_HALVINGS):
        if step <= 1.0 or feasible(step):
            return step
        step = 1.0 + 0.5 * (step - 1.0)
    return min(step, 1.0)


def is_psd(matrix: np.ndarray) -> bool:
    return bool(np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T))[0] >= 0.0)


def _flatten_povm(povm: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    size = povm.shape[-1]
    return povm.reshape(-1, size, size), np.asarray(counts, dtype=float).reshape(-1)


def reconstruct_state(
    hist: BinnedHistogram, config: StateMleConfig, povm: np.ndarray | None = None, progress: bool = False
) -> tuple[DensityMatrix, MleDiagnostics]:
    """
    Iterate rho <- N[R rho R], R = (1/N) sum_j (f_j / p_j) Pi_j, from the
    maximally mixed state until the relative change in log-likelihood drops
    below config.log_likelihood_tol or max_iterations is reached.

    Each update moves along the direction N[R rho R] - rho by the step that
    maximizes the likelihood on that line (t = 1 is the plain update).
    """
    if povm is None:
        povm = povm_elements(hist, config.efficiency, config.dim, config.phase_sweep)
    if povm.shape != hist.shape + (config.dim.size, config.dim.size):
        raise DimensionMismatchError(f"POVM {povm.shape} does not match histogram {hist.shape}")
    elements, counts = _flatten_povm(povm, hist.counts)
    total = counts.sum()
    if total <= 0:
        raise ValueError("cannot reconstruct a state from an empty histogram")

    used = counts > 0
    elements, counts = elements[used], counts[used]
    diagnostics = MleDiagnostics()

    def probabilities(rho: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("jnm,mn->j", elements, rho))

    size = config.dim.size
    rho = np.eye(size, dtype=np.complex128) / size
    current = log_likelihood(counts, probabilities(rho))
    diagnostics.record(current)

    iterations = range(config.max_iterations)
    for _ in tqdm(iterations, desc="State MLE", disable=not progress):
        p = probabilities(rho)
        if np.any(p < PROBABILITY_FLOOR):
            if not diagnostics.floored:
                logging.warning(f"Predicted bin probability below {PROBABILITY_FLOOR:g} for an occupied bin; flooring")
            diagnostics.floored = True
        r_operator = np.einsum("j,jmn->mn", counts / np.maximum(p, PROBABILITY_FLOOR), elements) / total
        target = r_operator @ rho @ r_operator
        target = 0.5 * (target + target.conj().T)
        direction = target / np.trace(target).real - rho
        step = ascent_step(counts, p, probabilities(direction), lambda t: is_psd(rho + t * direction))
        diagnostics.iterations_run += 1
        if step <= 0.0:
            diagnostics.converged = True
            break
        diagnostics.step_lengths.append(step)
        diagnostics.extrapolated_steps += int(step > 1.0)
        rho = rho + step * direction
        rho = 0.5 * (rho + rho.conj().T)
        previous, current = current, log_likelihood(counts, probabilities(rho))
        diagnostics.record(current)
        if abs(current - previous) <= config.log_likelihood_tol * max(abs(previous), 1.0):
            diagnostics.converged = True
            break

    logging.info(
        f"State MLE: {diagnostics.iterations_run} iterations, log-likelihood {diagnostics.final_log_likelihood:.6f}, "
        f"converged={diagnostics.converged}"
    )
    return DensityMatrix.from_matrix(config.dim, rho), diagnostics


def correct_linear_loss(config, eta: float):
    """
    Thread a detection efficiency into a reconstruction config. Loss is always
    corrected on the measurement side (an eta-smoothed POVM), never by
    inverting the loss map on a reconstructed state.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    if eta < LOW_EFFICIENCY_WARNING:
        logging.warning(
            f"Detection efficiency {eta:.3f} is below {LOW_EFFICIENCY_WARNING}; loss correction is ill-conditioned"
        )
    if not any(f.name == "efficiency" for f in dataclasses.fields(config)):
        raise TypeError(f"{type(config).__name__} carries no detection efficiency")
    return dataclasses.replace(config, efficiency=eta)
