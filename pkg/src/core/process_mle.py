# process_mle.py
# Coherent-state quantum process tomography: maximum-likelihood reconstruction
# of the process tensor from probe histograms, output phases, phase slices,
# Jamiolkowski fidelity, bootstrap errors and predictions for other inputs.

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from src.config import (
    BOOTSTRAP_RESAMPLES,
    PHASE_SLICE_FLOOR,
    PROCESS_MLE_ITERATIONS,
    PROCESS_N_MAX,
    PROCESS_SUPPORT_FLOOR,
    PROBE_STATE_MLE_ITERATIONS,
    PROCESS_SEED_MIN_TRANSMISSION,
    PROCESS_SEED_MIXING,
    PROBABILITY_FLOOR,
    VARIANCE_CURVE_POINTS,
)
from src.core.channel import (
    ChannelParams,
    JamiolkowskiOperator,
    ProcessTensor,
    apply_process,
    oracle_tensor,
    process_trace,
)
from src.core.fock import (
    DensityMatrix,
    FockDim,
    SqueezingSpec,
    check_same_dim,
    coherent_amplitudes,
    coherent_state,
    fock_qubit,
    quadrature_variance,
    required_n_max,
    squeezed_vacuum,
    uhlmann_fidelity,
    variance_db,
    variance_extrema,
)
from src.core.homodyne import BinnedHistogram, phase_bin_factors, povm_elements
from src.core.state_mle import MleDiagnostics, StateMleConfig, ascent_step, is_psd, log_likelihood, reconstruct_state
from src.errors import DimensionMismatchError, NumericError
from src.utils import substream, wrap_phase

TRACE_MODES = ("non-increasing", "preserving")
INPUT_MODES = ("calibrated", "reconstructed")
START_MODES = ("fitted-channel", "maximally-mixed")
PSD_DRIFT_TOL = 1e-8
TRACE_BOUND_TOL = 1e-12
PRESERVING_FLOOR = 1e-15
SQUEEZED_TAIL_WARNING = 1e-3
UNDEFINED_PHASE_MAGNITUDE = 1e-14


@dataclass(frozen=True)
class Probe:
    alpha: complex
    output: BinnedHistogram
    input: BinnedHistogram | None = None


@dataclass(frozen=True)
class ProbeSet:
    """Coherent probes sharing one set of bin edges and one detection efficiency."""

    probes: tuple[Probe, ...]
    efficiency: float
    phase_sweep: tuple[float, ...] | None = None
    analytic: bool = False

    def __post_init__(self):
        probes = tuple(self.probes)
        if not probes:
            raise ValueError("a probe set needs at least one probe")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        template = probes[0].output
        for i, probe in enumerate(probes):
            for hist in (probe.output, probe.input):
                if hist is not None and not hist.same_edges(template):
                    raise DimensionMismatchError(f"probe {i} histogram edges differ from the shared edges")
        object.__setattr__(self, "probes", probes)

    def __len__(self) -> int:
        return len(self.probes)

    @property
    def template(self) -> BinnedHistogram:
        return self.probes[0].output

    @property
    def amplitudes(self) -> list[complex]:
        return [complex(p.alpha) for p in self.probes]

    def with_counts(self, outputs, inputs=None) -> ProbeSet:
        inputs = inputs if inputs is not None else [None] * len(self.probes)
        probes = tuple(
            Probe(
                p.alpha,
                p.output.with_counts(out),
                p.input.with_counts(inp) if p.input is not None and inp is not None else p.input,
            )
            for p, out, inp in zip(self.probes, outputs, inputs)
        )
        return replace(self, probes=probes)


@dataclass(frozen=True)
class ProcessMleConfig:
    dim: FockDim = field(default_factory=lambda: FockDim(PROCESS_N_MAX))
    iterations: int = PROCESS_MLE_ITERATIONS
    phase_covariant: bool = True
    trace_mode: str = "non-increasing"
    working_n_max: int | None = None
    input_mode: str = "calibrated"
    keep_working_dim: bool = False
    start: str = "fitted-channel"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.trace_mode not in TRACE_MODES:
            raise ValueError(f"trace_mode must be one of {TRACE_MODES}, got {self.trace_mode!r}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}, got {self.input_mode!r}")
        if self.start not in START_MODES:
            raise ValueError(f"start must be one of {START_MODES}, got {self.start!r}")
        if self.working_n_max is not None and self.working_n_max < self.dim.n_max:
            raise ValueError("working_n_max must not be below dim.n_max")


def working_dim(probes: ProbeSet, config: ProcessMleConfig) -> FockDim:
    """Fock space wide enough for the strongest probe (truncation guard), at least config.dim."""
    if config.working_n_max is not None:
        return FockDim(config.working_n_max)
    guard = max(required_n_max(alpha) for alpha in probes.amplitudes)
    return FockDim(max(guard, config.dim.n_max))


def probe_inputs(probes: ProbeSet, config: ProcessMleConfig, dim: FockDim) -> list[DensityMatrix]:
    if config.input_mode == "calibrated":
        return [coherent_state(alpha, dim) for alpha in probes.amplitudes]
    inputs = []
    state_config = StateMleConfig(
        dim=dim,
        max_iterations=PROBE_STATE_MLE_ITERATIONS,
        efficiency=probes.efficiency,
        phase_sweep=probes.phase_sweep,
    )
    povm = povm_elements(probes.template, probes.efficiency, dim, probes.phase_sweep)
    for i, probe in enumerate(probes.probes):
        if probe.input is None:
            raise ValueError(f"probe {i} has no input histogram; input_mode='reconstructed' needs one")
        rho, _ = reconstruct_state(probe.input, state_config, povm=povm)
        inputs.append(rho)
    return inputs


class _CovariantBlocks:
    """Index sets of the Jamiolkowski matrix with fixed m - k; J of a phase-covariant map is block diagonal in them."""

    def __init__(self, size: int):
        m, k = np.divmod(np.arange(size * size), size)
        delta = m - k
        self.blocks = [np.flatnonzero(delta == d) for d in range(-(size - 1), size)]
        self.mask = delta[:, None] == delta[None, :]

    def project(self, matrix: np.ndarray) -> np.ndarray:
        return np.where(self.mask, matrix, 0.0)

    def sandwich(self, r: np.ndarray, j: np.ndarray) -> np.ndarray:
        """P(R J R) for block-diagonal J."""
        rj = np.zeros_like(r)
        for idx in self.blocks:
            rj[:, idx] = r[:, idx] @ j[np.ix_(idx, idx)]
        out = np.zeros_like(r)
        for idx in self.blocks:
            out[np.ix_(idx, idx)] = rj[idx, :] @ r[:, idx]
        return out


def _partial_trace_output(matrix: np.ndarray, size: int) -> np.ndarray:
    return np.einsum("mknk->mn", matrix.reshape(size, size, size, size))


def _normalize_trace(x: np.ndarray, size: int, trace_mode: str, covariant: bool) -> np.ndarray:
    """(lambda^{-1/2} (x) I) X (lambda^{-1/2} (x) I) with lambda = Tr_out X clipped at the support floor."""
    lam = _partial_trace_output(x, size)
    floor = PROCESS_SUPPORT_FLOOR if trace_mode == "non-increasing" else PRESERVING_FLOOR
    if covariant:
        diagonal = lam.diagonal().real
        clipped = np.maximum(diagonal, floor * max(diagonal.max(), 0.0) + 1e-300)
        scale = np.repeat(1.0 / np.sqrt(clipped), size)
        return x * scale[:, None] * scale[None, :]
    eigenvalues, vectors = np.linalg.eigh(0.5 * (lam + lam.conj().T))
    clipped = np.maximum(eigenvalues, floor * max(eigenvalues.max(), 0.0) + 1e-300)
    inv_sqrt = (vectors / np.sqrt(clipped)) @ vectors.conj().T
    left = np.kron(inv_sqrt, np.eye(size))
    return left @ x @ left.conj().T


def _is_valid_operator(j: np.ndarray, size: int, blocks: _CovariantBlocks | None) -> bool:
    """PSD with Tr_out J <= I; used to accept over-relaxed steps."""
    lam = _partial_trace_output(j, size)
    if blocks is not None:
        if lam.diagonal().real.max() > 1.0 + TRACE_BOUND_TOL:
            return False
        return all(is_psd(j[np.ix_(idx, idx)]) for idx in blocks.blocks)
    if np.linalg.eigvalsh(0.5 * (lam + lam.conj().T))[-1] > 1.0 + TRACE_BOUND_TOL:
        return False
    return is_psd(j)


def _column_means(hist: BinnedHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Mean bin-centre quadrature and record count of every phase column."""
    centres = 0.5 * (hist.quad_edges[:-1] + hist.quad_edges[1:])
    counts = np.asarray(hist.counts, dtype=float)
    totals = counts.sum(axis=1)
    means = np.divide(counts @ centres, totals, out=np.zeros_like(totals), where=totals > 0)
    return means, totals


def fitted_channel(probes: ProbeSet) -> ChannelParams | None:
    """
    Rotation and loss implied by the probes' mean output quadratures.

    Every phase column's mean is sqrt(2 eta) Re(beta conj(u)), with u the
    column's mean e^{i theta}; a least-squares fit gives each output amplitude
    beta_i, and beta_i = sqrt(T) e^{i theta} alpha_i gives the channel.
    Returns None when no probe carries a coherent amplitude.
    """
    alphas = np.asarray(probes.amplitudes, dtype=np.complex128)
    norm = float(np.sum(np.abs(alphas) ** 2))
    if norm == 0:
        return None
    u = phase_bin_factors(probes.template.phase_edges, 2, probes.phase_sweep)[:, 1, 0]
    design = np.column_stack([u.real, u.imag]) * math.sqrt(2.0 * probes.efficiency)
    betas = []
    for probe in probes.probes:
        means, totals = _column_means(probe.output)
        weights = np.sqrt(totals)
        (b_re, b_im), *_ = np.linalg.lstsq(design * weights[:, None], means * weights, rcond=None)
        betas.append(complex(b_re, b_im))
    gain = complex(np.sum(np.asarray(betas) * alphas.conj()) / norm)
    transmission = min(1.0, max(PROCESS_SEED_MIN_TRANSMISSION, abs(gain) ** 2))
    return ChannelParams(phase_shift=float(np.angle(gain)), transmission=transmission, label="fitted")


def initial_operator(probes: ProbeSet, config: ProcessMleConfig, dim: FockDim) -> np.ndarray:
    """
    Starting Jamiolkowski operator: the fitted rotation-plus-loss channel mixed
    with a PROCESS_SEED_MIXING share of I / d, or I / d alone.
    """
    size = dim.size
    mixed = np.eye(size * size, dtype=np.complex128) / size
    if config.start == "maximally-mixed":
        return mixed
    params = fitted_channel(probes)
    if params is None:
        logging.info("No coherent probe amplitude to fit a channel to; starting from I / d")
        return mixed
    logging.info(
        f"Starting from the fitted channel theta={params.phase_shift:.4f}, T={params.transmission:.4f} "
        f"mixed with {PROCESS_SEED_MIXING:g} of I / d"
    )
    seed = oracle_tensor(params, dim).jamiolkowski().matrix
    return (1.0 - PROCESS_SEED_MIXING) * seed + PROCESS_SEED_MIXING * mixed


def _as_tensor(j: np.ndarray, dim: FockDim) -> ProcessTensor:
    return JamiolkowskiOperator(dim, j).to_tensor()


def reconstruct_process(
    probes: ProbeSet, config: ProcessMleConfig, progress: bool = False
) -> tuple[ProcessTensor, MleDiagnostics]:
    """
    Maximize sum_ij f_ij ln Tr[J (rho_i^T (x) Pi_j)] over PSD Jamiolkowski
    operators with J <- N[(lambda^{-1/2} (x) I) R J R (lambda^{-1/2} (x) I)],
    R = sum_ij (f_ij / p_ij) rho_i^T (x) Pi_j.

    Each iteration moves J along the direction of that update by the step that
    maximizes the likelihood on the line, so the likelihood never decreases.
    The reconstruction runs in the probes' working Fock space and is truncated
    to config.dim afterwards unless config.keep_working_dim is set.
    """
    distinct = {round(abs(alpha), 12) for alpha in probes.amplitudes}
    if len(distinct) < 2:
        logging.warning("Probe set has a single amplitude; the process is not tomographically determined")

    dim = working_dim(probes, config)
    size = dim.size
    inputs = np.stack([rho.elements for rho in probe_inputs(probes, config, dim)])
    povm = povm_elements(probes.template, probes.efficiency, dim, probes.phase_sweep)
    povm = povm.reshape(-1, size, size)
    counts = np.stack([np.asarray(p.output.counts, dtype=float).reshape(-1) for p in probes.probes])
    total = counts.sum()
    if total <= 0:
        raise ValueError("probe set holds no counts")
    used = counts.sum(axis=0) > 0
    povm, counts = povm[used], counts[:, used]
    logging.info(
        f"csQPT: {len(probes)} probes, {int(used.sum())} occupied bins, working n_max={dim.n_max}, "
        f"target n_max={config.dim.n_max}, covariant={config.phase_covariant}, trace_mode={config.trace_mode}"
    )

    blocks = _CovariantBlocks(size) if config.phase_covariant else None

    def probabilities(j: np.ndarray) -> np.ndarray:
        tensor = j.reshape(size, size, size, size).transpose(1, 3, 0, 2)
        outputs = np.einsum("klmn,imn->ikl", tensor, inputs)
        return np.real(np.einsum("jlk,ikl->ij", povm, outputs))

    def r_operator(p: np.ndarray) -> np.ndarray:
        ratios = counts / np.maximum(p, PROBABILITY_FLOOR)
        ratios[counts == 0] = 0.0
        s = np.einsum("ij,jmn->imn", ratios, povm)
        r = np.zeros((size * size, size * size), dtype=np.complex128)
        for rho, s_i in zip(inputs, s):
            r += np.kron(rho.T, s_i)
        return r / total

    def update(r: np.ndarray) -> np.ndarray:
        x = blocks.sandwich(r, j) if blocks is not None else r @ j @ r
        x = 0.5 * (x + x.conj().T)
        return _normalize_trace(x, size, config.trace_mode, blocks is not None)

    j = initial_operator(probes, config, dim)
    if blocks is not None:
        j = blocks.project(j)
    diagnostics = MleDiagnostics()
    current = log_likelihood(counts, probabilities(j))
    diagnostics.record(current)
    for _ in tqdm(range(config.iterations), desc="csQPT", disable=not progress):
        p = probabilities(j)
        if np.any(p[counts > 0] < PROBABILITY_FLOOR):
            diagnostics.floored = True
        direction = update(r_operator(p)) - j
        step = ascent_step(
            counts, p, probabilities(direction), lambda t: _is_valid_operator(j + t * direction, size, blocks)
        )
        diagnostics.iterations_run += 1
        if step <= 0.0:
            logging.info("csQPT likelihood is stationary; stopping early")
            diagnostics.converged = True
            break
        diagnostics.step_lengths.append(step)
        diagnostics.extrapolated_steps += int(step > 1.0)
        j = j + step * direction
        j = 0.5 * (j + j.conj().T)
        current = log_likelihood(counts, probabilities(j))
        diagnostics.record(current)

    smallest = float(np.linalg.eigvalsh(0.5 * (j + j.conj().T))[0])
    if smallest < -PSD_DRIFT_TOL * max(1.0, np.trace(j).real):
        raise NumericError(
            f"Jamiolkowski operator drifted from PSD (min eigenvalue {smallest:.3e}) after "
            f"{diagnostics.iterations_run} iterations"
        )
    tensor = _as_tensor(j, dim)
    if not config.keep_working_dim:
        tensor = tensor.truncated(config.dim)
    tensor.validate()
    logging.info(
        f"csQPT finished: {diagnostics.iterations_run} iterations, log-likelihood "
        f"{diagnostics.final_log_likelihood:.6f}, over-relaxed steps {diagnostics.extrapolated_steps}"
    )
    return tensor, diagnostics


# --- Reading the process ---


def output_phase(tensor: ProcessTensor, rho_in: DensityMatrix, k: int, l: int) -> float:
    """phi_kl = Im ln(sum_mn E_kl^mn rho_mn), in (-pi, pi]."""
    check_same_dim(tensor, rho_in)
    if not (0 <= k < tensor.dim.size and 0 <= l < tensor.dim.size):
        raise ValueError(f"output element ({k}, {l}) outside the truncation")
    element = complex(np.sum(tensor.elements[k, l] * rho_in.elements))
    if abs(element) < UNDEFINED_PHASE_MAGNITUDE:
        raise NumericError(f"output element ({k}, {l}) vanishes; its phase is undefined")
    return wrap_phase(np.angle(element))


def truncated_coherent(alpha: complex, dim: FockDim) -> DensityMatrix:
    """Coherent state cut at dim and renormalized, without the truncation-guard warning."""
    psi = coherent_amplitudes(alpha, dim)
    return DensityMatrix.from_pure(dim, psi, max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2))))


def probe_phases(tensor: ProcessTensor, amplitudes, k: int = 0, l: int = 1) -> np.ndarray:
    """output_phase for coherent inputs at each nonzero amplitude."""
    return np.array(
        [output_phase(tensor, truncated_coherent(alpha, tensor.dim), k, l) for alpha in amplitudes if abs(alpha) > 0]
    )


@dataclass(frozen=True, eq=False)
class PhaseSlice:
    k: int
    l: int
    values: np.ndarray  # Im ln E_kl^mn, NaN where undefined
    defined: np.ndarray

    def rows(self) -> list[tuple[int, int, float, bool]]:
        size = self.values.shape[0]
        return [
            (m, n, float(self.values[m, n]), bool(self.defined[m, n])) for m in range(size) for n in range(size)
        ]


def phase_slice(tensor: ProcessTensor, k: int = 0, l: int = 1, floor: float = PHASE_SLICE_FLOOR) -> PhaseSlice:
    elements = tensor.elements[k, l]
    defined = np.abs(elements) > floor
    values = np.full(elements.shape, np.nan)
    values[defined] = wrap_phase(np.angle(elements[defined]))
    return PhaseSlice(k, l, values, defined)


def process_fidelity(a: ProcessTensor, b: ProcessTensor) -> float:
    """Uhlmann fidelity of the trace-normalized Jamiolkowski operators."""
    check_same_dim(a, b)
    return uhlmann_fidelity(a.jamiolkowski().normalized(), b.jamiolkowski().normalized())


def attenuation(tensor: ProcessTensor) -> np.ndarray:
    """E_kk^mm: probability that m input photons leave as k."""
    return tensor.attenuation()


def bernoulli_attenuation(transmission: float, dim: FockDim) -> np.ndarray:
    """C(m, k) T^k (1 - T)^{m - k} for k <= m."""
    size = dim.size
    table = np.zeros((size, size))
    for m in range(size):
        for k in range(m + 1):
            table[k, m] = math.comb(m, k) * transmission**k * (1.0 - transmission) ** (m - k)
    return table


# --- Bootstrap ---


@dataclass
class BootstrapSummary:
    fidelities: list[float]
    slice_mean: np.ndarray
    slice_std: np.ndarray
    max_relative_spread: float
    tensors: list[ProcessTensor] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "fidelities": list(self.fidelities),
            "min_fidelity": min(self.fidelities) if self.fidelities else None,
            "slice_mean": np.where(np.isnan(self.slice_mean), None, self.slice_mean).tolist(),
            "slice_std": np.where(np.isnan(self.slice_std), None, self.slice_std).tolist(),
            "max_relative_spread": self.max_relative_spread,
        }


def _resample(probes: ProbeSet, seed: int, index: int) -> ProbeSet:
    if probes.analytic:
        return probes
    rng = substream(seed, "bootstrap", index)
    outputs = [rng.poisson(np.asarray(p.output.counts, dtype=float)) for p in probes.probes]
    inputs = [
        rng.poisson(np.asarray(p.input.counts, dtype=float)) if p.input is not None else None for p in probes.probes
    ]
    return probes.with_counts(outputs, inputs)


def bootstrap(
    probes: ProbeSet,
    config: ProcessMleConfig,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int | None = None,
    point_estimate: ProcessTensor | None = None,
    threads: int = 1,
    k: int = 0,
    l: int = 1,
) -> BootstrapSummary:
    """
    Poisson-resample every bin count, rebuild the process for each resample and
    compare it with the point estimate. Resample i draws from the named stream
    ("bootstrap", i), so results do not depend on `threads`.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be at least 1")
    if point_estimate is None:
        point_estimate, _ = reconstruct_process(probes, config)

    def run(index: int) -> ProcessTensor:
        if probes.analytic:
            return point_estimate
        tensor, _ = reconstruct_process(_resample(probes, seed, index), config)
        return tensor

    tensors: list[ProcessTensor | None] = [None] * n_resamples
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = {executor.submit(run, i): i for i in range(n_resamples)}
        for future in tqdm(as_completed(futures), total=n_resamples, desc="Bootstrap"):
            tensors[futures[future]] = future.result()

    fidelities = [process_fidelity(t, point_estimate) for t in tensors]
    slices = np.stack([phase_slice(t, k, l).values for t in tensors])
    finite = np.isfinite(slices)
    defined_count = finite.sum(axis=0)
    filled = np.where(finite, slices, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        slice_mean = np.where(defined_count > 0, filled.sum(axis=0) / defined_count, np.nan)
        deviations = np.where(finite, slices - slice_mean, 0.0)
        slice_std = np.where(defined_count > 0, np.sqrt((deviations**2).sum(axis=0) / defined_count), np.nan)
    reference = phase_slice(point_estimate, k, l)
    relative = np.abs(slice_std[reference.defined]) / np.maximum(np.abs(reference.values[reference.defined]), 1e-12)
    relative = relative[np.isfinite(relative)]
    summary = BootstrapSummary(
        fidelities=fidelities,
        slice_mean=slice_mean,
        slice_std=slice_std,
        max_relative_spread=float(relative.max()) if relative.size else 0.0,
        tensors=list(tensors),
    )
    logging.info(
        f"Bootstrap over {n_resamples} resamples: min fidelity {min(fidelities):.6f}, "
        f"max relative slice spread {summary.max_relative_spread:.4%}"
    )
    return summary


# --- Predictions ---


@dataclass(frozen=True)
class SqueezedPrediction:
    input_min_db: float
    input_max_db: float
    output_min_db: float
    output_max_db: float
    phase_shift: float
    transmission: float
    theta: np.ndarray = field(repr=False, default=None)
    input_curve_db: np.ndarray = field(repr=False, default=None)
    output_curve_db: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "input_min_db": self.input_min_db,
            "input_max_db": self.input_max_db,
            "output_min_db": self.output_min_db,
            "output_max_db": self.output_max_db,
            "phase_shift": self.phase_shift,
            "transmission": self.transmission,
        }


def predict_squeezed(
    tensor: ProcessTensor, spec: SqueezingSpec, curve_points: int = VARIANCE_CURVE_POINTS
) -> SqueezedPrediction:
    """
    Send a squeezed vacuum through the process and report the output variance
    extrema in dB, the rotation of the squeezed axis (in [0, pi)) and the
    variance-vs-LO-phase curves of input and output.
    """
    rho_in = squeezed_vacuum(spec, tensor.dim)
    if rho_in.tail_weight > SQUEEZED_TAIL_WARNING:
        logging.warning(
            f"Squeezed input loses {rho_in.tail_weight:.2e} of its weight at n_max={tensor.dim.n_max}; "
            "predictions are biased"
        )
    trace = process_trace(tensor, rho_in)
    rho_out = apply_process(tensor, rho_in)
    in_min, in_max, in_angle = variance_extrema(rho_in)
    out_min, out_max, out_angle = variance_extrema(rho_out)
    theta = np.linspace(0.0, math.pi, curve_points)
    return SqueezedPrediction(
        input_min_db=float(variance_db(in_min)),
        input_max_db=float(variance_db(in_max)),
        output_min_db=float(variance_db(out_min)),
        output_max_db=float(variance_db(out_max)),
        phase_shift=float((out_angle - in_angle) % math.pi),
        transmission=trace,
        theta=theta,
        input_curve_db=variance_db(quadrature_variance(rho_in, theta)),
        output_curve_db=variance_db(quadrature_variance(rho_out, theta)),
    )


@dataclass(frozen=True)
class QubitPrediction:
    phase: float
    retention: float
    transmission: float

    def to_dict(self) -> dict:
        return {"phase": self.phase, "retention": self.retention, "transmission": self.transmission}


def predict_qubit(tensor: ProcessTensor) -> QubitPrediction:
    """(|0> + |1>)/sqrt(2) through the process: phase of rho_01 and |rho_01| retained after renormalization."""
    rho_in = fock_qubit(1.0, 1.0, tensor.dim)
    rho_out = apply_process(tensor, rho_in)
    retention = abs(rho_out.elements[0, 1]) / abs(rho_in.elements[0, 1])
    return QubitPrediction(
        phase=output_phase(tensor, rho_in, 0, 1),
        retention=float(retention),
        transmission=process_trace(tensor, rho_in),
    )
