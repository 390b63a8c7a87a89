# homodyne.py
# Balanced homodyne detection: quadrature distributions, bin POVMs,
# Monte-Carlo sampling over an LO phase ramp, pulse integration, binning
# and sinusoidal phase fits.

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import curve_fit

from src.config import (
    CDF_SUPPORT_PADDING,
    CDF_TABULATION_POINTS,
    DETECTION_EFFICIENCY,
    PHASE_BINS,
    PHASE_RAMP_POINTS,
    QUADRATURE_BINS,
    QUADRATURE_NODES,
    QUADRATURE_PANEL_WIDTH,
    SAMPLES_PER_STATE,
    TWO_PI,
)
from src.core.channel import apply_loss_adjoint, loss_map
from src.core.fock import DensityMatrix, FockDim
from src.errors import DimensionMismatchError, NumericError
from src.utils import substream, wrap_phase

NEGATIVE_MASS_TOL = 1e-9
SAMPLING_BLOCK = 8192
OUTER_BIN_MARGIN = 12.0
FIT_SIGNIFICANCE = 3.0
MAX_PHASE_GAP = math.pi / 6  # at least 12 evenly spread LO phases


def phase_ramp(points: int = PHASE_RAMP_POINTS) -> tuple[float, ...]:
    """Evenly spaced LO phases on [0, 2 pi), as visited by a linear piezo ramp."""
    if points < 1:
        raise ValueError("a phase ramp needs at least one point")
    return tuple(np.linspace(0.0, TWO_PI, points, endpoint=False).tolist())


@dataclass(frozen=True)
class DetectionParams:
    efficiency: float = DETECTION_EFFICIENCY
    samples: int = SAMPLES_PER_STATE
    phase_sweep: tuple[float, ...] = field(default_factory=phase_ramp)

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if isinstance(self.samples, bool) or int(self.samples) != self.samples or self.samples < 1:
            raise ValueError(f"samples must be a positive integer, got {self.samples!r}")
        sweep = np.asarray(self.phase_sweep, dtype=float)
        if sweep.ndim != 1 or sweep.size == 0 or not np.all(np.isfinite(sweep)):
            raise ValueError("phase_sweep must be a non-empty list of finite phases")
        sweep = np.mod(sweep, TWO_PI)
        ordered = np.sort(sweep)
        gaps = np.diff(np.concatenate([ordered, [ordered[0] + TWO_PI]]))
        if gaps.max() > MAX_PHASE_GAP + 1e-12:
            raise ValueError(
                f"phase_sweep leaves a gap of {gaps.max():.3f} rad; it must cover a full period"
            )
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "phase_sweep", tuple(sweep.tolist()))

    def to_dict(self) -> dict:
        return {"efficiency": self.efficiency, "samples": self.samples, "phase_sweep": list(self.phase_sweep)}


@dataclass(frozen=True)
class QuadratureRecord:
    phase: float
    value: float
    pulse_id: int


@dataclass(frozen=True, eq=False)
class QuadratureRecords:
    """Column store for many QuadratureRecord rows."""

    pulse_id: np.ndarray
    phase: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        pulse_id = np.asarray(self.pulse_id, dtype=np.int64)
        phase = np.asarray(self.phase, dtype=float)
        value = np.asarray(self.value, dtype=float)
        if not (pulse_id.shape == phase.shape == value.shape) or phase.ndim != 1:
            raise ValueError("record columns must be one-dimensional and of equal length")
        for column in (pulse_id, phase, value):
            column.setflags(write=False)
        object.__setattr__(self, "pulse_id", pulse_id)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "value", value)

    def __len__(self) -> int:
        return self.value.size

    def __iter__(self) -> Iterator[QuadratureRecord]:
        for i, p, v in zip(self.pulse_id, self.phase, self.value):
            yield QuadratureRecord(phase=float(p), value=float(v), pulse_id=int(i))

    @classmethod
    def from_records(cls, records) -> QuadratureRecords:
        records = list(records)
        return cls(
            [r.pulse_id for r in records],
            [r.phase for r in records],
            [r.value for r in records],
        )

    def permuted(self, order) -> QuadratureRecords:
        order = np.asarray(order)
        return QuadratureRecords(self.pulse_id[order], self.phase[order], self.value[order])

    def with_phase_offset(self, delta: float) -> QuadratureRecords:
        return QuadratureRecords(self.pulse_id, np.mod(self.phase + delta, TWO_PI), self.value)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["pulse_id", "phase_rad", "quadrature"])
            for i, p, v in zip(self.pulse_id, self.phase, self.value):
                writer.writerow([int(i), repr(float(p)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> QuadratureRecords:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != ["pulse_id", "phase_rad", "quadrature"]:
                raise ValueError(f"{path}: expected header pulse_id,phase_rad,quadrature")
            rows = list(reader)
        return cls(
            [int(r["pulse_id"]) for r in rows],
            [float(r["phase_rad"]) for r in rows],
            [float(r["quadrature"]) for r in rows],
        )


@dataclass(frozen=True, eq=False)
class BinnedHistogram:
    """counts[i, j] tallies records in phase bin i and quadrature bin j."""

    phase_edges: np.ndarray
    quad_edges: np.ndarray
    counts: np.ndarray
    rejected: int = 0

    def __post_init__(self):
        phase_edges = np.asarray(self.phase_edges, dtype=float)
        quad_edges = np.asarray(self.quad_edges, dtype=float)
        counts = np.asarray(self.counts)
        for name, edges in (("phase_edges", phase_edges), ("quad_edges", quad_edges)):
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise ValueError(f"{name} must be strictly increasing with at least two entries")
        if counts.shape != (phase_edges.size - 1, quad_edges.size - 1):
            raise DimensionMismatchError(
                f"counts {counts.shape} do not match edges ({phase_edges.size - 1}, {quad_edges.size - 1})"
            )
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ValueError("counts must be finite and non-negative")
        for array in (phase_edges, quad_edges, counts):
            array.setflags(write=False)
        object.__setattr__(self, "phase_edges", phase_edges)
        object.__setattr__(self, "quad_edges", quad_edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "rejected", int(self.rejected))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def same_edges(self, other: BinnedHistogram) -> bool:
        return np.array_equal(self.phase_edges, other.phase_edges) and np.array_equal(
            self.quad_edges, other.quad_edges
        )

    def with_counts(self, counts) -> BinnedHistogram:
        return BinnedHistogram(self.phase_edges, self.quad_edges, counts, self.rejected)

    def to_dict(self) -> dict:
        if np.issubdtype(self.counts.dtype, np.integer):
            counts = self.counts.astype(int).tolist()
        else:
            counts = self.counts.astype(float).tolist()
        return {
            "phase_edges": self.phase_edges.tolist(),
            "quad_edges": self.quad_edges.tolist(),
            "counts": counts,
            "rejected": self.rejected,
        }

    @classmethod
    def from_dict(cls, data: dict) -> BinnedHistogram:
        counts = np.asarray(data["counts"])
        return cls(data["phase_edges"], data["quad_edges"], counts, int(data.get("rejected", 0)))


@dataclass(frozen=True)
class PhaseFit:
    amplitude: float
    phase_offset: float
    dc_offset: float
    residual_rms: float
    phase_stderr: float
    amplitude_stderr: float = 0.0
    defined: bool = True

    def model(self, theta):
        return self.amplitude * np.cos(np.asarray(theta) - self.phase_offset) + self.dc_offset

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "phase_offset": self.phase_offset,
            "dc_offset": self.dc_offset,
            "residual_rms": self.residual_rms,
            "phase_stderr": self.phase_stderr,
            "amplitude_stderr": self.amplitude_stderr,
            "defined": self.defined,
        }


@dataclass(frozen=True, eq=False)
class TemporalMask:
    """Unit-norm temporal mode, sum w_i^2 dt = 1, on a uniform time axis (seconds)."""

    time_axis: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        time_axis = np.asarray(self.time_axis, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if time_axis.ndim != 1 or time_axis.shape != weights.shape or time_axis.size < 2:
            raise ValueError("mask weights must share a one-dimensional time axis")
        steps = np.diff(time_axis)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("time axis must be uniformly increasing")
        if np.any(weights < 0):
            raise ValueError("mask weights must be non-negative")
        norm = float(np.sum(weights**2) * steps[0])
        if not math.isclose(norm, 1.0, rel_tol=1e-9):
            raise ValueError(f"mask is not unit-norm (sum w^2 dt = {norm:.6g})")
        object.__setattr__(self, "time_axis", time_axis)
        object.__setattr__(self, "weights", weights)

    @property
    def dt(self) -> float:
        return float(self.time_axis[1] - self.time_axis[0])

    def overlap(self, other: TemporalMask) -> float:
        _check_time_axis(self.time_axis, other.time_axis)
        return float(np.sum(self.weights * other.weights) * self.dt)


@dataclass(frozen=True, eq=False)
class HomodyneTrace:
    """Photocurrent difference samples; rows of a 2-D array are separate pulses."""

    time_axis: np.ndarray
    samples: np.ndarray


def _check_time_axis(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.allclose(a, b, rtol=0.0, atol=1e-15 + 1e-12 * np.max(np.abs(a))):
        raise ValueError("trace and mask do not share a time axis")


# --- Quadrature wavefunctions and distributions ---


def wavefunctions(x, size: int) -> np.ndarray:
    """
    Hermite functions psi_n(x) = H_n(x) e^{-x^2/2} / (pi^{1/4} sqrt(2^n n!)), n < size.

    Evaluated by the three-term recurrence, which stays finite far past the
    range where H_n and n! overflow separately. Shape (size, len(x)).
    """
    x = np.asarray(x, dtype=float)
    psi = np.zeros((size,) + x.shape)
    psi[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if size > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, size - 1):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def _band_profiles(elements: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """g_D(x) = sum_n rho[n + D, n] psi_{n+D}(x) psi_n(x) for D = 0..size-1."""
    size = elements.shape[0]
    profiles = np.zeros((size, psi.shape[1]), dtype=np.complex128)
    for delta in range(size):
        band = np.diagonal(elements, offset=-delta)
        profiles[delta] = band @ (psi[delta:] * psi[: size - delta])
    return profiles


def _pdf_table(elements: np.ndarray, phases: np.ndarray, x_grid: np.ndarray) -> np.ndarray:
    """p(x | theta) for every phase (rows) on the grid (columns)."""
    size = elements.shape[0]
    profiles = _band_profiles(elements, wavefunctions(x_grid, size))
    deltas = np.arange(size)
    weights = np.where(deltas == 0, 1.0, 2.0)
    rotations = np.exp(-1j * np.outer(phases, deltas)) * weights
    return np.real(rotations @ profiles)


def quadrature_pdf(rho: DensityMatrix, theta: float, eta: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """p(x | theta) = sum_mn rho'_mn e^{i(n-m) theta} psi_m(x) psi_n(x) with rho' = loss_map(rho, eta)."""
    lossy = loss_map(rho, eta)
    elements = lossy.elements
    phases = np.asarray([theta], dtype=float)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return _pdf_table(elements, phases, np.atleast_1d(x).ravel())[0].reshape(x.shape)

    return pdf


# --- POVM ---


def _bin_nodes(lower: float, upper: float) -> tuple[np.ndarray, np.ndarray]:
    panels = max(1, math.ceil((upper - lower) / QUADRATURE_PANEL_WIDTH))
    base_nodes, base_weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * base_nodes[None, :]).ravel()
    weights = (half[:, None] * base_weights[None, :]).ravel()
    return nodes, weights


def quadrature_bin_overlaps(quad_edges: np.ndarray, size: int) -> np.ndarray:
    """int_bin psi_m psi_n dx for each quadrature bin; the outer bins run to +-infinity."""
    quad_edges = np.asarray(quad_edges, dtype=float)
    reach = max(math.sqrt(2.0 * size) + OUTER_BIN_MARGIN, float(np.max(np.abs(quad_edges))) + 1.0)
    limits = quad_edges.copy()
    limits[0], limits[-1] = -reach, reach
    overlaps = np.zeros((limits.size - 1, size, size))
    for j in range(limits.size - 1):
        nodes, weights = _bin_nodes(limits[j], limits[j + 1])
        psi = wavefunctions(nodes, size)
        overlaps[j] = (psi * weights) @ psi.T
    return overlaps


def _phase_bin_index(phases: np.ndarray, phase_edges: np.ndarray) -> np.ndarray:
    index = np.searchsorted(phase_edges, np.mod(phases, TWO_PI), side="right") - 1
    return np.clip(index, 0, phase_edges.size - 2)


def phase_bin_factors(phase_edges: np.ndarray, size: int, phase_sweep=None) -> np.ndarray:
    """
    Average of e^{i D theta} over the LO phases inside each phase bin, D = m - n.

    With a known sweep the average runs over the ramp phases that fall in the
    bin; otherwise phases are taken uniform in the bin (a sinc envelope).
    Shape (bins, size, size).
    """
    phase_edges = np.asarray(phase_edges, dtype=float)
    n = np.arange(size)
    delta = n[:, None] - n[None, :]
    bins = phase_edges.size - 1
    factors = np.zeros((bins, size, size), dtype=np.complex128)
    if phase_sweep is not None:
        sweep = np.mod(np.asarray(phase_sweep, dtype=float), TWO_PI)
        index = _phase_bin_index(sweep, phase_edges)
        for i in range(bins):
            visited = sweep[index == i]
            if visited.size == 0:
                centre = 0.5 * (phase_edges[i] + phase_edges[i + 1])
                factors[i] = np.exp(1j * delta * centre)
            else:
                factors[i] = np.mean(np.exp(1j * delta[None, :, :] * visited[:, None, None]), axis=0)
        return factors
    for i in range(bins):
        centre = 0.5 * (phase_edges[i] + phase_edges[i + 1])
        width = phase_edges[i + 1] - phase_edges[i]
        factors[i] = np.exp(1j * delta * centre) * np.sinc(delta * width / TWO_PI)
    return factors


def povm_elements(hist: BinnedHistogram, eta: float, dim: FockDim, phase_sweep=None) -> np.ndarray:
    """
    Bin POVM elements Pi[i, j] (phase bin i, quadrature bin j) as an array of
    shape (phase bins, quad bins, d, d). For every phase bin the quadrature
    elements sum to the identity; eta < 1 folds detection loss in through the
    adjoint of the loss map.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    overlaps = quadrature_bin_overlaps(hist.quad_edges, dim.size)
    factors = phase_bin_factors(hist.phase_edges, dim.size, phase_sweep)
    povm = factors[:, None, :, :] * overlaps[None, :, :, :]
    if eta < 1.0:
        povm = apply_loss_adjoint(povm, eta)
    return povm


def phase_bin_weights(phase_edges: np.ndarray, phase_sweep=None) -> np.ndarray:
    """Probability that a record lands in each phase bin."""
    phase_edges = np.asarray(phase_edges, dtype=float)
    if phase_sweep is None:
        return np.diff(phase_edges) / TWO_PI
    index = _phase_bin_index(np.asarray(phase_sweep, dtype=float), phase_edges)
    counts = np.bincount(index, minlength=phase_edges.size - 1).astype(float)
    return counts / counts.sum()


def cell_probabilities(rho_elements: np.ndarray, povm: np.ndarray) -> np.ndarray:
    """Tr(Pi_ij rho) for every cell."""
    return np.real(np.einsum("ijnm,mn->ij", povm, rho_elements))


def expected_histogram(
    rho: DensityMatrix, template: BinnedHistogram, eta: float, total: float, phase_sweep=None
) -> BinnedHistogram:
    """Noise-free expected counts (floats) on the edges of `template`."""
    povm = povm_elements(template, eta, rho.dim, phase_sweep)
    weights = phase_bin_weights(template.phase_edges, phase_sweep)
    probabilities = np.clip(cell_probabilities(rho.elements, povm), 0.0, None) * weights[:, None]
    return BinnedHistogram(template.phase_edges, template.quad_edges, total * probabilities, 0)


# --- Sampling ---


def sampling_grid(dim: FockDim) -> np.ndarray:
    half = math.sqrt(2.0 * dim.n_max) + CDF_SUPPORT_PADDING
    return np.linspace(-half, half, CDF_TABULATION_POINTS)


def _inverse_cdf_tables(elements: np.ndarray, phases: np.ndarray, grid: np.ndarray) -> np.ndarray:
    pdf = _pdf_table(elements, phases, grid)
    dx = grid[1] - grid[0]
    negative_mass = np.clip(-pdf, 0.0, None).sum(axis=1) * dx
    if negative_mass.max() > NEGATIVE_MASS_TOL:
        raise NumericError(
            f"tabulated quadrature pdf has negative mass {negative_mass.max():.2e}; "
            "the Fock truncation is too small for this state"
        )
    cdf = cumulative_trapezoid(np.clip(pdf, 0.0, None), grid, axis=1, initial=0.0)
    cdf = np.maximum.accumulate(cdf, axis=1)
    total = cdf[:, -1:]
    if np.any(total <= 0):
        raise NumericError("tabulated quadrature pdf has no mass")
    return cdf / total


def sample_quadratures(rho: DensityMatrix, det: DetectionParams, seed: int, stream=()) -> QuadratureRecords:
    """
    Draw det.samples records: each pulse picks a ramp phase uniformly and a
    quadrature from p(x | theta) by inverse CDF. Random numbers come in fixed
    blocks from named Philox substreams, so the output depends only on
    (seed, stream).
    """
    lossy = loss_map(rho, det.efficiency)
    sweep = np.asarray(det.phase_sweep, dtype=float)
    grid = sampling_grid(rho.dim)
    cdf = _inverse_cdf_tables(lossy.elements, sweep, grid)

    phase_index = np.empty(det.samples, dtype=np.int64)
    uniforms = np.empty(det.samples)
    for block, start in enumerate(range(0, det.samples, SAMPLING_BLOCK)):
        stop = min(start + SAMPLING_BLOCK, det.samples)
        rng = substream(seed, *stream, "records", block)
        phase_index[start:stop] = rng.integers(sweep.size, size=stop - start)
        uniforms[start:stop] = rng.random(stop - start)

    values = np.empty(det.samples)
    for i in np.unique(phase_index):
        selected = phase_index == i
        values[selected] = np.interp(uniforms[selected], cdf[i], grid)
    return QuadratureRecords(np.arange(det.samples), sweep[phase_index], values)


# --- Pulse integration ---


def make_mask(time_axis, envelope) -> TemporalMask:
    """Field mode from a recorded intensity envelope: sqrt(intensity), flat phase, unit norm."""
    time_axis = np.asarray(time_axis, dtype=float)
    envelope = np.asarray(envelope, dtype=float)
    if envelope.shape != time_axis.shape:
        raise ValueError("envelope and time axis differ in length")
    if np.any(envelope < 0):
        raise ValueError("intensity envelope must be non-negative")
    field_amplitude = np.sqrt(envelope)
    dt = float(time_axis[1] - time_axis[0])
    norm = float(np.sum(field_amplitude**2) * dt)
    if norm <= 0:
        raise ValueError("intensity envelope is zero everywhere")
    return TemporalMask(time_axis, field_amplitude / math.sqrt(norm))


def integrate_pulse(trace: HomodyneTrace, mask: TemporalMask):
    """Quadrature value(s) sum_i w_i s_i dt; one per row for an ensemble of traces."""
    time_axis = np.asarray(trace.time_axis, dtype=float)
    _check_time_axis(time_axis, mask.time_axis)
    samples = np.asarray(trace.samples, dtype=float)
    result = samples @ mask.weights * mask.dt
    return float(result) if np.ndim(result) == 0 else result


def vacuum_trace(time_axis, pulses: int, rng: np.random.Generator) -> HomodyneTrace:
    """White shot noise with per-sample variance 1/(2 dt): any unit-norm mask integrates to variance 1/2."""
    time_axis = np.asarray(time_axis, dtype=float)
    dt = float(time_axis[1] - time_axis[0])
    noise = rng.normal(0.0, math.sqrt(0.5 / dt), size=(pulses, time_axis.size))
    return HomodyneTrace(time_axis, noise)


def signal_trace(mode: TemporalMask, alpha: complex, theta, rng: np.random.Generator) -> HomodyneTrace:
    """Coherent pulse in `mode` on top of shot noise, one row per LO phase in `theta`."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    mean = math.sqrt(2.0) * np.real(complex(alpha) * np.exp(-1j * theta))
    noise = vacuum_trace(mode.time_axis, theta.size, rng).samples
    return HomodyneTrace(mode.time_axis, mean[:, None] * mode.weights[None, :] + noise)


# --- Binning ---


def shared_quadrature_range(record_sets) -> float:
    """max |x| over every finite record of every set; one range for a whole probe ensemble."""
    largest = 0.0
    for records in record_sets:
        finite = records.value[np.isfinite(records.value)]
        if finite.size:
            largest = max(largest, float(np.max(np.abs(finite))))
    return largest if largest > 0 else 1.0


def bin_records(
    records: QuadratureRecords,
    phase_bins: int = PHASE_BINS,
    quad_bins: int = QUADRATURE_BINS,
    quad_range: float | None = None,
) -> BinnedHistogram:
    """
    Tally records on equal-width edges. Phase edges span [0, 2 pi]; quadrature
    edges span +-quad_range (default: +-max |x| of these records). Values
    beyond the range fall into the outer bins; non-finite records are rejected.
    """
    if len(records) == 0:
        raise ValueError("cannot bin an empty record set")
    if phase_bins < 1 or quad_bins < 1:
        raise ValueError("bin counts must be positive")
    finite = np.isfinite(records.value) & np.isfinite(records.phase)
    rejected = int(np.count_nonzero(~finite))
    if quad_range is None:
        quad_range = shared_quadrature_range([records])
    if not quad_range > 0:
        raise ValueError(f"quadrature range must be positive, got {quad_range}")
    phase_edges = np.linspace(0.0, TWO_PI, phase_bins + 1)
    quad_edges = np.linspace(-quad_range, quad_range, quad_bins + 1)

    phase_index = _phase_bin_index(records.phase[finite], phase_edges)
    quad_index = np.clip(np.searchsorted(quad_edges, records.value[finite], side="right") - 1, 0, quad_bins - 1)
    flat = np.bincount(phase_index * quad_bins + quad_index, minlength=phase_bins * quad_bins)
    if rejected:
        logging.warning(f"Rejected {rejected} non-finite quadrature records while binning")
    return BinnedHistogram(phase_edges, quad_edges, flat.reshape(phase_bins, quad_bins).astype(np.int64), rejected)


# --- Phase fits ---


def _cosine(theta, amplitude, phase_offset, dc_offset):
    return amplitude * np.cos(theta - phase_offset) + dc_offset


def phase_means(records: QuadratureRecords) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean quadrature and record count per distinct LO phase."""
    phases, inverse, counts = np.unique(records.phase, return_inverse=True, return_counts=True)
    means = np.bincount(inverse, weights=records.value) / counts
    return phases, means, counts


def fit_phase(records: QuadratureRecords) -> PhaseFit:
    """
    Least-squares fit of the per-phase mean quadrature to A cos(theta - phi0) + c.

    The fit is seeded from the linear solution a cos + b sin + c. An amplitude
    within FIT_SIGNIFICANCE standard errors of zero leaves the phase undefined.
    """
    phases, means, counts = phase_means(records)
    if phases.size < 3:
        raise ValueError("a phase fit needs records at three or more LO phases")
    if np.ptp(phases) < math.pi:
        raise ValueError("records must span at least half a period of LO phase")
    # a ramp of spacing s covering the period spans 2 pi - s
    span = np.ptp(phases) + np.median(np.diff(phases))
    if span < TWO_PI * (1.0 - 1e-6):
        logging.warning(
            f"LO phases span {span:.3f} rad, less than a full period; the fitted offset and amplitude are correlated"
        )

    design = np.column_stack([np.cos(phases), np.sin(phases), np.ones_like(phases)])
    weights = np.sqrt(counts)
    (a, b, c), *_ = np.linalg.lstsq(design * weights[:, None], means * weights, rcond=None)
    p0 = [math.hypot(a, b), math.atan2(b, a), c]

    sigma = 1.0 / weights
    try:
        params, covariance = curve_fit(_cosine, phases, means, p0=p0, sigma=sigma, absolute_sigma=False)
    except RuntimeError as e:
        logging.warning(f"Phase fit did not converge ({e}); keeping the linear estimate")
        params, covariance = np.array(p0), np.full((3, 3), np.inf)
    amplitude, phase_offset, dc_offset = (float(v) for v in params)
    if amplitude < 0:
        amplitude, phase_offset = -amplitude, phase_offset + math.pi
    phase_offset = float(np.mod(phase_offset, TWO_PI))
    errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    residuals = means - _cosine(phases, amplitude, phase_offset, dc_offset)
    residual_rms = float(np.sqrt(np.average(residuals**2, weights=counts)))
    defined = bool(np.isfinite(errors[0]) and amplitude > FIT_SIGNIFICANCE * errors[0])
    if not defined:
        logging.warning(f"Quadrature amplitude {amplitude:.4f} is consistent with zero; phase undefined")
    return PhaseFit(
        amplitude=amplitude,
        phase_offset=phase_offset,
        dc_offset=dc_offset,
        residual_rms=residual_rms,
        phase_stderr=float(errors[1]),
        amplitude_stderr=float(errors[0]),
        defined=defined,
    )


def relative_phase(fit: PhaseFit, reference: PhaseFit) -> tuple[float, float]:
    """Phase shift of `fit` relative to `reference` in (-pi, pi], with combined standard error."""
    if not (fit.defined and reference.defined):
        raise NumericError("relative phase is undefined for a fit with zero amplitude")
    shift = wrap_phase(fit.phase_offset - reference.phase_offset)
    return shift, math.hypot(fit.phase_stderr, reference.phase_stderr)


def calibrate_probe(fit: PhaseFit, eta: float) -> complex:
    """Coherent amplitude implied by a fit: |alpha| = A / (sqrt(2) sqrt(eta)), arg alpha = phi0."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    magnitude = fit.amplitude / (math.sqrt(2.0) * math.sqrt(eta))
    return complex(magnitude * np.exp(1j * fit.phase_offset)) if fit.defined else 0j
