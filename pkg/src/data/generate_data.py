# generate_data.py
# Synthesizes csQPT probe data: coherent probes of increasing amplitude are
# sent through a channel, measured by homodyne detection on both sides and
# binned on one shared grid.

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from src.config import PHASE_BINS, PROBE_COUNT, PROBE_MAX_AMPLITUDE, QUADRATURE_BINS
from src.core.channel import ChannelParams, simulate_channel
from src.core.fock import DensityMatrix, FockDim, coherent_state, required_n_max
from src.core.homodyne import (
    BinnedHistogram,
    DetectionParams,
    QuadratureRecords,
    bin_records,
    expected_histogram,
    sample_quadratures,
    shared_quadrature_range,
)
from src.core.process_mle import Probe, ProbeSet

ANALYTIC_RANGE_PADDING = 5.0


def probe_amplitudes(count: int = PROBE_COUNT, max_amplitude: float = PROBE_MAX_AMPLITUDE) -> list[float]:
    """Real probe amplitudes evenly spaced from 0 to max_amplitude."""
    if count < 1:
        raise ValueError("at least one probe is needed")
    return [float(a) for a in np.linspace(0.0, max_amplitude, count)]


def probe_states(alpha: complex, channel: ChannelParams) -> tuple[DensityMatrix, DensityMatrix]:
    """Input coherent state and its channel output, both in the probe's guard dimension."""
    dim = FockDim(required_n_max(alpha))
    rho_in = coherent_state(alpha, dim)
    return rho_in, simulate_channel(rho_in, channel)


@dataclass
class ProbeData:
    probe_set: ProbeSet
    input_records: list[QuadratureRecords | None]
    output_records: list[QuadratureRecords | None]


def analytic_quadrature_range(amplitudes, efficiency: float) -> float:
    """Bins for expected counts: the strongest probe's mean quadrature plus padding."""
    return math.sqrt(2.0 * efficiency) * max(abs(a) for a in amplitudes) + ANALYTIC_RANGE_PADDING


def _template(quad_range: float, phase_bins: int, quad_bins: int) -> BinnedHistogram:
    return BinnedHistogram(
        np.linspace(0.0, 2.0 * math.pi, phase_bins + 1),
        np.linspace(-quad_range, quad_range, quad_bins + 1),
        np.zeros((phase_bins, quad_bins)),
    )


def _sample_probe(index: int, alpha: complex, channel: ChannelParams, det: DetectionParams, seed: int, stream):
    rho_in, rho_out = probe_states(alpha, channel)
    inputs = sample_quadratures(rho_in, det, seed, (*stream, "probe", index, "input"))
    outputs = sample_quadratures(rho_out, det, seed, (*stream, "probe", index, "output"))
    return inputs, outputs


def generate_probe_set(
    channel: ChannelParams,
    det: DetectionParams,
    seed: int | None = None,
    amplitudes=None,
    stream=(),
    analytic: bool = False,
    phase_bins: int = PHASE_BINS,
    quad_bins: int = QUADRATURE_BINS,
    threads: int = 1,
) -> ProbeData:
    """
    Build a ProbeSet for `channel`. Sampled mode draws det.samples records per
    probe on each side from the named streams (stream, "probe", i, side) and
    bins them on the ensemble-wide quadrature range; analytic mode writes the
    expected counts instead and needs no seed.
    """
    amplitudes = probe_amplitudes() if amplitudes is None else list(amplitudes)
    logging.info(
        f"Generating {len(amplitudes)} probes through '{channel.label or 'channel'}' "
        f"(theta={channel.phase_shift:.4f}, T={channel.transmission:.4f}, n_th={channel.excess_noise:.4f}), "
        f"{'analytic counts' if analytic else f'{det.samples} samples per state'}"
    )

    if analytic:
        template = _template(analytic_quadrature_range(amplitudes, det.efficiency), phase_bins, quad_bins)
        probes = []
        for alpha in tqdm(amplitudes, desc="Expected counts"):
            rho_in, rho_out = probe_states(alpha, channel)
            probes.append(
                Probe(
                    alpha=complex(alpha),
                    output=expected_histogram(rho_out, template, det.efficiency, det.samples, det.phase_sweep),
                    input=expected_histogram(rho_in, template, det.efficiency, det.samples, det.phase_sweep),
                )
            )
        probe_set = ProbeSet(tuple(probes), det.efficiency, det.phase_sweep, analytic=True)
        return ProbeData(probe_set, [None] * len(probes), [None] * len(probes))

    if seed is None:
        raise ValueError("sampled probe data needs a seed")
    records: dict[int, tuple[QuadratureRecords, QuadratureRecords]] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_index = {
            executor.submit(_sample_probe, i, alpha, channel, det, seed, stream): i
            for i, alpha in enumerate(amplitudes)
        }
        for future in tqdm(as_completed(future_to_index), total=len(amplitudes), desc="Sampling probes"):
            records[future_to_index[future]] = future.result()

    inputs = [records[i][0] for i in range(len(amplitudes))]
    outputs = [records[i][1] for i in range(len(amplitudes))]
    quad_range = shared_quadrature_range(inputs + outputs)
    logging.info(f"Shared quadrature range +-{quad_range:.4f} over {2 * len(amplitudes)} record sets")
    probes = tuple(
        Probe(
            alpha=complex(alpha),
            output=bin_records(out, phase_bins, quad_bins, quad_range),
            input=bin_records(inp, phase_bins, quad_bins, quad_range),
        )
        for alpha, inp, out in zip(amplitudes, inputs, outputs)
    )
    return ProbeData(ProbeSet(probes, det.efficiency, det.phase_sweep), inputs, outputs)
