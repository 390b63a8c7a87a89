# experiments.py
# The five runnable experiments. Each takes a validated RunConfig and an open
# ArtifactStore, writes its artifacts through the store and returns the
# summary metrics that go into the manifest.

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np
from tqdm import tqdm

from src.core.channel import ChannelParams, ProcessTensor, oracle_tensor, simulate_channel
from src.core.fock import (
    FockDim,
    WignerGridSpec,
    coherent_state,
    mean_photon_number,
    mean_variance,
    required_n_max,
    state_fidelity,
    wigner,
)
from src.core.homodyne import bin_records, fit_phase, relative_phase, sample_quadratures
from src.core.process_mle import (
    bootstrap,
    phase_slice,
    predict_qubit,
    predict_squeezed,
    probe_phases,
    process_fidelity,
    reconstruct_process,
)
from src.core.state_mle import reconstruct_state
from src.data.dataset import REFERENCE_VALUES
from src.data.generate_data import generate_probe_set, probe_amplitudes
from src.errors import ConfigError
from src.services.run_config import RunConfig
from src.visualization.visualization import (
    write_attenuation,
    write_phase_slice,
    write_phase_vs_power,
    write_quadrature_scatter,
    write_variance_curve,
    write_wigner,
)

# Total counts per probe when expected (noise-free) histograms stand in for data.
ANALYTIC_TOTAL_COUNTS = 10**9


def _slug(text: str) -> str:
    cleaned = "".join(c.lower() if c.isalnum() else "_" for c in text)
    return "_".join(part for part in cleaned.split("_") if part) or "channel"


def _power_prefix(index: int) -> str:
    return f"power_{index:02d}"


def _channel_rows(config: RunConfig) -> list[tuple[float | None, ChannelParams]]:
    """(signal power, channel) pairs: the single configured channel, or every entry of the power map."""
    if config.channel is not None:
        return [(None, config.channel)]
    return list(config.signal_power_map.entries)


def _probe_data(config: RunConfig, channel: ChannelParams, stream):
    det = config.detection.params()
    analytic = config.probes.analytic_counts
    if analytic:
        det = replace(det, samples=ANALYTIC_TOTAL_COUNTS)
    return generate_probe_set(
        channel,
        det,
        seed=None if analytic else config.require_seed(),
        amplitudes=probe_amplitudes(config.probes.count, config.probes.max_amplitude),
        stream=stream,
        analytic=analytic,
        phase_bins=config.probes.phase_bins,
        quad_bins=config.probes.quad_bins,
        threads=config.threads,
    )


def _probe_set_dict(probe_set) -> dict:
    return {
        "efficiency": probe_set.efficiency,
        "analytic": probe_set.analytic,
        "probes": [
            {
                "alpha": [p.alpha.real, p.alpha.imag],
                "output": p.output.to_dict(),
                "input": p.input.to_dict() if p.input is not None else None,
            }
            for p in probe_set.probes
        ],
    }


def off_band_magnitude(tensor: ProcessTensor) -> float:
    """Largest |E_kl^mn| with k - l != m - n; exactly zero for a phase-covariant tensor."""
    size = tensor.dim.size
    k, l, m, n = np.indices((size,) * 4)
    off_band = (k - l) != (m - n)
    return float(np.abs(tensor.elements[off_band]).max()) if off_band.any() else 0.0


# --- state-demo ---


def _demo_state(index, label, rho, det, mle_config, config: RunConfig, store):
    prefix = f"state_{index}_{_slug(label)}"
    records = sample_quadratures(rho, det, config.require_seed(), ("state-demo", index))
    records.to_csv(store.path(f"{prefix}_records.csv"))
    store.adopt(f"{prefix}_records.csv", "quadrature-records")
    fit = fit_phase(records)
    write_quadrature_scatter(store, prefix, records, fit)

    hist = bin_records(records, config.probes.phase_bins, config.probes.quad_bins)
    store.write_json(f"{prefix}_histogram.json", hist.to_dict(), "histogram")
    reconstructed, diagnostics = reconstruct_state(hist, mle_config)
    store.write_json(f"{prefix}_state.json", reconstructed.to_dict(), "density-matrix")
    store.write_json(f"{prefix}_diagnostics.json", diagnostics.to_dict(), "diagnostics")
    grid = wigner(reconstructed, WignerGridSpec.covering(reconstructed.dim, config.state_demo.wigner_points))
    write_wigner(store, prefix, grid)
    row = {
        "label": label,
        "fit": fit.to_dict(),
        "mean_photon_number": mean_photon_number(rho),
        "mean_variance_true": mean_variance(rho),
        "mean_variance_reconstructed": mean_variance(reconstructed),
        "fidelity_to_truth": state_fidelity(reconstructed, rho.resized(reconstructed.dim)),
        "mle_converged": diagnostics.converged,
    }
    return row, fit


def run_state_demo(config: RunConfig, store) -> dict:
    """
    Coherent pulse through each demo channel: sample, fit the quadrature
    sinusoid, reconstruct the state and tabulate its Wigner function. The
    summary carries each channel's phase shift relative to the input pulse.
    """
    demo = config.state_demo
    det = config.detection.params()
    alpha = math.sqrt(demo.mean_photon_number)
    channels = [config.channel] if config.channel is not None else list(demo.channels)
    mle_config = config.state_mle.mle_config(det)
    guard = min(required_n_max(alpha), demo.n_max)
    if guard > mle_config.dim.n_max:
        logging.info(
            f"Raising state reconstruction n_max from {mle_config.dim.n_max} to {guard} "
            f"for <n>={demo.mean_photon_number}"
        )
        mle_config = replace(mle_config, dim=FockDim(guard))

    with store.timed("state simulation"):
        rho_in = coherent_state(alpha, FockDim(demo.n_max))
        states = [("input", rho_in, None)]
        states += [(c.label or f"channel {i}", simulate_channel(rho_in, c), c) for i, c in enumerate(channels)]

    results: dict[int, tuple[dict, object]] = {}
    with store.timed("sampling, fits and reconstruction"):
        with ThreadPoolExecutor(max_workers=max(1, config.threads)) as executor:
            future_to_index = {
                executor.submit(_demo_state, i, label, rho, det, mle_config, config, store): i
                for i, (label, rho, _) in enumerate(states)
            }
            for future in tqdm(as_completed(future_to_index), total=len(states), desc="States"):
                results[future_to_index[future]] = future.result()

    input_row, input_fit = results[0]
    rows = [input_row]
    for i, (label, _, channel) in enumerate(states[1:], start=1):
        row, fit = results[i]
        shift, stderr = relative_phase(fit, input_fit)
        row.update(
            {
                "relative_phase_rad": shift,
                "relative_phase_stderr_rad": stderr,
                "configured_phase_rad": channel.phase_shift,
                "fitted_transmission": (fit.amplitude / input_fit.amplitude) ** 2,
                "photon_transmission": row["mean_photon_number"] / input_row["mean_photon_number"],
            }
        )
        logging.info(
            f"{label}: phase shift {shift:.4f} +- {stderr:.4f} rad (configured {channel.phase_shift:.4f}), "
            f"mean variance {row['mean_variance_true']:.4f}"
        )
        rows.append(row)

    summary = {"states": rows, "reference_values": REFERENCE_VALUES}
    if len(rows) >= 3:
        first, second = rows[1], rows[2]
        summary["phase_difference_rad"] = first["relative_phase_rad"] - second["relative_phase_rad"]
        summary["phase_difference_stderr_rad"] = math.hypot(
            first["relative_phase_stderr_rad"], second["relative_phase_stderr_rad"]
        )
        logging.info(
            f"Phase difference {first['label']} - {second['label']}: "
            f"{summary['phase_difference_rad']:.4f} +- {summary['phase_difference_stderr_rad']:.4f} rad"
        )
    store.write_json("state_demo_summary.json", summary, "summary")
    return summary


# --- csqpt ---


def _characterize(index: int, power, channel: ChannelParams, config: RunConfig, store) -> dict:
    prefix = _power_prefix(index)
    data = _probe_data(config, channel, ("csqpt", index))
    store.write_json(f"{prefix}_probes.json", _probe_set_dict(data.probe_set), "probe-set")
    tensor, diagnostics = reconstruct_process(data.probe_set, config.process_mle.mle_config(), progress=True)
    store.write_json(f"{prefix}_tensor.json", tensor.to_dict(), "process-tensor")
    store.write_json(f"{prefix}_diagnostics.json", diagnostics.to_dict(), "diagnostics")
    write_phase_slice(store, prefix, phase_slice(tensor))
    write_attenuation(store, prefix, tensor)

    oracle = oracle_tensor(channel, tensor.dim)
    phases = probe_phases(tensor, data.probe_set.amplitudes)
    qubit = predict_qubit(tensor)
    row = {
        "signal_power_mw": power,
        "channel": channel.to_dict(),
        "fidelity_to_oracle": process_fidelity(tensor, oracle),
        "phi01_mean_rad": float(np.mean(phases)) if phases.size else None,
        "phi01_spread_rad": float(np.ptp(phases)) if phases.size else None,
        "qubit": qubit.to_dict(),
        "off_band_max": off_band_magnitude(tensor),
        "mle": {
            "iterations_run": diagnostics.iterations_run,
            "final_log_likelihood": diagnostics.final_log_likelihood,
            "converged": diagnostics.converged,
            "extrapolated_steps": diagnostics.extrapolated_steps,
        },
    }
    logging.info(
        f"{channel.label or prefix}: fidelity to oracle {row['fidelity_to_oracle']:.6f}, "
        f"phi01 {row['phi01_mean_rad']} rad (spread {row['phi01_spread_rad']})"
    )
    return row


def run_csqpt(config: RunConfig, store) -> dict:
    """Characterize every signal power (or the single configured channel) with its own probe ensemble."""
    rows = []
    entries = _channel_rows(config)
    for index, (power, channel) in enumerate(entries):
        with store.timed(f"csQPT {index + 1}/{len(entries)} ({channel.label or 'channel'})"):
            rows.append(_characterize(index, power, channel, config, store))
    summary = {
        "powers": rows,
        "min_fidelity_to_oracle": min(r["fidelity_to_oracle"] for r in rows),
    }
    store.write_json("csqpt_summary.json", summary, "summary")
    return summary


# --- squeezed-predict ---


def _load_tensor(path) -> ProcessTensor:
    path = Path(path)
    if not path.exists():
        raise ConfigError("squeezed.tensor_paths", f"tensor artifact not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        return ProcessTensor.from_dict(json.load(f))


def _squeezed_error_bars(config: RunConfig, probe_set, point_estimate, process_config, spec) -> dict:
    summary = bootstrap(
        probe_set,
        process_config,
        n_resamples=config.bootstrap.resamples,
        seed=None if probe_set.analytic else config.require_seed(),
        point_estimate=point_estimate,
        threads=config.threads,
    )
    predictions = [predict_squeezed(t, spec) for t in summary.tensors]
    return {
        "output_min_db_std": float(np.std([p.output_min_db for p in predictions])),
        "output_max_db_std": float(np.std([p.output_max_db for p in predictions])),
        "phase_shift_std": float(np.std([p.phase_shift for p in predictions])),
    }


def run_squeezed_predict(config: RunConfig, store) -> dict:
    """
    Predict what a squeezed vacuum looks like after each channel: from the
    oracle tensor, from stored tensor artifacts, or from a fresh csQPT run with
    bootstrap error bars. Oracle predictions are always reported alongside.
    """
    section = config.squeezed
    spec = section.spec()
    targets: list[tuple[str, ProcessTensor, ChannelParams | None, dict | None]] = []
    channels = [config.channel] if config.channel is not None else list(section.channels)

    if section.source == "file":
        with store.timed("loading tensors"):
            for path in section.tensor_paths:
                targets.append((Path(path).stem, _load_tensor(path), None, None))
    elif section.source == "oracle":
        dim = FockDim(section.n_max)
        targets = [
            (c.label or f"channel {i}", oracle_tensor(c, dim), c, None) for i, c in enumerate(channels)
        ]
    else:
        process_config = config.process_mle.mle_config(keep_working_dim=True)
        for index, channel in enumerate(channels):
            label = channel.label or f"channel {index}"
            with store.timed(f"csQPT for {label}"):
                data = _probe_data(config, channel, ("squeezed", index))
                tensor, _ = reconstruct_process(data.probe_set, process_config, progress=True)
            errors = None
            if section.bootstrap:
                with store.timed(f"bootstrap for {label}"):
                    errors = _squeezed_error_bars(config, data.probe_set, tensor, process_config, spec)
            targets.append((label, tensor, channel, errors))

    rows = []
    for label, tensor, channel, errors in targets:
        prefix = f"squeezed_{_slug(label)}"
        prediction = predict_squeezed(tensor, spec)
        row = {"label": label, "n_max": tensor.dim.n_max, **prediction.to_dict()}
        if errors is not None:
            row["bootstrap"] = errors
        if channel is not None and section.source != "oracle":
            row["oracle"] = predict_squeezed(oracle_tensor(channel, tensor.dim), spec).to_dict()
        write_variance_curve(store, prefix, prediction.theta, prediction.input_curve_db, prediction.output_curve_db)
        logging.info(
            f"{label}: {prediction.input_min_db:+.3f}/{prediction.input_max_db:+.3f} dB in -> "
            f"{prediction.output_min_db:+.3f}/{prediction.output_max_db:+.3f} dB out, "
            f"axis rotated by {prediction.phase_shift:.4f} rad"
        )
        rows.append(row)

    summary = {
        "source": section.source,
        "input": {"squeezing_db": section.squeezing_db, "antisqueezing_db": section.antisqueezing_db},
        "predictions": rows,
        "reference_values": {k: v for k, v in REFERENCE_VALUES.items() if k.startswith("squeezed_")},
    }
    store.write_json("squeezed_prediction.json", summary, "summary")
    return summary


# --- bootstrap ---


def run_bootstrap(config: RunConfig, store) -> dict:
    """
    Poisson-resample each power's probe histograms and report how far the
    rebuilt tensors stray from the point estimate. Probe data come from the
    same named streams as csqpt, so a bootstrap run matches a csqpt run with
    the same seed.
    """
    process_config = config.process_mle.mle_config()
    rows = []
    entries = _channel_rows(config)
    for index, (power, channel) in enumerate(entries):
        prefix = _power_prefix(index)
        with store.timed(f"bootstrap {index + 1}/{len(entries)} ({channel.label or 'channel'})"):
            data = _probe_data(config, channel, ("csqpt", index))
            point_estimate, _ = reconstruct_process(data.probe_set, process_config)
            summary = bootstrap(
                data.probe_set,
                process_config,
                n_resamples=config.bootstrap.resamples,
                seed=None if data.probe_set.analytic else config.require_seed(),
                point_estimate=point_estimate,
                threads=config.threads,
            )
        store.write_json(f"{prefix}_bootstrap.json", summary.to_dict(), "bootstrap")
        size = point_estimate.dim.size
        store.write_csv(
            f"{prefix}_bootstrap_slice.csv",
            ["m", "n", "mean", "std"],
            (
                (m, n, summary.slice_mean[m, n], summary.slice_std[m, n])
                for m in range(size)
                for n in range(size)
                if np.isfinite(summary.slice_mean[m, n])
            ),
        )
        rows.append(
            {
                "signal_power_mw": power,
                "label": channel.label,
                "min_fidelity": min(summary.fidelities),
                "max_relative_spread": summary.max_relative_spread,
            }
        )
    result = {"resamples": config.bootstrap.resamples, "powers": rows}
    store.write_json("bootstrap_summary.json", result, "summary")
    return result


# --- sweep-signal-power ---


def _sweep_point(index: int, channel: ChannelParams, rho_in, det, seed: int):
    output = simulate_channel(rho_in, channel)
    return fit_phase(sample_quadratures(output, det, seed, ("sweep", index, "output")))


def run_signal_power_sweep(config: RunConfig, store) -> dict:
    """
    Relative phase shift and transmission vs signal power. One reference
    pulse is measured without the channel; each power's output pulse is
    fitted against it.
    """
    seed = config.require_seed()
    det = config.detection.params()
    alpha = math.sqrt(config.state_demo.mean_photon_number)
    rho_in = coherent_state(alpha, FockDim(config.state_demo.n_max))
    entries = config.signal_power_map.entries

    with store.timed("reference pulse"):
        reference = fit_phase(sample_quadratures(rho_in, det, seed, ("sweep", "input")))

    fits = {}
    with store.timed("signal power sweep"):
        with ThreadPoolExecutor(max_workers=max(1, config.threads)) as executor:
            future_to_index = {
                executor.submit(_sweep_point, i, channel, rho_in, det, seed): i
                for i, (_, channel) in enumerate(entries)
            }
            for future in tqdm(as_completed(future_to_index), total=len(entries), desc="Signal powers"):
                fits[future_to_index[future]] = future.result()

    rows = []
    for i, (power, channel) in enumerate(entries):
        shift, stderr = relative_phase(fits[i], reference)
        rows.append(
            {
                "signal_power_mw": power,
                "relative_phase_rad": shift,
                "relative_phase_stderr_rad": stderr,
                "transmission": (fits[i].amplitude / reference.amplitude) ** 2,
                "configured_phase_rad": channel.phase_shift,
            }
        )
        logging.info(f"{power:.3f} mW: phase shift {shift:.4f} +- {stderr:.4f} rad")
    summary = {"rows": rows}
    store.write_json("signal_power_sweep.json", summary, "summary")
    write_phase_vs_power(store, "signal_power_sweep", rows)
    return summary


EXPERIMENT_RUNNERS = {
    "state-demo": run_state_demo,
    "csqpt": run_csqpt,
    "squeezed-predict": run_squeezed_predict,
    "bootstrap": run_bootstrap,
    "sweep-signal-power": run_signal_power_sweep,
}


def run_experiment(config: RunConfig, store) -> dict:
    logging.info(f"Experiment '{config.experiment}' with seed {config.seed}")
    return EXPERIMENT_RUNNERS[config.experiment](config, store)
