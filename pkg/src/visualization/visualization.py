# visualization.py
# Plot-ready data series (CSV) for every figure of a run. Nothing is rendered
# here; each export is a table that any plotting tool can read.

import json
import logging
from pathlib import Path

import numpy as np

from src.config import VARIANCE_CURVE_POINTS, WIGNER_POINTS
from src.core.channel import ProcessTensor, SignalPowerMap
from src.core.fock import DensityMatrix, WignerGrid, WignerGridSpec, quadrature_variance, variance_db, wigner
from src.core.homodyne import PhaseFit, QuadratureRecords, fit_phase
from src.core.process_mle import PhaseSlice, attenuation, phase_slice
from src.errors import ConfigError

EXPORT_KINDS = (
    "quadrature-scatter",
    "wigner",
    "phase-vs-power",
    "phase-slice",
    "variance-vs-phase",
    "attenuation",
)
SCATTER_MAX_POINTS = 5000
FIT_CURVE_POINTS = 361


def write_quadrature_scatter(store, prefix: str, records: QuadratureRecords, fit: PhaseFit) -> list[Path]:
    """Quadrature-vs-phase dots (at most SCATTER_MAX_POINTS, evenly strided) and the fitted sinusoid."""
    stride = max(1, len(records) // SCATTER_MAX_POINTS)
    rows = zip(records.pulse_id[::stride], records.phase[::stride], records.value[::stride])
    theta = np.linspace(0.0, 2.0 * np.pi, FIT_CURVE_POINTS)
    return [
        store.write_csv(f"{prefix}_scatter.csv", ["pulse_id", "phase_rad", "quadrature"], rows),
        store.write_csv(f"{prefix}_fit.csv", ["phase_rad", "quadrature"], zip(theta, fit.model(theta))),
    ]


def write_wigner(store, prefix: str, grid: WignerGrid) -> Path:
    rows = (
        (float(x), float(p), float(grid.values[i, j]))
        for i, x in enumerate(grid.x_axis)
        for j, p in enumerate(grid.p_axis)
    )
    return store.write_csv(f"{prefix}_wigner.csv", ["x", "p", "w"], rows)


def write_phase_vs_power(store, prefix: str, rows: list[dict]) -> Path:
    header = [
        "signal_power_mw",
        "relative_phase_rad",
        "relative_phase_stderr_rad",
        "transmission",
        "configured_phase_rad",
    ]
    return store.write_csv(f"{prefix}_phase_vs_power.csv", header, ([r.get(h) for h in header] for r in rows))


def unwrap_slice_bands(slice_: PhaseSlice) -> np.ndarray:
    """Unwrap each m - n diagonal of a phase slice along increasing m; plotting aid only."""
    values = slice_.values
    size = values.shape[0]
    unwrapped = np.full_like(values, np.nan)
    for offset in range(-(size - 1), size):
        m = np.arange(max(0, offset), min(size, size + offset))
        n = m - offset
        band = values[m, n]
        defined = np.isfinite(band)
        if defined.any():
            unwrapped[m[defined], n[defined]] = np.unwrap(band[defined])
    return unwrapped


def write_phase_slice(store, prefix: str, slice_: PhaseSlice) -> Path:
    unwrapped = unwrap_slice_bands(slice_)
    rows = (
        (m, n, value if defined else "", defined, unwrapped[m, n] if defined else "")
        for m, n, value, defined in slice_.rows()
    )
    return store.write_csv(
        f"{prefix}_phase_slice_{slice_.k}{slice_.l}.csv", ["m", "n", "value", "defined", "unwrapped"], rows
    )


def write_variance_curve(store, prefix: str, theta, input_db, output_db=None) -> Path:
    if output_db is None:
        return store.write_csv(f"{prefix}_variance_vs_phase.csv", ["theta_rad", "variance_db"], zip(theta, input_db))
    return store.write_csv(
        f"{prefix}_variance_vs_phase.csv",
        ["theta_rad", "input_variance_db", "output_variance_db"],
        zip(theta, input_db, output_db),
    )


def write_attenuation(store, prefix: str, tensor: ProcessTensor) -> Path:
    table = attenuation(tensor)
    size = table.shape[0]
    rows = ((k, m, float(table[k, m])) for m in range(size) for k in range(size))
    return store.write_csv(f"{prefix}_attenuation.csv", ["k", "m", "value"], rows)


def _load_json(path: Path):
    with path.open("r", encoding="utf-8") as f:
        return json.load(f)


def export_plotdata(artifact, kind: str, store) -> list[Path]:
    """Turn a stored artifact into the plot-data series for `kind`."""
    if kind not in EXPORT_KINDS:
        raise ConfigError("kind", f"unknown export kind {kind!r} (known: {', '.join(EXPORT_KINDS)})")
    path = Path(artifact)
    if not path.exists():
        raise ConfigError("artifact", f"file not found: {path}")
    prefix = path.stem
    logging.info(f"Exporting {kind} plot data from {path}")

    if kind == "quadrature-scatter":
        records = QuadratureRecords.from_csv(path)
        return write_quadrature_scatter(store, prefix, records, fit_phase(records))
    if kind == "wigner":
        rho = DensityMatrix.from_dict(_load_json(path))
        return [write_wigner(store, prefix, wigner(rho, WignerGridSpec.covering(rho.dim, WIGNER_POINTS)))]
    if kind == "phase-vs-power":
        data = _load_json(path)
        if isinstance(data, dict) and "rows" in data:
            rows = data["rows"]
        else:
            power_map = SignalPowerMap.from_list(data)
            rows = [
                {"signal_power_mw": p, "configured_phase_rad": c.phase_shift, "transmission": c.transmission}
                for p, c in power_map.entries
            ]
        return [write_phase_vs_power(store, prefix, rows)]
    if kind == "phase-slice":
        return [write_phase_slice(store, prefix, phase_slice(ProcessTensor.from_dict(_load_json(path))))]
    if kind == "variance-vs-phase":
        rho = DensityMatrix.from_dict(_load_json(path))
        theta = np.linspace(0.0, np.pi, VARIANCE_CURVE_POINTS)
        return [write_variance_curve(store, prefix, theta, variance_db(quadrature_variance(rho, theta)))]
    return [write_attenuation(store, prefix, ProcessTensor.from_dict(_load_json(path)))]
