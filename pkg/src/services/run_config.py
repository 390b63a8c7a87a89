# run_config.py
# Loads and validates the JSON run configuration. Every field defaults to the
# protocol constants in src/config.py; errors name the offending dotted path.

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from src import config
from src.core.channel import ChannelParams, SignalPowerMap
from src.core.fock import FockDim, SqueezingSpec
from src.core.homodyne import DetectionParams, phase_ramp
from src.core.process_mle import INPUT_MODES, START_MODES, TRACE_MODES, ProcessMleConfig
from src.core.state_mle import StateMleConfig
from src.data.dataset import DEFAULT_SIGNAL_POWER_MAP, NAMED_CHANNELS
from src.errors import ConfigError

EXPERIMENTS = ("state-demo", "csqpt", "squeezed-predict", "bootstrap", "sweep-signal-power")
SQUEEZED_SOURCES = ("oracle", "reconstructed", "file")
SEED_MAX = 2**64 - 1

_MISSING = object()


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require_mapping(data, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    return data


def _reject_unknown(data: dict, path: str, allowed) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(_join(path, key), f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _integer(value, path, minimum=None, maximum=None, nullable=False):
    if value is None and nullable:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(path, f"must be <= {maximum}, got {value}")
    return value


def _real(value, path, minimum=None, maximum=None, exclusive_minimum=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    value = float(value)
    if minimum is not None and (value <= minimum if exclusive_minimum else value < minimum):
        raise ConfigError(path, f"must be {'>' if exclusive_minimum else '>='} {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(path, f"must be <= {maximum}, got {value}")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _choice(value, path, choices):
    if value not in choices:
        raise ConfigError(path, f"must be one of {list(choices)}, got {value!r}")
    return value


def _channel(value, path) -> ChannelParams:
    if isinstance(value, str):
        if value not in NAMED_CHANNELS:
            raise ConfigError(path, f"unknown channel name {value!r} (known: {sorted(NAMED_CHANNELS)})")
        return NAMED_CHANNELS[value]
    data = _require_mapping(value, path)
    _reject_unknown(data, path, {"phase_shift", "transmission", "excess_noise", "label"})
    for key in ("phase_shift", "transmission"):
        if key not in data:
            raise ConfigError(_join(path, key), "required")
    return ChannelParams(
        phase_shift=_real(data["phase_shift"], _join(path, "phase_shift")),
        transmission=_real(data["transmission"], _join(path, "transmission"), 0.0, 1.0, exclusive_minimum=True),
        excess_noise=_real(data.get("excess_noise", 0.0), _join(path, "excess_noise"), 0.0),
        label=str(data.get("label", "")),
    )


def _power_map(value, path, base_dir: Path) -> SignalPowerMap:
    if isinstance(value, str):
        file_path = (base_dir / value) if not Path(value).is_absolute() else Path(value)
        if not file_path.exists():
            raise ConfigError(path, f"file not found: {file_path}")
        with file_path.open("r", encoding="utf-8") as f:
            value = json.load(f)
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of entries or a path to one")
    entries = []
    for i, entry in enumerate(value):
        entry_path = f"{path}[{i}]"
        entry = _require_mapping(entry, entry_path)
        if "signal_power_mw" not in entry:
            raise ConfigError(_join(entry_path, "signal_power_mw"), "required")
        power = _real(entry["signal_power_mw"], _join(entry_path, "signal_power_mw"), 0.0)
        channel = {k: v for k, v in entry.items() if k != "signal_power_mw"}
        entries.append((power, _channel(channel, entry_path)))
    try:
        return SignalPowerMap(tuple(entries))
    except ValueError as e:
        raise ConfigError(path, str(e)) from e


@dataclass(frozen=True)
class DetectionSection:
    efficiency: float = config.DETECTION_EFFICIENCY
    samples: int = config.SAMPLES_PER_STATE
    phase_ramp_points: int = config.PHASE_RAMP_POINTS

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        return cls(
            efficiency=_real(data.get("efficiency", d.efficiency), _join(path, "efficiency"), 0.0, 1.0, True),
            samples=_integer(data.get("samples", d.samples), _join(path, "samples"), 1),
            phase_ramp_points=_integer(
                data.get("phase_ramp_points", d.phase_ramp_points), _join(path, "phase_ramp_points"), 12
            ),
        )

    def params(self) -> DetectionParams:
        return DetectionParams(self.efficiency, self.samples, phase_ramp(self.phase_ramp_points))


@dataclass(frozen=True)
class StateMleSection:
    n_max: int = config.STATE_MLE_N_MAX
    max_iterations: int = config.STATE_MLE_MAX_ITERATIONS
    tolerance: float = config.STATE_MLE_TOLERANCE

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        return cls(
            n_max=_integer(data.get("n_max", d.n_max), _join(path, "n_max"), 1),
            max_iterations=_integer(data.get("max_iterations", d.max_iterations), _join(path, "max_iterations"), 1),
            tolerance=_real(data.get("tolerance", d.tolerance), _join(path, "tolerance"), 0.0, exclusive_minimum=True),
        )

    def mle_config(self, detection: DetectionParams) -> StateMleConfig:
        return StateMleConfig(
            dim=FockDim(self.n_max),
            max_iterations=self.max_iterations,
            log_likelihood_tol=self.tolerance,
            efficiency=detection.efficiency,
            phase_sweep=detection.phase_sweep,
        )


@dataclass(frozen=True)
class ProcessMleSection:
    n_max: int = config.PROCESS_N_MAX
    iterations: int = config.PROCESS_MLE_ITERATIONS
    phase_covariant: bool = True
    trace_mode: str = "non-increasing"
    working_n_max: int | None = None
    input_mode: str = "calibrated"
    start: str = "fitted-channel"

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        n_max = _integer(data.get("n_max", d.n_max), _join(path, "n_max"), 1)
        return cls(
            n_max=n_max,
            iterations=_integer(data.get("iterations", d.iterations), _join(path, "iterations"), 1),
            phase_covariant=_boolean(data.get("phase_covariant", d.phase_covariant), _join(path, "phase_covariant")),
            trace_mode=_choice(data.get("trace_mode", d.trace_mode), _join(path, "trace_mode"), TRACE_MODES),
            working_n_max=_integer(
                data.get("working_n_max", d.working_n_max), _join(path, "working_n_max"), n_max, nullable=True
            ),
            input_mode=_choice(data.get("input_mode", d.input_mode), _join(path, "input_mode"), INPUT_MODES),
            start=_choice(data.get("start", d.start), _join(path, "start"), START_MODES),
        )

    def mle_config(self, keep_working_dim: bool = False) -> ProcessMleConfig:
        return ProcessMleConfig(
            dim=FockDim(self.n_max),
            iterations=self.iterations,
            phase_covariant=self.phase_covariant,
            trace_mode=self.trace_mode,
            working_n_max=self.working_n_max,
            input_mode=self.input_mode,
            start=self.start,
            keep_working_dim=keep_working_dim,
        )


@dataclass(frozen=True)
class ProbeSection:
    count: int = config.PROBE_COUNT
    max_amplitude: float = config.PROBE_MAX_AMPLITUDE
    analytic_counts: bool = False
    phase_bins: int = config.PHASE_BINS
    quad_bins: int = config.QUADRATURE_BINS

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        return cls(
            count=_integer(data.get("count", d.count), _join(path, "count"), 1),
            max_amplitude=_real(data.get("max_amplitude", d.max_amplitude), _join(path, "max_amplitude"), 0.0),
            analytic_counts=_boolean(data.get("analytic_counts", d.analytic_counts), _join(path, "analytic_counts")),
            phase_bins=_integer(data.get("phase_bins", d.phase_bins), _join(path, "phase_bins"), 1),
            quad_bins=_integer(data.get("quad_bins", d.quad_bins), _join(path, "quad_bins"), 1),
        )


@dataclass(frozen=True)
class StateDemoSection:
    mean_photon_number: float = config.DEMO_MEAN_PHOTON_NUMBER
    n_max: int = config.STATE_DEMO_N_MAX
    channels: tuple[ChannelParams, ...] = field(
        default_factory=lambda: (NAMED_CHANNELS["eit"], NAMED_CHANNELS["n-type"])
    )
    wigner_points: int = config.WIGNER_POINTS

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        channels = d.channels
        if "channels" in data:
            if not isinstance(data["channels"], list) or not data["channels"]:
                raise ConfigError(_join(path, "channels"), "expected a non-empty list")
            channels = tuple(_channel(c, f"{_join(path, 'channels')}[{i}]") for i, c in enumerate(data["channels"]))
        return cls(
            mean_photon_number=_real(
                data.get("mean_photon_number", d.mean_photon_number), _join(path, "mean_photon_number"), 0.0
            ),
            n_max=_integer(data.get("n_max", d.n_max), _join(path, "n_max"), 1),
            channels=channels,
            wigner_points=_integer(data.get("wigner_points", d.wigner_points), _join(path, "wigner_points"), 2),
        )


@dataclass(frozen=True)
class SqueezedSection:
    squeezing_db: float = config.SQUEEZING_DB
    antisqueezing_db: float = config.ANTISQUEEZING_DB
    phase: float = 0.0
    thermal: bool = False
    source: str = "oracle"
    n_max: int = config.SQUEEZED_N_MAX
    channels: tuple[ChannelParams, ...] = field(
        default_factory=lambda: (NAMED_CHANNELS["eit"], NAMED_CHANNELS["n-type"])
    )
    tensor_paths: tuple[str, ...] = ()
    bootstrap: bool = True

    @classmethod
    def from_dict(cls, data, path, base_dir: Path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        d = cls()
        channels = d.channels
        if "channels" in data:
            if not isinstance(data["channels"], list) or not data["channels"]:
                raise ConfigError(_join(path, "channels"), "expected a non-empty list")
            channels = tuple(_channel(c, f"{_join(path, 'channels')}[{i}]") for i, c in enumerate(data["channels"]))
        source = _choice(data.get("source", d.source), _join(path, "source"), SQUEEZED_SOURCES)
        tensor_paths = data.get("tensor_paths", [])
        if not isinstance(tensor_paths, list) or not all(isinstance(p, str) for p in tensor_paths):
            raise ConfigError(_join(path, "tensor_paths"), "expected a list of file paths")
        resolved = []
        for i, p in enumerate(tensor_paths):
            file_path = Path(p) if Path(p).is_absolute() else base_dir / p
            if not file_path.exists():
                raise ConfigError(f"{_join(path, 'tensor_paths')}[{i}]", f"file not found: {file_path}")
            resolved.append(str(file_path))
        if source == "file" and not resolved:
            raise ConfigError(_join(path, "tensor_paths"), "source 'file' needs at least one tensor artifact")
        section = cls(
            squeezing_db=_real(data.get("squeezing_db", d.squeezing_db), _join(path, "squeezing_db"), maximum=0.0),
            antisqueezing_db=_real(
                data.get("antisqueezing_db", d.antisqueezing_db), _join(path, "antisqueezing_db"), 0.0
            ),
            phase=_real(data.get("phase", d.phase), _join(path, "phase")),
            thermal=_boolean(data.get("thermal", d.thermal), _join(path, "thermal")),
            source=source,
            n_max=_integer(data.get("n_max", d.n_max), _join(path, "n_max"), 1),
            channels=channels,
            tensor_paths=tuple(resolved),
            bootstrap=_boolean(data.get("bootstrap", d.bootstrap), _join(path, "bootstrap")),
        )
        try:
            section.spec()
        except ValueError as e:
            raise ConfigError(path, str(e)) from e
        return section

    def spec(self) -> SqueezingSpec:
        return SqueezingSpec(self.squeezing_db, self.antisqueezing_db, self.phase, self.thermal)


@dataclass(frozen=True)
class BootstrapSection:
    resamples: int = config.BOOTSTRAP_RESAMPLES

    @classmethod
    def from_dict(cls, data, path):
        data = _require_mapping(data, path)
        _reject_unknown(data, path, {f.name for f in fields(cls)})
        return cls(resamples=_integer(data.get("resamples", cls().resamples), _join(path, "resamples"), 1))


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int | None = None
    output_dir: str = config.DEFAULT_OUTPUT_DIR
    threads: int = config.DEFAULT_THREADS
    channel: ChannelParams | None = None
    signal_power_map: SignalPowerMap = DEFAULT_SIGNAL_POWER_MAP
    detection: DetectionSection = field(default_factory=DetectionSection)
    state_mle: StateMleSection = field(default_factory=StateMleSection)
    process_mle: ProcessMleSection = field(default_factory=ProcessMleSection)
    probes: ProbeSection = field(default_factory=ProbeSection)
    state_demo: StateDemoSection = field(default_factory=StateDemoSection)
    squeezed: SqueezedSection = field(default_factory=SqueezedSection)
    bootstrap: BootstrapSection = field(default_factory=BootstrapSection)

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("seed", "a seed is required (config file or --seed); there is no clock-based default")
        return self.seed

    def channels(self) -> list[ChannelParams]:
        """The single configured channel, or every channel of the signal power map."""
        return [self.channel] if self.channel is not None else self.signal_power_map.channels

    def to_dict(self) -> dict:
        def section(obj):
            data = asdict(obj)
            if "channels" in data:
                data["channels"] = [c.to_dict() for c in obj.channels]
            if "tensor_paths" in data:
                data["tensor_paths"] = list(obj.tensor_paths)
            return data

        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "channel": self.channel.to_dict() if self.channel is not None else None,
            "signal_power_map": self.signal_power_map.to_list(),
            "detection": section(self.detection),
            "state_mle": section(self.state_mle),
            "process_mle": section(self.process_mle),
            "probes": section(self.probes),
            "state_demo": section(self.state_demo),
            "squeezed": section(self.squeezed),
            "bootstrap": section(self.bootstrap),
        }


SECTIONS = {
    "detection": DetectionSection,
    "state_mle": StateMleSection,
    "process_mle": ProcessMleSection,
    "probes": ProbeSection,
    "state_demo": StateDemoSection,
    "bootstrap": BootstrapSection,
}


def run_config_from_dict(data, base_dir=".") -> RunConfig:
    """Validate a decoded config object; a manifest's embedded `config` is accepted as is."""
    data = _require_mapping(data, "")
    if "config" in data and "toolkit_version" in data:
        data = _require_mapping(data["config"], "config")
    base_dir = Path(base_dir)
    allowed = {f.name for f in fields(RunConfig)}
    _reject_unknown(data, "", allowed)
    if "experiment" not in data:
        raise ConfigError("experiment", "required")
    kwargs = {"experiment": _choice(data["experiment"], "experiment", EXPERIMENTS)}
    if "seed" in data:
        kwargs["seed"] = _integer(data["seed"], "seed", 0, SEED_MAX, nullable=True)
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str) or not data["output_dir"]:
            raise ConfigError("output_dir", "expected a non-empty path")
        kwargs["output_dir"] = data["output_dir"]
    if "threads" in data:
        kwargs["threads"] = _integer(data["threads"], "threads", 1)
    if data.get("channel") is not None:
        kwargs["channel"] = _channel(data["channel"], "channel")
    if data.get("signal_power_map") is not None:
        kwargs["signal_power_map"] = _power_map(data["signal_power_map"], "signal_power_map", base_dir)
    for name, section in SECTIONS.items():
        if name in data:
            kwargs[name] = section.from_dict(data[name], name)
    if "squeezed" in data:
        kwargs["squeezed"] = SqueezedSection.from_dict(data["squeezed"], "squeezed", base_dir)
    try:
        run_config = RunConfig(**kwargs)
        run_config.detection.params()
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("", str(e)) from e
    return run_config


def load_run_config(path, seed=_MISSING, output_dir=None, threads=None) -> RunConfig:
    """Read a JSON config (or a run manifest) and apply CLI overrides."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"{path} is not valid JSON ({e})") from e
    run_config = run_config_from_dict(data, base_dir=path.parent)
    return apply_overrides(run_config, seed=seed, output_dir=output_dir, threads=threads)


def apply_overrides(run_config: RunConfig, seed=_MISSING, output_dir=None, threads=None) -> RunConfig:
    changes = {}
    if seed is not _MISSING and seed is not None:
        changes["seed"] = _integer(seed, "--seed", 0, SEED_MAX)
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    if threads is not None:
        changes["threads"] = _integer(threads, "--threads", 1)
    return replace(run_config, **changes) if changes else run_config
