# dataset.py
# Reference values measured in the slow-light Kerr experiment, the named
# channels built from them, and the default signal-power map.

import numpy as np

from src.config import (
    EIT_EXCESS_NOISE,
    EIT_PHASE_SHIFT,
    EIT_TRANSMISSION,
    NTYPE_PHASE_SHIFT,
    NTYPE_TRANSMISSION,
)
from src.core.channel import ChannelParams, SignalPowerMap

# Measured values, reported next to simulated results as context only.
REFERENCE_VALUES = {
    "eit_phase_shift_rad": 2.13,
    "eit_phase_shift_stderr_rad": 0.04,
    "ntype_phase_shift_rad": 0.67,
    "ntype_phase_shift_stderr_rad": 0.04,
    "phase_difference_rad": 1.46,
    "phase_difference_stderr_rad": 0.06,
    "mean_variance_input": 0.517,
    "mean_variance_eit": 0.562,
    "mean_variance_ntype": 0.517,
    "eit_transmission": 0.25,
    "ntype_transmission": 0.035,
    "squeezed_eit_min_db": -0.83,
    "squeezed_eit_max_db": 2.47,
    "squeezed_eit_stderr_db": 0.04,
    "squeezed_ntype_min_db": -0.15,
    "squeezed_ntype_max_db": 0.43,
    "squeezed_ntype_stderr_db": 0.06,
    "signal_power_range_mw": [0.55, 2.10],
}

IDENTITY_CHANNEL = ChannelParams(phase_shift=0.0, transmission=1.0, label="identity")
EIT_CHANNEL = ChannelParams(
    phase_shift=EIT_PHASE_SHIFT, transmission=EIT_TRANSMISSION, excess_noise=EIT_EXCESS_NOISE, label="EIT"
)
NTYPE_CHANNEL = ChannelParams(phase_shift=NTYPE_PHASE_SHIFT, transmission=NTYPE_TRANSMISSION, label="N-type")

NAMED_CHANNELS = {
    "identity": IDENTITY_CHANNEL,
    "eit": EIT_CHANNEL,
    "n-type": NTYPE_CHANNEL,
}


def _default_signal_power_map() -> SignalPowerMap:
    """
    Six powers over 0.55-2.10 mW. Only the end points were measured; phase
    (1.48 -> 0.67 rad) and transmission (25% -> 3.5%) are interpolated
    linearly in between, so the intermediate entries are illustrative.
    """
    powers = np.linspace(0.55, 2.10, 6)
    phases = np.linspace(1.48, NTYPE_PHASE_SHIFT, 6)
    transmissions = np.linspace(EIT_TRANSMISSION, NTYPE_TRANSMISSION, 6)
    return SignalPowerMap(
        tuple(
            (
                round(float(p), 6),
                ChannelParams(
                    phase_shift=round(float(theta), 6),
                    transmission=round(float(t), 6),
                    label=f"N-type @ {p:.2f} mW",
                ),
            )
            for p, theta, t in zip(powers, phases, transmissions)
        )
    )


DEFAULT_SIGNAL_POWER_MAP = _default_signal_power_map()

