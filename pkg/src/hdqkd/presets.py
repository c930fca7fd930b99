"""Named configuration presets.

All published instrument numbers live here so experiments and tests can
reference presets rather than literals.  A configuration is a nested dict
of sections; presets may extend other presets via the "extends" key of
the [meta] section.
"""

from __future__ import annotations

import copy

from .errors import InvalidParameterError

_SIGNAL_LOSS = {
    "bpf_transmission": 0.99,
    "fiber_coupling": 0.79,
    "waveguide_attenuation_db_per_cm": 0.65,
    "waveguide_length_cm": 1.56,
    "pbs_insertion_loss_db": 0.65,
    "coating_loss_db": 0.5,
    "detector_efficiency": 0.22,
}

_IDLER_LOSS = {
    "bpf_transmission": 0.99,
    "fiber_coupling": 0.85,
    "waveguide_attenuation_db_per_cm": 1.35,
    "waveguide_length_cm": 1.56,
    "pbs_insertion_loss_db": 0.75,
    "coating_loss_db": 0.5,
    "detector_efficiency": 0.20,
}

_SOURCE = {
    "spectral_brightness": 1.0e7,        # pairs/(s nm mW)
    "bandwidth_fwhm_nm": 1.6,
    "pump_power_mw": 35.0,
    "pair_jitter_fwhm_ps": 2.0,
}

# sine gating, 628.5 MHz: key-generation configuration.  SPAD dead time is
# negligible with self-differencing readout, so holdoff is 0 and the 80 ns
# recovery lives in the TDC (fanout 2 -> 40 ns effective).
_SINE_628 = {
    "meta": {"name": "paper-sine-628"},
    "source": dict(_SOURCE),
    "loss_signal": dict(_SIGNAL_LOSS),
    "loss_idler": dict(_IDLER_LOSS),
    "gate_signal": {
        "waveform": "sine",
        "frequency_hz": 628.5e6,
        "nominal_gate_width_ps": 900.0,
        "effective_gate_width_ps": 395.0,
        "gate_phase_ps": 0.0,
    },
    "gate_idler": {
        "waveform": "sine",
        "frequency_hz": 628.5e6,
        "nominal_gate_width_ps": 900.0,
        "effective_gate_width_ps": 395.0,
        "gate_phase_ps": 0.0,
    },
    "detector_signal": {
        "efficiency": 0.22,
        "dark_prob_per_gate": 3e-5,
        "afterpulse_total": 0.035,
        "afterpulse_horizon_gates": 15,
        "holdoff_ps": 0.0,
    },
    "detector_idler": {
        "efficiency": 0.20,
        "dark_prob_per_gate": 3e-5,
        "afterpulse_total": 0.035,
        "afterpulse_horizon_gates": 15,
        "holdoff_ps": 0.0,
    },
    "tdc": {"recovery_ps": 80_000.0, "demux_fanout": 2, "paralyzable": False},
    "frames": {"bin_width_ps": 1600, "bits_per_frame": 2},
    "run": {
        "kind": "keygen",
        "duration_s": 2e-3,
        "seed": 20260826,
        "coincidence_window_ps": 200.0,
        "idler_delay_ps": 3200,
        "delay_scan_range_ps": 6400.0,
        "delay_scan_step_ps": 25.0,
    },
}

_SINE_1257 = {
    "meta": {"name": "paper-sine-1257", "extends": "paper-sine-628"},
    "gate_signal": {"frequency_hz": 1.257e9, "nominal_gate_width_ps": 450.0,
                    "effective_gate_width_ps": 199.0},
    "gate_idler": {"frequency_hz": 1.257e9, "nominal_gate_width_ps": 450.0,
                   "effective_gate_width_ps": 199.0},
    "detector_signal": {"efficiency": 0.18, "dark_prob_per_gate": 2e-5},
    "detector_idler": {"efficiency": 0.17, "dark_prob_per_gate": 2e-5},
    "frames": {"bin_width_ps": 800, "bits_per_frame": 3},
}

# square gating, 628.5 MHz: Franson / characterization configuration with
# the 80 ns hold-off of the counting electronics.
_SQUARE_628 = {
    "meta": {"name": "paper-square-628", "extends": "paper-sine-628"},
    "gate_signal": {"waveform": "square", "nominal_gate_width_ps": 500.0,
                    "effective_gate_width_ps": 110.0},
    "gate_idler": {"waveform": "square", "nominal_gate_width_ps": 500.0,
                   "effective_gate_width_ps": 110.0},
    "detector_signal": {"efficiency": 0.20, "dark_prob_per_gate": 2e-6,
                        "afterpulse_total": 0.060, "holdoff_ps": 80_000.0},
    "detector_idler": {"efficiency": 0.20, "dark_prob_per_gate": 2e-6,
                       "afterpulse_total": 0.060, "holdoff_ps": 80_000.0},
}

_LOSSLESS = {
    "meta": {"name": "lossless", "extends": "paper-sine-628"},
    "loss_signal": {k: (1.0 if "db" not in k.lower() else 0.0)
                    for k in _SIGNAL_LOSS},
    "loss_idler": {k: (1.0 if "db" not in k.lower() else 0.0)
                   for k in _IDLER_LOSS},
}
_LOSSLESS["loss_signal"]["waveguide_length_cm"] = 1.56
_LOSSLESS["loss_idler"]["waveguide_length_cm"] = 1.56

_FIG2 = {
    "meta": {"name": "fig2-delay-scan", "extends": "paper-square-628"},
    "run": {"kind": "gate-delay-scan", "pairs": 200_000,
            "delay_min_ps": -900.0, "delay_max_ps": 900.0,
            "delay_step_ps": 20.0},
}

# pump sweep for the rate-scaling curves; TDC recovery disabled so the
# extracted slopes reflect the source statistics, not counter saturation
_FIG4 = {
    "meta": {"name": "fig4-sine-628", "extends": "paper-sine-628"},
    "tdc": {"recovery_ps": 0.0, "demux_fanout": 1},
    "run": {"kind": "pump-sweep", "duration_s": 10e-3},
    "sweep": {"variable": "source.pump_power_mw", "values": [10.0, 20.0, 35.0]},
}

_FIG5 = {
    "meta": {"name": "fig5-visibility", "extends": "paper-square-628"},
    "franson": {
        "path_mismatch_ps": 4800.0,
        "mismatch_difference_ps": 0.0,
        "accidental_floor": 0.002,
        "dispersion_penalty": 0.0133,
        "coherence_time_ps": 2.0,
    },
    "run": {"kind": "franson", "gates_per_point": 10_000_000,
            "phase_points": 17,
            "alpha_grid": [0.0024, 0.005, 0.010, 0.020, 0.031]},
}

_PRESETS = {
    p["meta"]["name"]: p
    for p in (_SINE_628, _SINE_1257, _SQUARE_628, _LOSSLESS, _FIG2, _FIG4, _FIG5)
}


def preset_names():
    return sorted(_PRESETS)


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for section, values in override.items():
        if isinstance(values, dict):
            out.setdefault(section, {})
            out[section].update(copy.deepcopy(values))
        else:
            out[section] = copy.deepcopy(values)
    return out


def resolve_preset(name: str) -> dict:
    """Preset by name with its inheritance chain flattened."""
    if name not in _PRESETS:
        raise InvalidParameterError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    preset = _PRESETS[name]
    parent = preset.get("meta", {}).get("extends")
    if parent:
        base = resolve_preset(parent)
        merged = deep_merge(base, preset)
        merged["meta"] = dict(preset["meta"])
        return merged
    return copy.deepcopy(preset)
