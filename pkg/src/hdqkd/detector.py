"""Self-differencing gated InGaAs SPAD model.

The gate is a periodic top-hat of the measured effective width; detection
efficiency is flat across the window.  Every avalanche (photon or dark)
schedules afterpulses over a fixed horizon of gates following the hold-off,
with an exponentially decaying per-gate probability renormalized to the
configured integrated afterpulse probability.  Afterpulses do not trigger
secondary afterpulses.  Hold-off is enforced exactly: no two output events
on one detector are closer than the hold-off.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import InvalidParameterError, OrderingError
from .seeding import as_seed_sequence
from .source import FWHM_TO_SIGMA

ORIGIN_PHOTON = 0
ORIGIN_DARK = 1
ORIGIN_AFTERPULSE = 2
ORIGIN_NAMES = {ORIGIN_PHOTON: "photon", ORIGIN_DARK: "dark", ORIGIN_AFTERPULSE: "afterpulse"}

DETECTION_DTYPE = np.dtype([
    ("time", "<i8"),        # ps
    ("gate_index", "<i8"),
    ("origin", "u1"),
])


@dataclass(frozen=True)
class GateConfig:
    """Periodic gating waveform geometry."""

    waveform: str                    # "square" or "sine"
    frequency_hz: float
    nominal_gate_width_ps: float
    effective_gate_width_ps: float
    gate_phase_ps: float = 0.0

    def __post_init__(self):
        if self.waveform not in ("square", "sine"):
            raise InvalidParameterError("waveform must be 'square' or 'sine'")
        if self.frequency_hz <= 0:
            raise InvalidParameterError("frequency must be > 0")
        if not (0 < self.effective_gate_width_ps
                <= self.nominal_gate_width_ps
                <= self.period_ps):
            raise InvalidParameterError(
                "need effective <= nominal gate width <= period")

    @property
    def period_ps(self) -> float:
        return 1e12 / self.frequency_hz


@dataclass(frozen=True)
class DetectorParams:
    """Click statistics of one SPAD."""

    efficiency: float                 # per in-gate photon
    dark_prob_per_gate: float
    afterpulse_total: float           # integrated over the horizon
    afterpulse_horizon_gates: int = 15
    holdoff_ps: float = 0.0
    afterpulse_decay_gates: float = 3.0   # exponential decay constant, in gates
    paralyzable: bool = False             # reserved; hold-off is non-extending

    def __post_init__(self):
        for name in ("efficiency", "dark_prob_per_gate", "afterpulse_total"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise InvalidParameterError(f"DetectorParams.{name} must be in [0, 1)")
        if self.afterpulse_horizon_gates < 1:
            raise InvalidParameterError("afterpulse horizon must be >= 1 gate")
        if self.holdoff_ps < 0:
            raise InvalidParameterError("holdoff must be >= 0")
        if self.afterpulse_decay_gates <= 0:
            raise InvalidParameterError("afterpulse decay constant must be > 0")


def duty_cycle(config: GateConfig) -> float:
    """Fraction of time the detector is sensitive."""
    return config.effective_gate_width_ps * config.frequency_hz * 1e-12


def gate_index(config: GateConfig, times) -> np.ndarray:
    """Index of the nearest gate for each arrival time."""
    t = np.asarray(times, dtype=np.float64)
    return np.rint((t - config.gate_phase_ps) / config.period_ps).astype(np.int64)


def gate_center_ps(config: GateConfig, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.float64)
    return np.rint(config.gate_phase_ps + idx * config.period_ps).astype(np.int64)


def gate_acceptance(config: GateConfig, arrivals) -> np.ndarray:
    """True where an arrival falls inside the effective top-hat window."""
    t = np.asarray(arrivals, dtype=np.float64)
    offset = t - config.gate_phase_ps - gate_index(config, t) * config.period_ps
    return np.abs(offset) <= config.effective_gate_width_ps / 2.0


def afterpulse_gate_probs(params: DetectorParams) -> np.ndarray:
    """Per-gate afterpulse probabilities over the horizon, summing to the total."""
    k = np.arange(1, params.afterpulse_horizon_gates + 1, dtype=np.float64)
    w = np.exp(-k / params.afterpulse_decay_gates)
    return params.afterpulse_total * w / w.sum()


def _sample_dark_gates(rng, dark_prob: float, n_gates: int) -> np.ndarray:
    """Gate offsets (0-based) that fire a dark count; geometric-gap sampling."""
    if dark_prob <= 0.0 or n_gates <= 0:
        return np.empty(0, dtype=np.int64)
    out = []
    pos = -1
    batch = max(1024, int(1.2 * dark_prob * n_gates) + 16)
    while pos < n_gates:
        gaps = rng.geometric(dark_prob, size=batch)
        idx = pos + np.cumsum(gaps)
        out.append(idx)
        pos = int(idx[-1])
    idx = np.concatenate(out)
    return idx[idx < n_gates]


def detect_stream(photons, params: DetectorParams, config: GateConfig, seed,
                  gate_span=None) -> np.ndarray:
    """Run the detector over a sorted photon arrival stream.

    Returns a DETECTION_DTYPE structured array, time-sorted.  `gate_span`
    is an inclusive (low, high) gate-index range for dark generation; it
    defaults to the range covered by the photon stream.  Deterministic for
    a fixed seed; the efficiency, dark and afterpulse draws use independent
    child streams so that raising one probability leaves the other draws
    untouched (coupled-randomness monotonicity).
    """
    photons = np.asarray(photons, dtype=np.int64)
    if photons.size and np.any(np.diff(photons) < 0):
        raise OrderingError("photon arrivals must be sorted")
    if gate_span is None:
        if photons.size == 0:
            raise InvalidParameterError("need photons or an explicit gate_span")
        g = gate_index(config, photons)
        gate_span = (int(g.min()), int(g.max()))
    g_lo, g_hi = int(gate_span[0]), int(gate_span[1])

    ss = as_seed_sequence(seed)
    eff_rng, dark_rng, ap_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    # photon candidates: in-gate and efficiency draw
    gidx = gate_index(config, photons)
    in_gate = gate_acceptance(config, photons) & (gidx >= g_lo) & (gidx <= g_hi)
    u = eff_rng.random(photons.size)
    keep = in_gate & (u < params.efficiency)
    cand_t = photons[keep]
    cand_g = gidx[keep]
    cand_o = np.full(cand_t.size, ORIGIN_PHOTON, dtype=np.uint8)

    # dark candidates at gate centers
    dark_g = _sample_dark_gates(dark_rng, params.dark_prob_per_gate,
                                g_hi - g_lo + 1) + g_lo
    if dark_g.size:
        cand_t = np.concatenate([cand_t, gate_center_ps(config, dark_g)])
        cand_g = np.concatenate([cand_g, dark_g])
        cand_o = np.concatenate([cand_o, np.full(dark_g.size, ORIGIN_DARK, dtype=np.uint8)])
    order = np.argsort(cand_t, kind="stable")
    cand_t, cand_g, cand_o = cand_t[order], cand_g[order], cand_o[order]
    n = cand_t.size

    # pre-draw afterpulse decisions for every candidate avalanche (CSR layout);
    # draws are only consumed if the candidate is accepted
    p_gate = afterpulse_gate_probs(params)
    horizon = params.afterpulse_horizon_gates
    ap_rows, ap_offsets = [], []
    for start in range(0, n, 200_000):
        stop = min(start + 200_000, n)
        fired = ap_rng.random((stop - start, horizon)) < p_gate
        r, c = np.nonzero(fired)
        ap_rows.append(r + start)
        ap_offsets.append(c + 1)
    ap_rows = np.concatenate(ap_rows) if ap_rows else np.empty(0, dtype=np.int64)
    ap_offsets = np.concatenate(ap_offsets) if ap_offsets else np.empty(0, dtype=np.int64)
    ap_ptr = np.searchsorted(ap_rows, np.arange(n + 1))

    holdoff = float(params.holdoff_ps)
    period = config.period_ps
    phase = config.gate_phase_ps
    hold_gates = int(math.ceil(holdoff / period)) if holdoff > 0 else 0

    out_t, out_g, out_o = [], [], []
    pending = []  # heap of (time, gate) afterpulse candidates
    last = -math.inf
    i = 0
    while i < n or pending:
        if pending and (i >= n or pending[0][0] <= cand_t[i]):
            t, g = heapq.heappop(pending)
            o = ORIGIN_AFTERPULSE
            primary_idx = None
        else:
            t, g, o = int(cand_t[i]), int(cand_g[i]), int(cand_o[i])
            primary_idx = i
            i += 1
        if t - last < holdoff:
            continue
        last = t
        out_t.append(t)
        out_g.append(g)
        out_o.append(o)
        if primary_idx is not None:
            lo, hi = ap_ptr[primary_idx], ap_ptr[primary_idx + 1]
            if hi > lo:
                base = g + hold_gates
                for off in ap_offsets[lo:hi]:
                    ap_g = base + int(off)
                    if ap_g <= g_hi:
                        ap_t = int(round(phase + ap_g * period))
                        heapq.heappush(pending, (ap_t, ap_g))

    out = np.empty(len(out_t), dtype=DETECTION_DTYPE)
    out["time"] = out_t
    out["gate_index"] = out_g
    out["origin"] = out_o
    return out


def afterpulse_characterization(params: DetectorParams, config: GateConfig,
                                illuminated_gates: int, seed,
                                flux_per_gate: float = 0.1,
                                illumination_period_gates: int = 16) -> dict:
    """Pulsed-illumination afterpulse measurement.

    Illuminates every Nth gate with a Poisson flux and runs the detector
    over the full gate stream; returns primary/afterpulse avalanche counts
    and their ratio, which estimates the integrated afterpulse probability.
    """
    ss = as_seed_sequence(seed)
    s_photons, s_det = ss.spawn(2)
    rng = np.random.default_rng(s_photons)
    n_photons = rng.poisson(flux_per_gate * illuminated_gates)
    gates = np.sort(rng.integers(0, illuminated_gates, size=n_photons))
    gates = gates * illumination_period_gates
    photons = gate_center_ps(config, gates)
    n_gates = illuminated_gates * illumination_period_gates

    events = detect_stream(photons, params, config, s_det,
                           gate_span=(0, n_gates - 1))
    primaries = int(np.sum(events["origin"] == ORIGIN_PHOTON))
    afterpulses = int(np.sum(events["origin"] == ORIGIN_AFTERPULSE))
    return {
        "primaries": primaries,
        "afterpulses": afterpulses,
        "ratio": afterpulses / primaries if primaries else float("nan"),
    }


def _tophat_overlap(width_a: float, width_b: float, delays: np.ndarray) -> np.ndarray:
    """Cross-correlation of two centered top-hats (jitter-free)."""
    d = np.abs(np.asarray(delays, dtype=np.float64))
    flat_top = min(width_a, width_b)
    return np.clip(np.minimum(flat_top, (width_a + width_b) / 2.0 - d), 0.0, None)


def coincidence_vs_gate_delay(config_a: GateConfig, config_b: GateConfig,
                              pair_jitter_fwhm_ps: float, delays) -> np.ndarray:
    """Analytic coincidence curve vs relative gate delay, normalized to peak 1.

    The curve is the overlap of the two effective top-hat windows convolved
    with the Gaussian pair jitter.
    """
    delays = np.asarray(delays, dtype=np.float64)
    wa = config_a.effective_gate_width_ps
    wb = config_b.effective_gate_width_ps
    sigma = pair_jitter_fwhm_ps * FWHM_TO_SIGMA
    if sigma == 0.0:
        curve = _tophat_overlap(wa, wb, delays)
    else:
        # integrate the Gaussian-smoothed window B across window A
        nodes, weights = np.polynomial.legendre.leggauss(96)
        t = nodes * (wa / 2.0)                       # (q,)
        x = t[None, :] - delays[:, None]             # (d, q)
        s = 0.5 * (erf((x + wb / 2.0) / (sigma * math.sqrt(2.0)))
                   - erf((x - wb / 2.0) / (sigma * math.sqrt(2.0))))
        curve = (s * weights[None, :]).sum(axis=1) * (wa / 2.0)
    peak = curve.max()
    return curve / peak if peak > 0 else curve


def fit_gate_widths(delays, counts, pair_jitter_fwhm_ps: float,
                    width_guess: float):
    """Deconvolve a measured coincidence-vs-delay curve.

    Fits amplitude, center and a common effective width of two identical
    top-hat windows convolved with the pair jitter; returns the fitted
    width in ps.
    """
    from scipy.optimize import curve_fit

    delays = np.asarray(delays, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)

    def model(d, amp, center, width):
        cfg = GateConfig("square", 1e12 / (8 * max(width, 1.0)),
                         max(width, 1.0), max(width, 1.0))
        return amp * coincidence_vs_gate_delay(cfg, cfg, pair_jitter_fwhm_ps,
                                               d - center)

    p0 = [counts.max(), delays[np.argmax(counts)], width_guess]
    popt, _ = curve_fit(model, delays, counts, p0=p0)
    return abs(popt[2])
