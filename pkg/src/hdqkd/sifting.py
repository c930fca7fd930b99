"""Delay calibration, coincidence counting and time-bin frame sifting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, OrderingError

PS_PER_S = 1e12


@dataclass(frozen=True)
class FrameConfig:
    """Time-bin alphabet: frames of 2^n bins, n bits per coincidence."""

    bin_width_ps: int
    bits_per_frame: int

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise InvalidParameterError("bin width must be > 0")
        if self.bits_per_frame < 1:
            raise InvalidParameterError("need at least 1 bit per frame")

    @property
    def bins_per_frame(self) -> int:
        return 1 << self.bits_per_frame

    @property
    def frame_duration_ps(self) -> int:
        return self.bins_per_frame * self.bin_width_ps


@dataclass
class CoincidenceResult:
    pairs: np.ndarray          # (N, 2) signal/idler times, ps
    delay_used_ps: float
    window_ps: float
    rate_hz: float
    accidental_rate_hz: float = 0.0

    @property
    def count(self) -> int:
        return len(self.pairs)


@dataclass
class RawKeyReport:
    bits: np.ndarray           # 0/1 per entry, MSB-first within each frame
    frames_used: int
    error_frames: int
    discarded_frames: int
    key_rate_bps: float
    duration_ps: int


def _as_times(tags) -> np.ndarray:
    arr = np.asarray(tags)
    if arr.dtype.names and "time" in arr.dtype.names:
        arr = arr["time"]
    return arr.astype(np.int64)


def _span_ps(signal, idler) -> int:
    lo = min(signal.min(), idler.min())
    hi = max(signal.max(), idler.max())
    return int(hi - lo) or 1


def _pair_differences(signal, idler, max_abs_diff):
    """All signal-idler differences with |diff| <= max_abs_diff, sorted."""
    lo = np.searchsorted(idler, signal - max_abs_diff)
    hi = np.searchsorted(idler, signal + max_abs_diff)
    out = []
    start = 0
    chunk = 200_000
    while start < signal.size:
        stop = min(start + chunk, signal.size)
        reps = hi[start:stop] - lo[start:stop]
        if reps.sum():
            s_rep = np.repeat(signal[start:stop], reps)
            idx = np.concatenate([np.arange(a, b) for a, b in
                                  zip(lo[start:stop], hi[start:stop]) if b > a])
            out.append(s_rep - idler[idx])
        start = stop
    diffs = np.concatenate(out) if out else np.empty(0, dtype=np.int64)
    diffs.sort()
    return diffs


def delay_scan(signal_tags, idler_tags, scan_range_ps: float, step_ps: float,
               window_ps: float | None = None):
    """Coincidence counts versus trial delay.

    For each trial delay d on a grid of spacing `step_ps` across
    +/- scan_range_ps, counts the tag pairs with |t_s - t_i - d| <=
    window/2.  The window defaults to the step, which makes the result a
    plain histogram of pair time differences.
    """
    signal = _as_times(signal_tags)
    idler = _as_times(idler_tags)
    if signal.size == 0 or idler.size == 0:
        raise InvalidParameterError("delay_scan needs non-empty streams")
    if window_ps is None:
        window_ps = step_ps
    delays = np.arange(-scan_range_ps, scan_range_ps + step_ps / 2.0, step_ps)
    diffs = _pair_differences(signal, idler, scan_range_ps + window_ps)
    counts = (np.searchsorted(diffs, delays + window_ps / 2.0, side="right")
              - np.searchsorted(diffs, delays - window_ps / 2.0, side="left"))
    return delays, counts.astype(np.int64)


def estimate_delay(delays, counts, refine_bins: int = 2) -> float:
    """Argmax of a delay-scan histogram refined by a local centroid."""
    delays = np.asarray(delays, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    k = int(np.argmax(counts))
    lo = max(0, k - refine_bins)
    hi = min(delays.size, k + refine_bins + 1)
    w = counts[lo:hi]
    if w.sum() == 0:
        return float(delays[k])
    return float(np.sum(delays[lo:hi] * w) / w.sum())


def find_coincidences(signal_tags, idler_tags, delay_ps: float, window_ps: float,
                      duration_ps: int | None = None) -> CoincidenceResult:
    """Greedy nearest-neighbor pairing of tags within a coincidence window.

    A signal tag s pairs with an unused idler tag i when
    |s - i - delay| <= window/2; ties resolve to the earlier idler tag.
    """
    signal = _as_times(signal_tags)
    idler = _as_times(idler_tags)
    if np.any(np.diff(signal) < 0) or np.any(np.diff(idler) < 0):
        raise OrderingError("tag streams must be sorted")
    if duration_ps is None:
        duration_ps = _span_ps(signal, idler) if signal.size and idler.size else 1

    half = window_ps / 2.0
    shifted = idler + int(round(delay_ps))
    pairs = []
    j = 0
    n_i = idler.size
    for s in signal:
        while j < n_i and shifted[j] < s - half:
            j += 1
        if j >= n_i:
            break
        # candidates are shifted[j] and possibly shifted[j+1]; pick nearest,
        # tie -> earlier idler
        best = -1
        if shifted[j] <= s + half:
            best = j
            k = j + 1
            while k < n_i and shifted[k] <= s + half:
                if abs(shifted[k] - s) < abs(shifted[best] - s):
                    best = k
                k += 1
        if best >= 0:
            pairs.append((s, idler[best]))
            j = best + 1
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    rate = pairs.shape[0] / (duration_ps / PS_PER_S)
    return CoincidenceResult(pairs=pairs, delay_used_ps=delay_ps,
                             window_ps=window_ps, rate_hz=rate)


def accidental_rate(signal_tags, idler_tags, delay_ps: float, window_ps: float,
                    offset_step_ps: float, offset_multiples=(20, 30, 40, 50, 60),
                    duration_ps: int | None = None) -> float:
    """Shifted-window accidental-coincidence estimator.

    Re-runs the coincidence search at delays offset by multiples of
    `offset_step_ps` (typically the gate period) and averages the resulting
    rates.  The default multiples sit beyond the afterpulse horizon so the
    estimate is not contaminated by afterpulse-photon correlations.
    """
    if min(offset_multiples) * abs(offset_step_ps) <= window_ps:
        raise InvalidParameterError("offsets must exceed the window")
    signal = _as_times(signal_tags)
    idler = _as_times(idler_tags)
    if duration_ps is None:
        duration_ps = _span_ps(signal, idler)
    rates = []
    for k in offset_multiples:
        res = find_coincidences(signal, idler, delay_ps + k * offset_step_ps,
                                window_ps, duration_ps=duration_ps)
        rates.append(res.rate_hz)
    return float(np.mean(rates))


def sift_frames(signal_tags, idler_tags, delay_ps: float, frames: FrameConfig,
                duration_ps: int | None = None,
                frame_phase_ps: int = 0) -> RawKeyReport:
    """Sift aligned tag streams into raw key bits.

    The timeline is partitioned into frames of 2^n bins; a frame yields the
    n bits of the shared bin index (MSB-first) iff each party has exactly
    one detection and the bin indices agree.  Frames where both parties
    have exactly one detection in different bins count as errors; frames
    with multiple detections on either side are discarded.
    """
    signal = _as_times(signal_tags)
    idler = _as_times(idler_tags) + int(round(delay_ps))
    fd = frames.frame_duration_ps
    if duration_ps is None:
        hi = max(signal.max() if signal.size else 0,
                 idler.max() if idler.size else 0)
        duration_ps = (int(hi - frame_phase_ps) // fd + 1) * fd

    def single_frames(t):
        f = (t - frame_phase_ps) // fd
        frames_u, counts = np.unique(f, return_counts=True)
        single = counts == 1
        # bin of the single detection in each single-occupancy frame
        first_idx = np.searchsorted(f, frames_u[single])
        bins = ((t[first_idx] - frame_phase_ps) % fd) // frames.bin_width_ps
        return frames_u[single], bins, frames_u[~single]

    fs, bs, multi_s = single_frames(signal)
    fi, bi, multi_i = single_frames(idler)

    common, idx_s, idx_i = np.intersect1d(fs, fi, return_indices=True)
    agree = bs[idx_s] == bi[idx_i]
    used_bins = bs[idx_s][agree]
    frames_used = int(agree.sum())
    error_frames = int((~agree).sum())
    discarded = int(np.union1d(multi_s, multi_i).size)

    n = frames.bits_per_frame
    shifts = np.arange(n - 1, -1, -1)
    bits = ((used_bins[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()
    key_rate = n * frames_used / (duration_ps / PS_PER_S)
    return RawKeyReport(bits=bits, frames_used=frames_used,
                        error_frames=error_frames, discarded_frames=discarded,
                        key_rate_bps=key_rate, duration_ps=int(duration_ps))


def pack_key_bits(bits: np.ndarray) -> bytes:
    """Pack 0/1 bit array into bytes, MSB-first, zero-padded at the end."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
