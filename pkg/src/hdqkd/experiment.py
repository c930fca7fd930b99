"""Experiment orchestration: named desk-scale runs and report files.

A run executes source -> detectors -> TDC -> sifting (or the Franson
branch) from a config dict, and writes CSV/JSON/tag/key files to an output
directory.  A single master seed deterministically derives per-stage and
per-sweep-point sub-seeds through numpy SeedSequence spawning, so identical
config + seed gives byte-identical output files.
"""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__ as _pkg_version
from .config import (build_detector, build_frames, build_franson, build_gate,
                     build_loss, build_source, build_tdc, set_config_value)
from .detector import ORIGIN_PHOTON, detect_stream, fit_gate_widths, gate_acceptance
from .errors import InvalidParameterError
from .franson import mc_franson, visibility_from_fringe, visibility_model
from .presets import resolve_preset
from .seeding import as_seed_sequence
from .sifting import (accidental_rate, delay_scan, estimate_delay,
                      find_coincidences, pack_key_bits, sift_frames)
from .source import channel_efficiency, generate_pair_stream, pair_rate
from .timetags import make_tags, record_tags, write_tag_file

SCHEMA_VERSION = 1


@dataclass
class RunReport:
    kind: str
    seed: int
    config: dict
    stages: dict = field(default_factory=dict)     # pipeline counts
    rates: dict = field(default_factory=dict)      # value -> (rate, stderr)
    results: dict = field(default_factory=dict)
    wall_time_s: float = 0.0                       # never serialized

    def validate(self):
        """Pipeline monotonicity checks; raises on violation."""
        s = self.stages
        if "pairs_generated" in s:
            for side in ("signal", "idler"):
                det = s.get(f"photon_detections_{side}")
                if det is not None and det > s["pairs_generated"]:
                    raise InvalidParameterError(
                        f"{side} photon detections exceed generated pairs")
                rec = s.get(f"recorded_{side}")
                tot = s.get(f"detections_{side}")
                if rec is not None and tot is not None and rec > tot:
                    raise InvalidParameterError(f"{side} recorded exceeds detected")
        if "coincidences" in s:
            singles = [s[k] for k in ("recorded_signal", "recorded_idler") if k in s]
            if singles and s["coincidences"] > min(singles):
                raise InvalidParameterError("coincidences exceed singles")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "stages": self.stages,
            "rates": self.rates,
            "results": self.results,
        }


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.10g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _write_manifest(out_dir, cfg, seed, kind):
    _write_json(os.path.join(out_dir, "manifest.json"), {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "seed": seed,
        "config": cfg,
        "versions": {"hdqkd": _pkg_version, "numpy": np.__version__},
    })


def budget_breakdown(cfg: dict) -> dict:
    """Itemized per-channel loss table; totals equal channel_efficiency."""
    out = {}
    for side in ("signal", "idler"):
        loss = build_loss(cfg, side)
        rows = [{"component": name, "loss_db": db, "transmission": tr}
                for name, db, tr in loss.items()]
        out[side] = {"items": rows, "total_efficiency": channel_efficiency(loss)}
    return out


def _simulate_side(pairs, side, cfg, thin_seed, det_seed, duration_ps,
                   idler_delay_ps=0):
    """Optical thinning, gated detection and TDC recording for one channel."""
    loss = build_loss(cfg, side)
    gate_cfg = build_gate(cfg, side)
    det_params = build_detector(cfg, side)
    tdc = build_tdc(cfg)

    optics = channel_efficiency(loss, include_detector=False)
    rng = np.random.default_rng(thin_seed)
    arrivals = pairs[side][rng.random(len(pairs)) < optics]
    if idler_delay_ps:
        arrivals = arrivals + idler_delay_ps
    arrivals = np.sort(arrivals)

    n_gates = int((duration_ps + abs(idler_delay_ps)) / gate_cfg.period_ps)
    detections = detect_stream(arrivals, det_params, gate_cfg, det_seed,
                               gate_span=(0, n_gates))
    recorded, dropped = record_tags(detections["time"], tdc)
    return {
        "arrivals": int(arrivals.size),
        "detections": detections,
        "recorded": recorded,
        "tdc_dropped": dropped,
    }


def _keygen_point(cfg, seed, duration_s):
    """One full key-generation pipeline pass; returns raw arrays + counts."""
    src = build_source(cfg)
    rate = pair_rate(src)
    duration_ps = int(duration_s * 1e12)
    run_cfg = cfg["run"]
    idler_delay = int(run_cfg.get("idler_delay_ps", 0))

    ss = as_seed_sequence(seed)
    s_src, s_ts, s_ti, s_ds, s_di = ss.spawn(5)
    pairs = generate_pair_stream(rate, duration_s, s_src,
                                 jitter_fwhm_ps=src.pair_jitter_fwhm_ps)
    signal = _simulate_side(pairs, "signal", cfg, s_ts, s_ds, duration_ps)
    idler = _simulate_side(pairs, "idler", cfg, s_ti, s_di, duration_ps,
                           idler_delay_ps=idler_delay)

    rec_s, rec_i = signal["recorded"], idler["recorded"]
    scan_range = run_cfg.get("delay_scan_range_ps", 2 * abs(idler_delay) + 2000)
    step = run_cfg.get("delay_scan_step_ps", 25.0)
    delays, counts = delay_scan(rec_s, rec_i, scan_range, step)
    delay = estimate_delay(delays, counts)

    window = run_cfg.get("coincidence_window_ps", 200.0)
    coinc = find_coincidences(rec_s, rec_i, delay, window, duration_ps=duration_ps)
    period = build_gate(cfg, "signal").period_ps
    acc = accidental_rate(rec_s, rec_i, delay, window, offset_step_ps=period,
                          duration_ps=duration_ps)
    return {
        "pairs": pairs, "signal": signal, "idler": idler,
        "delay": delay, "delay_hist": (delays, counts),
        "coincidences": coinc, "accidental_rate": acc,
        "duration_ps": duration_ps,
    }


def _run_keygen(cfg, seed, out_dir):
    duration_s = cfg["run"]["duration_s"]
    point = _keygen_point(cfg, seed, duration_s)
    frames = build_frames(cfg)
    rec_s, rec_i = point["signal"]["recorded"], point["idler"]["recorded"]
    key = sift_frames(rec_s, rec_i, point["delay"], frames,
                      duration_ps=point["duration_ps"])

    report = RunReport(kind="keygen", seed=seed, config=cfg)
    report.stages = {
        "pairs_generated": int(len(point["pairs"])),
        "sifted_bits": int(key.bits.size),
        "coincidences": point["coincidences"].count,
    }
    for side in ("signal", "idler"):
        det = point[side]["detections"]
        report.stages[f"arrivals_{side}"] = point[side]["arrivals"]
        report.stages[f"photon_detections_{side}"] = int(
            np.sum(det["origin"] == ORIGIN_PHOTON))
        report.stages[f"detections_{side}"] = int(det.size)
        report.stages[f"recorded_{side}"] = int(point[side]["recorded"].size)
    dur = point["duration_ps"] * 1e-12
    report.rates = {
        "singles_signal_hz": report.stages["recorded_signal"] / dur,
        "singles_idler_hz": report.stages["recorded_idler"] / dur,
        "coincidence_rate_hz": point["coincidences"].rate_hz,
        "accidental_rate_hz": point["accidental_rate"],
        "raw_key_rate_bps": key.key_rate_bps,
    }
    report.results = {
        "delay_used_ps": point["delay"],
        "frames_used": key.frames_used,
        "error_frames": key.error_frames,
        "discarded_frames": key.discarded_frames,
        "bits_per_frame": frames.bits_per_frame,
    }
    report.validate()

    if out_dir:
        write_tag_file(make_tags(rec_s, 0), os.path.join(out_dir, "signal.htag"))
        write_tag_file(make_tags(rec_i, 1), os.path.join(out_dir, "idler.htag"))
        with open(os.path.join(out_dir, "key.bits"), "wb") as fh:
            fh.write(pack_key_bits(key.bits))
        _write_json(os.path.join(out_dir, "key.json"), {
            "schema_version": SCHEMA_VERSION,
            "bits": int(key.bits.size),
            "frames_used": key.frames_used,
            "error_frames": key.error_frames,
            "discarded_frames": key.discarded_frames,
            "key_rate_bps": key.key_rate_bps,
            "bit_packing": "MSB-first, zero padded",
        })
        delays, counts = point["delay_hist"]
        _write_csv(os.path.join(out_dir, "delay_scan.csv"),
                   ("x", "count", "rate_hz", "stderr"),
                   [(float(d), int(c), c / dur, float(np.sqrt(c)) / dur)
                    for d, c in zip(delays, counts)])
    return report


def _sweep_point_worker(args):
    cfg, variable, value, sub_seed, duration_s = args
    cfg = copy.deepcopy(cfg)
    set_config_value(cfg, variable, value)
    point = _keygen_point(cfg, sub_seed, duration_s)
    dur = point["duration_ps"] * 1e-12
    n = point["coincidences"].count
    return {
        "value": value,
        "coincidence_count": n,
        "coincidence_rate_hz": point["coincidences"].rate_hz,
        "coincidence_stderr_hz": float(np.sqrt(max(n, 1)) / dur),
        "accidental_rate_hz": point["accidental_rate"],
    }


def _run_pump_sweep(cfg, seed, out_dir, workers=1):
    sweep = cfg.get("sweep")
    if not sweep:
        raise InvalidParameterError("pump-sweep run needs a [sweep] section")
    variable, values = sweep["variable"], list(sweep["values"])
    duration_s = cfg["run"]["duration_s"]
    ss = as_seed_sequence(seed)
    children = ss.spawn(len(values))
    jobs = [(cfg, variable, v, child, duration_s)
            for v, child in zip(values, children)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_point_worker, jobs))
    else:
        points = [_sweep_point_worker(job) for job in jobs]

    report = RunReport(kind="pump-sweep", seed=seed, config=cfg)
    rows_true, rows_acc = [], []
    for p in points:
        true_rate = p["coincidence_rate_hz"] - p["accidental_rate_hz"]
        rows_true.append((float(p["value"]), p["coincidence_count"],
                          float(true_rate), p["coincidence_stderr_hz"]))
        acc_count = p["accidental_rate_hz"] * duration_s
        rows_acc.append((float(p["value"]), int(round(acc_count)),
                         float(p["accidental_rate_hz"]),
                         float(np.sqrt(max(acc_count, 1.0)) / duration_s)))
    report.results = {"variable": variable, "points": points}
    # log-log slopes of the extracted curves
    x = np.log(np.asarray([r[0] for r in rows_true], dtype=float))
    report.results["true_slope"] = float(
        np.polyfit(x, np.log([max(r[2], 1e-300) for r in rows_true]), 1)[0])
    report.results["accidental_slope"] = float(
        np.polyfit(x, np.log([max(r[2], 1e-300) for r in rows_acc]), 1)[0])
    if out_dir:
        _write_csv(os.path.join(out_dir, "sweep_true.csv"),
                   ("x", "count", "rate_hz", "stderr"), rows_true)
        _write_csv(os.path.join(out_dir, "sweep_accidental.csv"),
                   ("x", "count", "rate_hz", "stderr"), rows_acc)
    return report


def simulate_gate_delay_curve(gate_cfg, jitter_fwhm_ps, delays, n_pairs, seed):
    """Monte Carlo coincidence counts of correlated pairs vs relative gate delay.

    Signal arrivals are uniform in time; the idler is offset by the Gaussian
    pair jitter and its gate is shifted by the trial delay.
    """
    rng = np.random.default_rng(seed)
    span = 10_000 * gate_cfg.period_ps
    t_sig = rng.uniform(0.0, span, n_pairs)
    t_idl = t_sig + rng.normal(0.0, jitter_fwhm_ps / 2.3548200450309493, n_pairs)
    accept_sig = gate_acceptance(gate_cfg, np.rint(t_sig))
    counts = np.empty(len(delays), dtype=np.int64)
    for k, d in enumerate(delays):
        shifted = replace(gate_cfg, gate_phase_ps=gate_cfg.gate_phase_ps + d)
        counts[k] = int(np.sum(accept_sig & gate_acceptance(shifted, np.rint(t_idl))))
    return counts


def _run_gate_delay_scan(cfg, seed, out_dir):
    run_cfg = cfg["run"]
    delays = np.arange(run_cfg["delay_min_ps"],
                       run_cfg["delay_max_ps"] + run_cfg["delay_step_ps"] / 2,
                       run_cfg["delay_step_ps"])
    n_pairs = int(run_cfg.get("pairs", 200_000))
    jitter = build_source(cfg).pair_jitter_fwhm_ps

    report = RunReport(kind="gate-delay-scan", seed=seed, config=cfg)
    ss = as_seed_sequence(seed)
    fits = {}
    for preset_name, child in zip(("paper-square-628", "paper-sine-628"),
                                  ss.spawn(2)):
        gate_cfg = build_gate(resolve_preset(preset_name), "signal")
        counts = simulate_gate_delay_curve(gate_cfg, jitter, delays, n_pairs, child)
        width = fit_gate_widths(delays, counts, jitter,
                                width_guess=gate_cfg.effective_gate_width_ps)
        fits[preset_name] = {
            "configured_width_ps": gate_cfg.effective_gate_width_ps,
            "fitted_width_ps": float(width),
        }
        if out_dir:
            name = "delay_scan_square.csv" if "square" in preset_name \
                else "delay_scan_sine.csv"
            total_time_s = n_pairs / pair_rate(build_source(cfg))
            _write_csv(os.path.join(out_dir, name),
                       ("x", "count", "rate_hz", "stderr"),
                       [(float(d), int(c), c / total_time_s,
                         float(np.sqrt(c)) / total_time_s)
                        for d, c in zip(delays, counts)])
    report.results = {"fits": fits}
    return report


def _run_franson(cfg, seed, out_dir):
    run_cfg = cfg["run"]
    gates = int(run_cfg.get("gates_per_point", 10_000_000))
    n_phase = int(run_cfg.get("phase_points", 17))
    alpha_grid = list(run_cfg.get("alpha_grid", [0.031]))
    phases = np.linspace(0.0, 2.0 * np.pi, n_phase)

    report = RunReport(kind="franson", seed=seed, config=cfg)
    ss = as_seed_sequence(seed)
    children = ss.spawn(len(alpha_grid))
    entries = []
    for alpha, child in zip(alpha_grid, children):
        fr_cfg = build_franson(cfg, alpha=alpha)
        counts = mc_franson(fr_cfg, gates, phases, child)
        vis = visibility_from_fringe(phases, counts)
        predicted = visibility_model(alpha, fr_cfg.dispersion_penalty,
                                     fr_cfg.accidental_floor)
        entries.append({
            "alpha": alpha,
            "visibility": vis.visibility,
            "sigma_visibility": vis.sigma_visibility,
            "c_max": vis.c_max,
            "c_min": vis.c_min,
            "predicted_visibility": predicted,
        })
        if out_dir:
            _write_csv(os.path.join(out_dir, f"fringe_alpha_{alpha:g}.csv"),
                       ("phase_rad", "counts", "stderr"),
                       [(float(p), int(c), float(np.sqrt(max(c, 1))))
                        for p, c in zip(phases, counts)])
    report.results = {"gates_per_point": gates, "visibilities": entries}
    if out_dir:
        _write_json(os.path.join(out_dir, "visibility.json"), {
            "schema_version": SCHEMA_VERSION,
            "gates_per_point": gates,
            "entries": entries,
            "config": {k: v for k, v in cfg.get("franson", {}).items()},
        })
    return report


_RUNNERS = {
    "keygen": _run_keygen,
    "pump-sweep": _run_pump_sweep,
    "gate-delay-scan": _run_gate_delay_scan,
    "franson": _run_franson,
}


def run(cfg: dict, out_dir=None, seed=None, workers: int = 1) -> RunReport:
    """Execute the experiment described by a config dict.

    Writes output files under out_dir (created if needed) and returns the
    RunReport.  `seed` overrides [run] seed.
    """
    run_cfg = cfg.get("run")
    if not run_cfg or "kind" not in run_cfg:
        raise InvalidParameterError("config needs [run] kind")
    kind = run_cfg["kind"]
    if kind not in _RUNNERS:
        raise InvalidParameterError(
            f"unknown run kind {kind!r}; known: {', '.join(sorted(_RUNNERS))}")
    if seed is None:
        seed = int(run_cfg.get("seed", 0))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_manifest(out_dir, cfg, seed, kind)

    t0 = time.perf_counter()
    if kind == "pump-sweep":
        report = _RUNNERS[kind](cfg, seed, out_dir, workers=workers)
    else:
        report = _RUNNERS[kind](cfg, seed, out_dir)
    report.wall_time_s = time.perf_counter() - t0
    if out_dir:
        _write_json(os.path.join(out_dir, "report.json"), report.to_json_dict())
    return report
