import filecmp
import json
import os

import numpy as np
import pytest

from hdqkd import cli
from hdqkd.config import (build_detector, build_gate, build_source,
                          load_config, set_config_value)
from hdqkd.errors import InvalidParameterError
from hdqkd.experiment import budget_breakdown, run
from hdqkd.presets import deep_merge, preset_names, resolve_preset


def _fast_keygen_cfg():
    cfg = resolve_preset("paper-sine-628")
    cfg["run"]["duration_s"] = 2e-4
    return cfg


def test_budget_breakdown_matches_paper_numbers():
    table = budget_breakdown(resolve_preset("paper-sine-628"))
    assert table["signal"]["total_efficiency"] == pytest.approx(0.112, abs=0.01)
    assert table["idler"]["total_efficiency"] == pytest.approx(0.096, abs=0.01)
    assert len(table["signal"]["items"]) >= 5


def test_preset_extends_chain():
    cfg = resolve_preset("fig2-delay-scan")
    # inherits the square-gate override and the base source numbers
    assert cfg["gate_signal"]["waveform"] == "square"
    assert cfg["source"]["pump_power_mw"] > 0
    assert cfg["run"]["kind"] == "gate-delay-scan"
    assert "fig5-visibility" in preset_names()
    with pytest.raises(InvalidParameterError):
        resolve_preset("no-such-preset")


def test_deep_merge_does_not_mutate_base():
    base = {"a": {"x": 1, "y": 2}}
    merged = deep_merge(base, {"a": {"y": 3}, "b": {"z": 4}})
    assert merged == {"a": {"x": 1, "y": 3}, "b": {"z": 4}}
    assert base == {"a": {"x": 1, "y": 2}}


def test_ini_loading_with_extends(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[meta]\nextends = paper-sine-628\n"
        "[run]\nduration_s = 1e-4\nseed = 7\n"
        "[source]\npump_power_mw = 5.0\n")
    cfg = load_config(path)
    assert cfg["run"]["duration_s"] == 1e-4
    assert cfg["source"]["pump_power_mw"] == 5.0
    # untouched keys survive from the preset
    assert cfg["gate_signal"]["waveform"] == "sine"
    build_source(cfg)
    build_gate(cfg, "signal")
    build_detector(cfg, "idler")


def test_set_config_value_paths():
    cfg = resolve_preset("paper-sine-628")
    set_config_value(cfg, "source.pump_power_mw", 12.5)
    assert cfg["source"]["pump_power_mw"] == 12.5
    with pytest.raises(InvalidParameterError):
        set_config_value(cfg, "nosuchsection.key", 1)
    with pytest.raises(InvalidParameterError):
        set_config_value(cfg, "nodot", 1)


def test_run_rejects_unknown_kind():
    cfg = resolve_preset("paper-sine-628")
    cfg["run"]["kind"] = "bogus"
    with pytest.raises(InvalidParameterError, match="bogus"):
        run(cfg)
    with pytest.raises(InvalidParameterError):
        run({"source": {}})


def test_keygen_outputs_and_report(tmp_path):
    out = tmp_path / "r1"
    report = run(_fast_keygen_cfg(), out_dir=str(out), seed=123)
    for name in ("report.json", "manifest.json", "signal.htag", "idler.htag",
                 "key.bits", "key.json", "delay_scan.csv"):
        assert (out / name).exists(), name
    # count monotonicity through the processing chain
    rates = report.rates
    assert rates["coincidence_rate_hz"] <= min(rates["singles_signal_hz"],
                                               rates["singles_idler_hz"])
    assert rates["raw_key_rate_bps"] > 0
    payload = json.loads((out / "report.json").read_text())
    assert "wall_time_s" not in json.dumps(payload)
    assert payload["seed"] == 123


def test_run_determinism_byte_identical(tmp_path):
    cfg = _fast_keygen_cfg()
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run(cfg, out_dir=str(out_a), seed=42)
    run(cfg, out_dir=str(out_b), seed=42)
    names = sorted(os.listdir(out_a))
    assert names == sorted(os.listdir(out_b))
    match, mismatch, errors = filecmp.cmpfiles(out_a, out_b, names, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_changes_results(tmp_path):
    cfg = _fast_keygen_cfg()
    r1 = run(cfg, seed=1)
    r2 = run(cfg, seed=2)
    assert r1.rates["singles_signal_hz"] != r2.rates["singles_signal_hz"]


def test_pump_sweep_parallel_matches_serial(tmp_path):
    cfg = resolve_preset("fig4-sine-628")
    cfg["run"]["duration_s"] = 2e-4
    cfg["sweep"]["values"] = [10.0, 35.0]
    serial = run(cfg, out_dir=str(tmp_path / "s"), seed=5, workers=1)
    parallel = run(cfg, out_dir=str(tmp_path / "p"), seed=5, workers=2)
    assert serial.results == parallel.results
    assert filecmp.cmp(tmp_path / "s" / "sweep_true.csv",
                       tmp_path / "p" / "sweep_true.csv", shallow=False)


def test_cli_presets_and_budget(capsys):
    assert cli.main(["presets", "list"]) == 0
    listed = capsys.readouterr().out.split()
    assert set(listed) == set(preset_names())
    assert cli.main(["budget", "--preset", "paper-sine-628"]) == 0
    out = capsys.readouterr().out
    assert "total efficiency" in out


def test_cli_run_and_env_output_root(tmp_path, monkeypatch, capsys):
    ini = tmp_path / "quick.ini"
    ini.write_text("[meta]\nextends = paper-sine-628\nname = quick\n"
                   "[run]\nduration_s = 1e-4\n")
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    monkeypatch.chdir(tmp_path)
    assert cli.main(["run", "--config", str(ini), "--seed", "3"]) == 0
    out_dir = tmp_path / "root" / "quick"
    assert (out_dir / "report.json").exists()
    report = json.loads((out_dir / "report.json").read_text())
    assert report["kind"] == "keygen"


def test_cli_errors_return_nonzero(capsys):
    assert cli.main(["run"]) == 1
    assert "error:" in capsys.readouterr().err
    assert cli.main(["run", "--config", "/nonexistent/file.ini"]) == 1
    assert cli.main(["run", "--preset", "not-a-preset"]) == 1


def test_franson_run_report(tmp_path):
    cfg = resolve_preset("fig5-visibility")
    cfg["run"]["gates_per_point"] = 200_000
    cfg["run"]["alpha_grid"] = [0.0024, 0.031]
    report = run(cfg, out_dir=str(tmp_path), seed=8)
    vis = {pt["alpha"]: pt["visibility"]
           for pt in report.results["visibilities"]}
    assert vis[0.031] < vis[0.0024]
    assert (tmp_path / "visibility.json").exists()
