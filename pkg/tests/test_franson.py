import math

import numpy as np
import pytest

from hdqkd.errors import CoverageError, InvalidParameterError
from hdqkd.franson import (DispersionParams, FransonConfig, dispersion_spread,
                           fringe_probability, mc_franson, visibility_model,
                           visibility_from_fringe)


def _cfg(**kw):
    base = dict(path_mismatch_ps=3200.0, alpha=0.01)
    base.update(kw)
    return FransonConfig(**base)


def test_fringe_probability_extremes():
    cfg = _cfg(alpha=1e-9)
    assert fringe_probability(0.0, cfg) == pytest.approx(0.5, abs=1e-6)
    assert fringe_probability(math.pi, cfg) == pytest.approx(0.0, abs=1e-6)


def test_visibility_model_examples():
    assert visibility_model(0.0) == 1.0
    assert visibility_model(0.031) == pytest.approx(0.969)
    assert visibility_model(0.0024, 0.01, 0.002) == pytest.approx(0.98562, abs=1e-4)


def test_visibility_model_monotone_in_each_penalty():
    base = visibility_model(0.01, 0.01, 0.002)
    assert visibility_model(0.02, 0.01, 0.002) < base
    assert visibility_model(0.01, 0.02, 0.002) < base
    assert visibility_model(0.01, 0.01, 0.004) < base
    with pytest.raises(InvalidParameterError):
        visibility_model(-0.1)


def test_dispersion_spread_example():
    params = DispersionParams(dispersion_ps_nm_km=17.0, bandwidth_nm=1.6,
                              path_mismatch_ps=4800.0, group_index=1.468)
    spread, penalty = dispersion_spread(params)
    assert spread == pytest.approx(0.0266, rel=0.1)
    assert penalty == pytest.approx(0.0133, rel=0.1)


def test_dispersion_spread_vanishes_with_bandwidth():
    params = DispersionParams(17.0, 0.0, 4800.0)
    spread, penalty = dispersion_spread(params)
    assert spread == 0.0 and penalty == 0.0
    with pytest.raises(InvalidParameterError):
        DispersionParams(0.0, 1.6, 4800.0)


def test_mismatch_difference_warning():
    with pytest.warns(UserWarning):
        _cfg(mismatch_difference_ps=1.0, coherence_time_ps=2.0)


def test_mc_visibility_tracks_multipair_law():
    phases = np.linspace(0, 2 * math.pi, 17)
    for alpha, expect in [(0.0024, 0.9976), (0.031, 0.969)]:
        cfg = _cfg(alpha=alpha)
        counts = mc_franson(cfg, gates=2 * 10**7, phases=phases, seed=5)
        res = visibility_from_fringe(phases, counts)
        assert res.visibility == pytest.approx(expect, abs=0.005)


def test_mc_visibility_with_all_penalties():
    phases = np.linspace(0, 2 * math.pi, 17)
    cfg = _cfg(alpha=0.031, dispersion_penalty=0.01, accidental_floor=0.002)
    counts = mc_franson(cfg, gates=10**7, phases=phases, seed=9)
    res = visibility_from_fringe(phases, counts)
    assert res.visibility == pytest.approx(
        visibility_model(0.031, 0.01, 0.002), abs=0.01)


def test_mc_cross_counts_scale_quadratically():
    # at phi = pi the same-pair term vanishes, leaving only cross
    # coincidences whose mean grows like alpha^2
    phases = np.array([0.0, math.pi, 2 * math.pi])
    lo = mc_franson(_cfg(alpha=0.01), 10**8, phases, seed=2)[1]
    hi = mc_franson(_cfg(alpha=0.02), 10**8, phases, seed=2)[1]
    assert hi / lo == pytest.approx(4.0, rel=0.1)


def test_mc_determinism_and_zero_alpha():
    phases = np.linspace(0, 2 * math.pi, 9)
    a = mc_franson(_cfg(alpha=0.02), 10**6, phases, seed=77)
    b = mc_franson(_cfg(alpha=0.02), 10**6, phases, seed=77)
    assert np.array_equal(a, b)
    assert mc_franson(_cfg(alpha=0.0), 10**6, phases, seed=1).sum() == 0


def test_fit_exact_sinusoid():
    phases = np.linspace(0, 2 * math.pi, 16)
    counts = 1000 * (1 + 0.5 * np.cos(phases))
    res = visibility_from_fringe(phases, counts)
    assert res.visibility == pytest.approx(0.5, abs=1e-9)
    assert res.sigma_visibility == pytest.approx(0.0, abs=1e-9)
    assert res.c_max == pytest.approx(1500.0)
    assert res.c_min == pytest.approx(500.0)


def test_fit_constant_counts_gives_zero_visibility():
    phases = np.linspace(0, 2 * math.pi, 12)
    res = visibility_from_fringe(phases, np.full(12, 800.0))
    assert res.visibility == pytest.approx(0.0, abs=1e-9)


def test_fit_phase_offset_invariance():
    phases = np.linspace(0, 2 * math.pi, 20)
    counts = 500 * (1 + 0.8 * np.cos(phases + 1.3))
    res = visibility_from_fringe(phases, counts)
    assert res.visibility == pytest.approx(0.8, abs=1e-9)


def test_fit_coverage_requirements():
    with pytest.raises(CoverageError):
        visibility_from_fringe(np.linspace(0, math.pi, 16), np.ones(16))
    with pytest.raises(CoverageError):
        visibility_from_fringe(np.linspace(0, 2 * math.pi, 5), np.ones(5))


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        _cfg(alpha=0.6)
    with pytest.raises(InvalidParameterError):
        _cfg(path_mismatch_ps=-1.0)
    with pytest.raises(InvalidParameterError):
        _cfg(splitter_ratio=0.6)
    with pytest.raises(InvalidParameterError):
        _cfg(accidental_floor=1.5)
