import numpy as np
import pytest
from scipy import stats

from hdqkd.errors import CapacityError, InvalidParameterError
from hdqkd.source import (FWHM_TO_SIGMA, LossBudget, SourceParams,
                          alpha_per_gate, channel_efficiency,
                          generate_pair_stream, pair_rate)

SIGNAL_BUDGET = LossBudget(0.99, 0.79, 0.65, 1.56, 0.65, 0.5, 0.22)
IDLER_BUDGET = LossBudget(0.99, 0.85, 1.35, 1.56, 0.75, 0.5, 0.20)


def test_pair_rate_paper_values():
    assert pair_rate(SourceParams(1.0e7, 1.6, 35.0)) == pytest.approx(5.6e8)
    assert pair_rate(SourceParams(1.0e7, 1.6, 1.0)) == pytest.approx(1.6e7)


def test_pair_rate_rejects_nonpositive_pump():
    with pytest.raises(InvalidParameterError):
        SourceParams(1.0e7, 1.6, 0.0)


@pytest.mark.parametrize("k", [0.5, 2.0, 7.3])
def test_pair_rate_linear_in_pump(k):
    base = SourceParams(1.0e7, 1.6, 10.0)
    assert pair_rate(base.with_pump(10.0 * k)) == pytest.approx(k * pair_rate(base))


def test_channel_efficiency_paper_budgets():
    assert channel_efficiency(SIGNAL_BUDGET) == pytest.approx(0.112, abs=0.01)
    assert channel_efficiency(IDLER_BUDGET) == pytest.approx(0.096, abs=0.01)


def test_channel_efficiency_lossless_identity():
    lossless = LossBudget(1.0, 1.0, 0.0, 1.56, 0.0, 0.0, 1.0)
    assert channel_efficiency(lossless) == pytest.approx(1.0)


def test_channel_efficiency_monotone_in_losses():
    import dataclasses
    base = channel_efficiency(SIGNAL_BUDGET)
    for db_field in ("waveguide_attenuation_db_per_cm", "pbs_insertion_loss_db",
                     "coating_loss_db"):
        worse = dataclasses.replace(SIGNAL_BUDGET,
                                    **{db_field: getattr(SIGNAL_BUDGET, db_field) + 0.5})
        assert channel_efficiency(worse) < base
    for t_field in ("bpf_transmission", "fiber_coupling", "detector_efficiency"):
        better = dataclasses.replace(SIGNAL_BUDGET, **{t_field: 1.0})
        assert channel_efficiency(better) >= base


def test_alpha_per_gate():
    assert alpha_per_gate(5.6e8, 110.0) == pytest.approx(0.0616)
    assert alpha_per_gate(1e9, 0.0) == 0.0
    assert alpha_per_gate(1e9, 1000.0) == pytest.approx(1.0)
    # calibration factor scales linearly
    assert alpha_per_gate(5.6e8, 110.0, calibration=0.5) == pytest.approx(0.0308)


def test_stream_count_matches_poisson_mean():
    rate, duration = 1e6, 1.0
    stream = generate_pair_stream(rate, duration, seed=1)
    assert abs(stream.size - rate * duration) < 5 * np.sqrt(rate * duration)


def test_stream_deterministic_per_seed():
    a = generate_pair_stream(1e5, 0.01, seed=42)
    b = generate_pair_stream(1e5, 0.01, seed=42)
    c = generate_pair_stream(1e5, 0.01, seed=43)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[: c.size], c[: a.size])


def test_stream_sorted_and_chunk_boundaries_clean():
    # small chunk forces many boundaries; count and ordering must survive
    big = generate_pair_stream(1e5, 0.05, seed=7, chunk=1000)
    assert np.all(np.diff(big["emission"]) >= 0)
    assert abs(big.size - 5000) < 5 * np.sqrt(5000)


def test_interarrival_exponential_ks():
    rate = 1e5
    stream = generate_pair_stream(rate, 0.3, seed=3)
    gaps = np.diff(stream["emission"]) * 1e-12
    res = stats.kstest(gaps, "expon", args=(0, 1.0 / rate))
    assert res.pvalue > 0.01


def test_poisson_mean_variance_over_seeds():
    rate, duration = 2e5, 0.01
    counts = np.array([generate_pair_stream(rate, duration, seed=s).size
                       for s in range(120)])
    mu = rate * duration
    assert abs(counts.mean() - mu) < 5 * np.sqrt(mu / len(counts))
    # variance ~ mean for a Poisson process, 5 sigma on the variance estimate
    assert abs(counts.var(ddof=1) / mu - 1.0) < 5 * np.sqrt(2.0 / (len(counts) - 1))


def test_pair_jitter_fwhm():
    stream = generate_pair_stream(1e5, 0.1, seed=5, jitter_fwhm_ps=2.0)
    diff = stream["signal"] - stream["idler"]
    assert abs(np.mean(diff)) < 0.1
    # remove the 1-ps quantization variance (two independent roundings)
    fwhm = np.sqrt(np.var(diff) - 1.0 / 6.0) / FWHM_TO_SIGMA
    assert fwhm == pytest.approx(2.0, rel=0.10)
    # statistical bound on extreme separations
    assert np.max(np.abs(diff)) < 6 * np.std(diff)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        generate_pair_stream(1e12, 10.0, seed=0)
