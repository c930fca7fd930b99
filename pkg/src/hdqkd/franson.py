"""Franson interference: fringes, visibility, multi-pair and dispersion penalties.

The post-selected central-peak coincidence probability for a single pair
follows (1 + V cos(phi))/4 with phi the summed interferometer phases.
Pairs generated independently within one gate produce phase-independent
cross coincidences; their acceptance relative to the single-pair peak is
calibrated so that the fitted visibility follows 1 - alpha, the measured
multi-pair degradation law.  Dispersion enters as a scalar fringe-contrast
penalty and uncorrelated accidentals as a phase-flat floor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, InvalidParameterError

C_MM_PER_PS = 0.299792458  # vacuum light speed

# Cross-pair (per ordered pair of distinct SPDC pairs in a gate) acceptance
# relative to the single-pair acceptance.  1/4 equals the phase average of
# (1 + cos phi)/4 and reproduces the V = 1 - alpha degradation law.
CROSS_PAIR_FACTOR = 0.25


@dataclass(frozen=True)
class FransonConfig:
    path_mismatch_ps: float
    alpha: float                      # mean pairs per gate
    mismatch_difference_ps: float = 0.0
    phase_a: float = 0.0
    phase_b: float = 0.0
    accidental_floor: float = 0.0     # fraction of total coincidences
    dispersion_penalty: float = 0.0
    coherence_time_ps: float = 2.0
    splitter_ratio: float = 0.5
    same_pair_acceptance: float = 1.0
    cross_pair_factor: float = CROSS_PAIR_FACTOR

    def __post_init__(self):
        if self.path_mismatch_ps <= 0:
            raise InvalidParameterError("path mismatch must be > 0")
        if not (0.0 <= self.alpha < 0.5):
            raise InvalidParameterError("alpha must be in [0, 0.5)")
        if not (0.0 <= self.accidental_floor < 1.0):
            raise InvalidParameterError("accidental floor must be in [0, 1)")
        if self.splitter_ratio != 0.5:
            raise InvalidParameterError("only 50:50 splitters are modelled")
        if self.mismatch_difference_ps > 0.2 * self.coherence_time_ps:
            warnings.warn("path-mismatch difference exceeds 20% of the "
                          "two-photon coherence time; fringe contrast is "
                          "not trustworthy", stacklevel=2)


@dataclass(frozen=True)
class DispersionParams:
    dispersion_ps_nm_km: float
    bandwidth_nm: float
    path_mismatch_ps: float
    group_index: float = 1.468

    def __post_init__(self):
        for name in ("dispersion_ps_nm_km", "path_mismatch_ps", "group_index"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"DispersionParams.{name} must be > 0")
        if self.bandwidth_nm < 0:
            raise InvalidParameterError("DispersionParams.bandwidth_nm must be >= 0")


@dataclass
class VisibilityResult:
    c_max: float
    c_min: float
    visibility: float
    sigma_visibility: float

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0 + 1e-9):
            raise InvalidParameterError("visibility must lie in [0, 1]")


def visibility_model(alpha: float, dispersion_penalty: float = 0.0,
                     accidental_floor: float = 0.0) -> float:
    """Predicted fringe visibility under three independent degradations.

    Composition is multiplicative: V = (1-alpha)(1-eps)(1-floor).
    """
    for v in (alpha, dispersion_penalty, accidental_floor):
        if not (0.0 <= v < 1.0):
            raise InvalidParameterError("penalties must be in [0, 1)")
    return (1.0 - alpha) * (1.0 - dispersion_penalty) * (1.0 - accidental_floor)


def fringe_probability(phi, config: FransonConfig):
    """Relative central-peak coincidence probability at total phase phi."""
    v = visibility_model(config.alpha, config.dispersion_penalty,
                         config.accidental_floor)
    return (1.0 + v * np.cos(np.asarray(phi, dtype=np.float64))) / 4.0


def dispersion_spread(params: DispersionParams, coherence_time_ps: float = 2.0):
    """Chromatic temporal spread over the long path and visibility penalty.

    Returns (spread in ps, penalty = spread / coherence time).
    """
    length_km = params.path_mismatch_ps * C_MM_PER_PS / params.group_index * 1e-6
    spread = params.dispersion_ps_nm_km * params.bandwidth_nm * length_km
    return spread, spread / coherence_time_ps


def _truncated_poisson_ge2(rng, alpha: float, size: int) -> np.ndarray:
    """Draw pair numbers k >= 2 from a Poisson(alpha) conditioned on k >= 2."""
    if size == 0:
        return np.empty(0, dtype=np.int64)
    from scipy.special import gammaln

    kmax = 20
    k = np.arange(2, kmax + 1, dtype=np.float64)
    logp = k * math.log(alpha) - alpha - gammaln(k + 1)
    p = np.exp(logp)
    p /= p.sum()
    return rng.choice(np.arange(2, kmax + 1), size=size, p=p)


def mc_franson(config: FransonConfig, gates: int, phases, seed) -> np.ndarray:
    """Monte Carlo fringe counts at each phase of a scan.

    Per gate the pair number is Poisson(alpha).  Each pair contributes a
    post-selected same-pair coincidence with probability
    a1*(1 + (1-eps) cos phi)/4; each ordered pair of distinct SPDC pairs
    contributes a phase-flat cross coincidence with probability
    a1*cross_pair_factor.  The accidental floor adds phase-flat counts at
    the configured fraction of the total.  Counts are sampled in aggregate
    (exactly equivalent in distribution to per-gate simulation) so large
    gate numbers stay cheap.  Deterministic per seed.
    """
    phases = np.asarray(phases, dtype=np.float64)
    rng = np.random.default_rng(seed)
    a1 = config.same_pair_acceptance
    alpha = config.alpha
    eps = config.dispersion_penalty
    floor = config.accidental_floor
    counts = np.zeros(phases.size, dtype=np.int64)
    if alpha == 0.0:
        return counts

    # phase-flat floor rate chosen so the floor fraction of total mean
    # counts equals the configured value
    mean_phys_per_gate = alpha * a1 / 4.0 + alpha ** 2 * a1 * config.cross_pair_factor
    floor_rate = floor / (1.0 - floor) * mean_phys_per_gate

    p_ge2 = 1.0 - math.exp(-alpha) * (1.0 + alpha)
    for i, phi in enumerate(phases):
        n_pairs = rng.poisson(gates * alpha)
        p_same = a1 * (1.0 + (1.0 - eps) * math.cos(phi)) / 4.0
        same = rng.binomial(n_pairs, p_same) if n_pairs else 0
        n_multi = rng.binomial(gates, p_ge2)
        k = _truncated_poisson_ge2(rng, alpha, int(n_multi))
        ordered_pairs = int(np.sum(k * (k - 1)))
        cross = rng.binomial(ordered_pairs, a1 * config.cross_pair_factor) \
            if ordered_pairs else 0
        acc = rng.poisson(gates * floor_rate) if floor_rate > 0 else 0
        counts[i] = same + cross + acc
    return counts


def visibility_from_fringe(phases, counts) -> VisibilityResult:
    """Sinusoid fit of fringe counts; Poisson-weighted least squares.

    Fits C0 + A cos(phi) + B sin(phi); V = sqrt(A^2+B^2)/C0.  The parameter
    covariance is scaled by the reduced chi-square, so an exact sinusoid
    yields sigma_V = 0.
    """
    phases = np.asarray(phases, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if phases.size < 8 or (phases.max() - phases.min()) < 2.0 * math.pi - 1e-9:
        raise CoverageError("need >= 8 phase points spanning >= 2 pi")

    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    sigma2 = np.maximum(counts, 1.0)          # Poisson variances
    w = 1.0 / sigma2
    a = design * w[:, None]
    normal = design.T @ a
    beta = np.linalg.solve(normal, a.T @ counts)
    resid = counts - design @ beta
    dof = max(phases.size - 3, 1)
    chi2_red = float(np.sum(resid ** 2 * w) / dof)
    cov = np.linalg.inv(normal) * chi2_red

    c0, ac, bs = beta
    amp = math.hypot(ac, bs)
    v = amp / c0 if c0 > 0 else 0.0
    v = min(max(v, 0.0), 1.0)
    # propagate: V = sqrt(A^2+B^2)/C0
    if amp > 0 and c0 > 0:
        grad = np.array([-amp / c0 ** 2, ac / (amp * c0), bs / (amp * c0)])
        sigma_v = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    else:
        sigma_v = float(math.sqrt(max(cov[0, 0], 0.0))) / max(c0, 1.0)
    return VisibilityResult(c_max=c0 + amp, c_min=c0 - amp,
                            visibility=v, sigma_visibility=sigma_v)
