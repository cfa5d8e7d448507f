"""Closed-form detection and association performance.

Covers the coupled-target SINR, the Marcum-Q detection probability, the
Hadamard code-detection bound, the association probability, and the two
semi-analytic studies built on them: ROC curves and RIS sizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .channels import composite_gains, scattering_amplitudes, range_cell_mask, steering_beam
from .ris import RisMode, RisProfile, backreflect_phases, ris_reflectivity, ris_side_length
from .scenario import Scenario, ScenarioConfig, build_scenario, linear_to_db

P_FA_CLAMP = (1e-6, 1.0 - 1e-6)


@dataclass(frozen=True)
class SnrReport:
    target_index: int
    hypothesis: str  # "vue" (target is a VUE) or "clutter"
    signal_power: float
    interference_power_vues: float
    interference_power_clutter: float
    effective_noise: float

    @property
    def snr(self) -> float:
        den = self.interference_power_vues + self.interference_power_clutter + self.effective_noise
        return self.signal_power / den

    @property
    def snr_db(self) -> float:
        return float(linear_to_db(self.snr)) if self.snr > 0 else -math.inf


@dataclass(frozen=True)
class DetectionCurve:
    p_fa: np.ndarray
    p_cd: np.ndarray
    beta_c_db: float
    rho: float
    cell_radius_m: float
    drops: int
    p_cd_half_width: np.ndarray | None = None  # 95% normal half-width of the mean over drops


def snr(scenario: Scenario, gains, q: int, range_gate: bool = True) -> SnrReport:
    """SINR at the decision variable of beam ``q``.

    The beam observes ``gains.beam_targets[q]`` (beam q -> VUE q by default).
    Interference counts every other target in the same range cell; the
    matched-filter and averaging gain P*TB divides only the noise.
    """
    radio = scenario.radio
    k = len(scenario.vues)
    t = int(gains.beam_targets[q]) if gains.beam_targets is not None else q
    row = np.abs(gains.gains[q]) ** 2 * gains.per_stream_power_w
    ranges = scenario.stacked("range_m")
    cell = range_cell_mask(ranges, ranges[t], radio) if range_gate else np.ones(len(ranges), bool)
    cell[t] = False
    cell_v, cell_c = cell[:k], cell[k:]
    return SnrReport(
        target_index=t,
        hypothesis="vue" if t < k else "clutter",
        signal_power=float(row[t]),
        interference_power_vues=float(np.sum(row[:k][cell_v])),
        interference_power_clutter=float(np.sum(row[k:][cell_c])),
        effective_noise=radio.noise_power_w / radio.processing_gain,
    )


def _marcum_q1_scalar(a: float, b: float) -> float:
    if a < 0 or b < 0:
        raise ValueError("Marcum-Q arguments must be non-negative")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    # Bounds: 1 - Q1 <= exp(-(a-b)^2/2) for a > b, Q1 <= exp(-(b-a)^2/2) for b > a.
    d = a - b
    if d > 0 and 0.5 * d * d > 45.0:
        return 1.0
    if d < 0 and 0.5 * d * d > 45.0:
        return 0.0
    # Poisson mixture of the non-central chi^2(2) tail:
    #   Q1(a, b) = sum_k Pois(k; a^2/2) * Gamma_upper(k + 1, b^2/2)
    lam = 0.5 * a * a
    x = 0.5 * b * b
    # truncation: Poisson mass outside mean +- (12 sqrt(lam) + 20) is far below 1e-12
    half = 12.0 * math.sqrt(lam) + 20.0
    k = np.arange(max(0, int(lam - half)), int(lam + half) + 1, dtype=float)
    w = np.exp(k * math.log(lam) - lam - special.gammaln(k + 1.0))
    if a < b:
        return float(np.sum(w * special.gammaincc(k + 1.0, x)))
    return float(1.0 - np.sum(w * special.gammainc(k + 1.0, x)))


def marcum_q1(a, b):
    """First-order Marcum Q function Q1(a, b), elementwise over broadcast inputs."""
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return _marcum_q1_scalar(float(a), float(b))
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.empty(a.shape)
    for idx in np.ndindex(a.shape):
        out[idx] = _marcum_q1_scalar(a[idx], b[idx])
    return out


def pcd(gamma_q, p_fa):
    """Detection probability of a coherent target at SNR ``gamma_q`` with optimal thresholding."""
    gamma_q = np.asarray(gamma_q, float)
    p_fa = np.asarray(p_fa, float)
    if np.any(gamma_q < 0) or np.any((p_fa <= 0) | (p_fa >= 1)):
        raise ValueError("need gamma >= 0 and 0 < p_fa < 1")
    return marcum_q1(np.sqrt(2.0 * gamma_q), np.sqrt(-2.0 * np.log(p_fa)))


def bit_error_prob(gamma_q):
    return 0.5 * special.erfc(np.sqrt(np.asarray(gamma_q, float) / 2.0))


def error_correction_capability(c: int) -> int:
    return int(math.floor(c / 2 - 1))


def binomial_cdf(c: int, upto: int, p: float) -> float:
    """P(Bin(c, p) <= upto), summed term by term with log-domain coefficients."""
    if p <= 0.0:
        return 1.0 if upto >= 0 else 0.0
    if p >= 1.0:
        return 1.0 if upto >= c else 0.0
    lp, lq = math.log(p), math.log1p(-p)
    total = 0.0
    for i in range(0, upto + 1):
        log_term = (math.lgamma(c + 1) - math.lgamma(i + 1) - math.lgamma(c - i + 1)
                    + i * lp + (c - i) * lq)
        total += math.exp(log_term)
    return min(total, 1.0)


def code_detection_prob(gamma_q, c: int):
    """Probability of decoding the ID code: at most floor(C/2 - 1) of C bits in error."""
    if c < 1 or c & (c - 1):
        raise ValueError(f"code length must be a power of two, got {c}")
    upto = error_correction_capability(c)
    p = bit_error_prob(gamma_q)
    if np.ndim(p) == 0:
        return binomial_cdf(c, upto, float(p))
    return np.vectorize(lambda pp: binomial_cdf(c, upto, pp))(p)


def pca(gamma_q, p_fa, c: int):
    """Probability of correct target-to-user association (code detection times PCD)."""
    return code_detection_prob(gamma_q, c) * pcd(gamma_q, p_fa)


def clamp_p_fa(grid) -> np.ndarray:
    return np.clip(np.asarray(grid, float), *P_FA_CLAMP)


def _cell_subset(scenario: Scenario, amplitudes: np.ndarray, probe: int):
    """Restrict a scenario to the probe VUE's range cell (other cells cannot couple)."""
    k = len(scenario.vues)
    ranges = scenario.stacked("range_m")
    keep = range_cell_mask(ranges, ranges[probe], scenario.radio)
    keep[:k] = True  # VUEs stay so beam/stream bookkeeping is unchanged
    keep_c = keep[k:]
    cl = scenario.clutter
    clutter = type(cl)(cl.kind, cl.range_m[keep_c], cl.azimuth_rad[keep_c],
                       cl.radial_velocity_mps[keep_c], cl.reflectivity_m2[keep_c])
    return replace(scenario, clutter=clutter), amplitudes[keep]


def probe_snr_report(scenario: Scenario, rng, probe: int = 0) -> SnrReport:
    """SINR report for VUE ``probe`` with every RIS back-reflecting and one beam per VUE."""
    amplitudes = scattering_amplitudes(scenario, rng)
    sub, amp = _cell_subset(scenario, amplitudes, probe)
    vues = sub.vues
    in_cell = range_cell_mask(vues.range_m, vues.range_m[probe], sub.radio)
    # VUEs outside the probe's range cell cannot couple; skip their element-level profiles
    idle = RisProfile(sub.ris_elements, RisMode.OFF, np.zeros(sub.ris_elements))
    profiles = [backreflect_phases(sub.ris_elements, vues.ris_theta_rad[i], vues.ris_psi_rad[i])
                if in_cell[i] else idle for i in range(len(vues))]
    f = steering_beam(sub.bs_elements, vues.azimuth_rad).T  # (N, K)
    gains = composite_gains(sub, profiles, f, f, amplitudes=amp)
    return snr(sub, gains, probe)


def collect_probe_reports(template: ScenarioConfig, drops: int, seed: int) -> list[SnrReport]:
    # drop d draws its geometry from [seed, d, 0] and its amplitudes from [seed, d, 1]
    reports = []
    for d in range(drops):
        scenario = build_scenario(template, [int(seed), d, 0])
        rng = np.random.default_rng([int(seed), d, 1])
        reports.append(probe_snr_report(scenario, rng))
    return reports


def roc_curve(template: ScenarioConfig, beta_c_db: float, rho: float, p_fa_grid,
              drops: int = 500, seed: int = 0) -> DetectionCurve:
    """Mean P_cd over clutter drops for each P_fa, probe VUE at the cell edge.

    Clutter reflectivity is ``beta_c_db`` relative to the RIS reflectivity. Drops
    depend only on (seed, drop index), so curves for different ``beta_c_db`` share
    clutter realizations.
    """
    radio = template.radio
    gamma_k_db = float(linear_to_db(ris_reflectivity(template.ris_elements, radio.carrier_frequency_hz)))
    cfg = replace(template, clutter_density_per_m2=rho, vue_placement="probe-edge",
                  clutter_mean_reflectivity_dbm2=gamma_k_db + beta_c_db)
    grid = clamp_p_fa(p_fa_grid)
    gammas = np.array([r.snr for r in collect_probe_reports(cfg, drops, seed)])
    per_drop = np.array([pcd(gammas, pf) for pf in grid]).reshape(len(grid), -1)
    p_cd = per_drop.mean(axis=1)
    half = 1.959963984540054 * per_drop.std(axis=1, ddof=1) / math.sqrt(drops) if drops > 1 \
        else np.full(len(grid), np.nan)
    return DetectionCurve(grid, p_cd, beta_c_db, rho, radio.cell_radius_m, drops, half)


@dataclass(frozen=True)
class RisSizing:
    side_elements: int
    ris_elements: int
    side_length_m: float
    achieved_pcd: float
    saturated: bool


def ris_size_for_target(rho: float, clutter_refl_dbm2: float, p_cd_target: float, p_fa_target: float,
                        template: ScenarioConfig | None = None, drops: int = 2000, seed: int = 0,
                        max_side: int = 400, reports: list[SnrReport] | None = None) -> RisSizing:
    """Smallest square RIS whose mean cell-edge P_cd meets ``p_cd_target``.

    Per-drop SINR components are computed once at the template RIS size; signal and
    VUE-interference powers scale as Gamma_k(M) ~ M^2 while clutter and noise stay
    fixed, so the mean P_cd is monotone in the side and integer bisection applies.
    ``reports`` (from :func:`sizing_reports`) skips the drop simulation.
    """
    if not 0.0 < p_cd_target < 1.0:
        raise ValueError("p_cd_target must lie in (0, 1)")
    template = template or ScenarioConfig()
    f0 = template.radio.carrier_frequency_hz
    if reports is None:
        reports = sizing_reports(template, rho, clutter_refl_dbm2, drops, seed)
    sig = np.array([r.signal_power for r in reports])
    ivue = np.array([r.interference_power_vues for r in reports])
    rest = np.array([r.interference_power_clutter + r.effective_noise for r in reports])
    m_ref = template.ris_elements

    def mean_pcd(side: int) -> float:
        scale = (side * side / m_ref) ** 2
        gamma = sig * scale / (ivue * scale + rest)
        return float(np.mean(pcd(gamma, p_fa_target)))

    top = mean_pcd(max_side)
    if top < p_cd_target:
        m = max_side * max_side
        return RisSizing(max_side, m, ris_side_length(m, f0), top, True)
    lo, hi = 0, max_side  # invariant: mean_pcd(hi) >= target, lo fails (or is 0)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mean_pcd(mid) >= p_cd_target:
            hi = mid
        else:
            lo = mid
    m = hi * hi
    return RisSizing(hi, m, ris_side_length(m, f0), mean_pcd(hi), False)


def sizing_reports(template: ScenarioConfig, rho: float, clutter_refl_dbm2: float, drops: int,
                   seed: int) -> list[SnrReport]:
    """Cell-edge probe reports at the template RIS size, reusable across sizing targets."""
    cfg = replace(template, clutter_density_per_m2=rho, vue_placement="probe-edge",
                  clutter_mean_reflectivity_dbm2=clutter_refl_dbm2)
    return collect_probe_reports(cfg, drops, seed)
