"""Trial-level Monte Carlo of detection, ID decoding and target-to-user association.

Each trial freezes one scenario drop (geometry, clutter and scattering phases) for
a whole code epoch, toggles every VUE's RIS according to its codeword, and
simulates the post-matched-filter decision variable of every visible target's
range-angle cell for each bit period. Detection thresholds the decision variable
against the cell's interference-plus-noise level (ideal CFAR; the known-noise
optimal threshold when the cell holds a single target), decoding is argmax
bipolar correlation over the codebook. The same
detections feed the GPS nearest-neighbour baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .channels import (composite_gains, ris_cascade_factor, scattering_amplitudes, steering_beam,
                       steering_coupling)
from .codebook import HadamardCodebook, build_codebook, default_decoder_radius
from .errors import ConfigError
from .ris import backreflect_phases, schedule_reflection
from .scenario import SPEED_OF_LIGHT, Scenario, ScenarioConfig, build_scenario


@dataclass(frozen=True)
class Beamformers:
    """Sensing precoder F_sens (one unit-norm steering column per VUE) and combiner W = F_sens."""

    precoder: np.ndarray
    combiner: np.ndarray
    per_stream_power_w: float
    azimuths_rad: np.ndarray

    @property
    def num_streams(self) -> int:
        return self.precoder.shape[1]


def build_beamformers(scenario: Scenario, num_comm_streams: int = 0) -> Beamformers:
    n = scenario.bs_elements
    az = scenario.vues.azimuth_rad
    s = len(az)
    if s + num_comm_streams > n:
        raise ConfigError("bs_elements", f"K_com + K = {s + num_comm_streams} exceeds N = {n}")
    f = steering_beam(n, az).T
    return Beamformers(f, f.copy(), scenario.radio.tx_power_w / s, az.copy())


def detection_threshold_sq(p_fa) -> np.ndarray:
    """Threshold on |u|^2 for unit-variance complex noise.

    Equivalent to |u| * sqrt(2) > sqrt(-2 ln P_fa), the same test written for
    noise with unit variance per real component.
    """
    return -np.log(p_fa)


def detect(clean: np.ndarray, p_fa: float, rng, disturbance=None) -> tuple[np.ndarray, np.ndarray]:
    """Add CN(0, 1) noise to noiseless decision values and threshold them.

    ``disturbance`` is the per-cell interference-plus-noise power in noise units
    (1 = white noise only); the threshold scales with it as an ideal CFAR would.
    """
    noise = (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)) / math.sqrt(2.0)
    u = clean + noise
    level = 1.0 if disturbance is None else np.asarray(disturbance, float).reshape(-1, *([1] * (clean.ndim - 1)))
    return np.abs(u) ** 2 > detection_threshold_sq(p_fa) * level, u


def decision_scale(radio, per_stream_power_w: float) -> float:
    """Maps a beamspace gain to the decision variable normalised by the post-processing noise."""
    return math.sqrt(radio.processing_gain * per_stream_power_w / radio.noise_power_w)


@dataclass
class CellModel:
    """Noiseless decision values of every simulated range-angle cell over one code epoch.

    ``targets`` lists the scenario target index observed by each cell (VUE cells
    first, in VUE order); ``clean`` is (cells, C).
    """

    targets: np.ndarray
    clean: np.ndarray
    num_vues: int
    disturbance: np.ndarray


def _cell_pairs(ranges: np.ndarray, half_width: float):
    """All (cell, member) index pairs with |R_member - R_cell| < half_width, self included."""
    order = np.argsort(ranges, kind="stable")
    r_sorted = ranges[order]
    lo = np.searchsorted(r_sorted, ranges - half_width, side="right")
    hi = np.searchsorted(r_sorted, ranges + half_width, side="left")
    counts = hi - lo
    q = np.repeat(np.arange(len(ranges)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    j = order[np.repeat(lo, counts) + offsets]
    return q, j


def vue_reflection_factors(scenario: Scenario, codebook: HadamardCodebook, rng, variant: str = "random",
                           leakage_power_ratio: float = 0.0) -> np.ndarray:
    """(K, C) RIS cascade factor of each VUE in each bit period of its codeword schedule."""
    vues = scenario.vues
    timing = scenario.radio.timing(codebook.length)
    out = np.zeros((len(vues), codebook.length), dtype=complex)
    for k in range(len(vues)):
        inc = (vues.ris_theta_rad[k], vues.ris_psi_rad[k])
        schedule = schedule_reflection(codebook.codeword(int(vues.code_index[k])), timing, inc,
                                       scenario.ris_elements, variant, rng, leakage_power_ratio)
        cache = {}
        for b, prof in enumerate(schedule):
            if id(prof) not in cache:
                cache[id(prof)] = ris_cascade_factor(prof, *inc)
            out[k, b] = cache[id(prof)]
    return out


def build_cells(scenario: Scenario, beamformers: Beamformers, amplitudes: np.ndarray,
                vue_factors: np.ndarray, include_clutter: bool = True) -> CellModel:
    """Noiseless decision values for the VUE beams and (optionally) every visible clutter cell.

    A cell collects the echoes of all visible targets in its range-resolution cell,
    weighted by the two-way beam coupling; VUE echoes follow their RIS schedule,
    clutter echoes are constant over the epoch.
    """
    k = len(scenario.vues)
    n = scenario.bs_elements
    visible = scenario.visible()
    vis_idx = np.flatnonzero(visible)
    cell_targets = np.arange(k) if not include_clutter else np.concatenate(
        [np.arange(k), vis_idx[vis_idx >= k]])
    ranges = scenario.stacked("range_m")
    az = scenario.stacked("azimuth_rad")

    # members are the visible targets; cells index into the same member list
    member_idx = vis_idx
    pos_in_members = np.full(scenario.num_targets, -1)
    pos_in_members[member_idx] = np.arange(len(member_idx))
    q_m, j_m = _cell_pairs(ranges[member_idx], 0.5 * scenario.radio.range_resolution_m)

    # map member-based cell ids to simulated cells (VUE cells, then clutter cells)
    cell_of_member = np.full(len(member_idx), -1)
    sim_pos = pos_in_members[cell_targets]
    ok = sim_pos >= 0
    cell_of_member[sim_pos[ok]] = np.flatnonzero(ok)
    keep = cell_of_member[q_m] >= 0
    cell = cell_of_member[q_m[keep]]
    member = member_idx[j_m[keep]]

    # VUE cells use the sensing beams, clutter cells a matched steering beam; both are
    # steering vectors so the two-way coupling takes the Dirichlet closed form
    beam_az = np.empty(len(cell_targets))
    beam_az[:k] = beamformers.azimuths_rad
    beam_az[k:] = az[cell_targets[k:]]
    coupling = steering_coupling(n, beam_az[cell], az[member])
    g = amplitudes[member] * coupling * decision_scale(scenario.radio, beamformers.per_stream_power_w)

    c = vue_factors.shape[1]
    n_cells = len(cell_targets)
    clean = np.zeros((n_cells, c), dtype=complex)
    is_vue = member < k
    # interference power of the cell with every other RIS back-reflecting, plus unit noise
    others = member != cell_targets[cell]
    disturbance = 1.0 + np.bincount(cell[others], weights=np.abs(g[others]) ** 2, minlength=n_cells)
    if np.any(~is_vue):
        const = np.bincount(cell[~is_vue], weights=g[~is_vue].real, minlength=len(cell_targets)) \
            + 1j * np.bincount(cell[~is_vue], weights=g[~is_vue].imag, minlength=len(cell_targets))
        clean += const[:, None]
    if np.any(is_vue):
        np.add.at(clean, cell[is_vue], g[is_vue, None] * vue_factors[member[is_vue]])
    return CellModel(cell_targets, clean, k, disturbance)


@dataclass
class TrialOutcome:
    """Everything observed in one trial.

    Per VUE beam: detection flags and decision values per bit period, the decoded
    VUE index (-1 = no association) and its correlation score, and correctness.
    Clutter cells are summarised by their any-period detection and decoded index.
    """

    seed: object
    codewords: np.ndarray
    detections: np.ndarray
    decision_values: np.ndarray
    decoded_index: np.ndarray
    scores: np.ndarray
    correct: np.ndarray
    cell_targets: np.ndarray
    cell_detected: np.ndarray
    cell_decoded: np.ndarray

    @property
    def decoded_bits(self) -> np.ndarray:
        return self.detections.astype(np.int8)

    @property
    def association(self) -> dict[int, int]:
        """Scenario target index -> associated VUE index, for every cell that associated."""
        return {int(t): int(v) for t, v in zip(self.cell_targets, self.cell_decoded) if v >= 0}

    @property
    def false_associations(self) -> int:
        k = len(self.correct)
        return int(np.sum(self.cell_decoded[k:] >= 0))


def run_trial(scenario: Scenario, beamformers: Beamformers, codebook: HadamardCodebook, rng, *,
              p_fa: float | None = None, decoder_radius: int | None = None,
              nonreflect_variant: str = "random", leakage_power_ratio: float = 0.0,
              include_clutter: bool = True) -> TrialOutcome:
    p_fa = scenario.radio.false_alarm_target if p_fa is None else p_fa
    radius = default_decoder_radius(codebook.length) if decoder_radius is None else decoder_radius
    k = len(scenario.vues)
    amplitudes = scattering_amplitudes(scenario, rng)
    factors = vue_reflection_factors(scenario, codebook, rng, nonreflect_variant, leakage_power_ratio)
    cells = build_cells(scenario, beamformers, amplitudes, factors, include_clutter)
    det, u = detect(cells.clean, p_fa, rng, cells.disturbance)
    decoded, score = codebook.decode(det.astype(np.int8), radius)
    expected = scenario.vues.code_index
    correct = decoded[:k] == expected
    return TrialOutcome(
        seed=scenario.rng_seed,
        codewords=codebook.rows[codebook.assignment[expected]],
        detections=det[:k],
        decision_values=u[:k],
        decoded_index=decoded[:k],
        scores=score[:k],
        correct=correct,
        cell_targets=cells.targets,
        cell_detected=det.any(axis=1),
        cell_decoded=decoded,
    )


@dataclass(frozen=True)
class GpsFix:
    positions: np.ndarray  # (K, 3)
    sigma_m: float


def gps_fixes(scenario: Scenario, sigma_gps: float, rng=None, standard_noise: np.ndarray | None = None) -> GpsFix:
    """True VUE positions plus i.i.d. N(0, sigma^2) noise on each coordinate."""
    k = len(scenario.vues)
    z = rng.standard_normal((k, 3)) if standard_noise is None else standard_noise
    return GpsFix(scenario.vues.positions + sigma_gps * z, sigma_gps)


def estimate_position_from_detection(ranges_m, azimuths_rad, n_elements: int, radio, rng) -> np.ndarray:
    """Resolution-limited position estimates of detected targets, (n, 3).

    Angle error is uniform within +-1/N rad, range error uniform within +-c/(4B).
    """
    ranges_m = np.asarray(ranges_m, float)
    azimuths_rad = np.asarray(azimuths_rad, float)
    half_r = SPEED_OF_LIGHT / (4.0 * radio.bandwidth_hz)
    r = ranges_m + rng.uniform(-half_r, half_r, ranges_m.shape)
    a = azimuths_rad + rng.uniform(-1.0 / n_elements, 1.0 / n_elements, azimuths_rad.shape)
    return np.column_stack([r * np.cos(a), r * np.sin(a), np.zeros(len(r))])


def nearest_neighbour_match(fixes: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Greedy globally-shortest-first matching; returns the position index per fix or -1."""
    k, d = len(fixes), len(positions)
    match = np.full(k, -1)
    if k == 0 or d == 0:
        return match
    dist = np.linalg.norm(fixes[:, None, :] - positions[None, :, :], axis=-1)
    ki, di = np.meshgrid(np.arange(k), np.arange(d), indexing="ij")
    order = np.lexsort((di.ravel(), ki.ravel(), dist.ravel()))
    used_k = np.zeros(k, bool)
    used_d = np.zeros(d, bool)
    remaining = min(k, d)
    for flat in order:
        i, j = divmod(int(flat), d)
        if used_k[i] or used_d[j]:
            continue
        match[i] = j
        used_k[i] = used_d[j] = True
        remaining -= 1
        if remaining == 0:
            break
    return match


def gps_baseline_associate(scenario: Scenario, detections: np.ndarray, sigma_gps: float, rng=None,
                           standard_noise: np.ndarray | None = None) -> np.ndarray:
    """Associate each VUE's GPS fix with a detected target position (index or -1)."""
    return nearest_neighbour_match(gps_fixes(scenario, sigma_gps, rng, standard_noise).positions, detections)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class Estimate:
    successes: int
    n: int

    @property
    def value(self) -> float:
        return self.successes / self.n if self.n else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.n)

    @property
    def half_width(self) -> float:
        lo, hi = self.interval
        return 0.5 * (hi - lo)


@dataclass
class PcaEstimate:
    pcd: Estimate
    pca: Estimate
    pca_gps: dict[float, Estimate]
    per_vue_pcd: np.ndarray
    per_vue_pca: np.ndarray
    n_trials: int
    false_associations: int = 0
    extra: dict = field(default_factory=dict)


def estimate_pcd_pca(template: ScenarioConfig, n_trials: int, rng_seed: int, *, p_fa: float | None = None,
                     sigma_gps=(1.0, 4.0, 8.0), decoder_radius: int | None = None,
                     nonreflect_variant: str = "random", leakage_power_ratio: float = 0.0) -> PcaEstimate:
    """Empirical PCD / PCA (RIS codes) and GPS-baseline PCA over independent trials.

    Trial i draws its scenario from seed [rng_seed, i, 0], its amplitudes, RIS
    phases and noise from [rng_seed, i, 1], and its position/GPS errors from
    [rng_seed, i, 2], so results do not depend on evaluation order.
    """
    if n_trials < 1:
        raise ConfigError("trials", "must be >= 1")
    codebook = build_codebook(template.num_vues)
    k = template.num_vues
    det_hits = np.zeros(k, int)
    det_tries = np.zeros(k, int)
    pca_hits = np.zeros(k, int)
    gps_hits = {float(s): 0 for s in sigma_gps}
    false_assoc = 0
    for i in range(n_trials):
        scenario = build_scenario(template, [int(rng_seed), i, 0])
        beams = build_beamformers(scenario)
        outcome = run_trial(scenario, beams, codebook, np.random.default_rng([int(rng_seed), i, 1]),
                            p_fa=p_fa, decoder_radius=decoder_radius, nonreflect_variant=nonreflect_variant,
                            leakage_power_ratio=leakage_power_ratio, include_clutter=True)
        on = outcome.codewords.astype(bool)
        det_hits += np.sum(outcome.detections & on, axis=1)
        det_tries += np.sum(on, axis=1)
        pca_hits += outcome.correct
        false_assoc += outcome.false_associations

        if gps_hits:
            rng_pos = np.random.default_rng([int(rng_seed), i, 2])
            detected = outcome.cell_targets[outcome.cell_detected]
            est = estimate_position_from_detection(scenario.stacked("range_m")[detected],
                                                   scenario.stacked("azimuth_rad")[detected],
                                                   scenario.bs_elements, scenario.radio, rng_pos)
            z = rng_pos.standard_normal((k, 3))
            for s in gps_hits:
                match = gps_baseline_associate(scenario, est, s, standard_noise=z)
                hit = (match >= 0) & (detected[np.maximum(match, 0)] == np.arange(k))
                gps_hits[s] += int(np.sum(hit))

    total = n_trials * k
    return PcaEstimate(
        pcd=Estimate(int(det_hits.sum()), int(det_tries.sum())),
        pca=Estimate(int(pca_hits.sum()), total),
        pca_gps={s: Estimate(h, total) for s, h in gps_hits.items()},
        per_vue_pcd=det_hits / np.maximum(det_tries, 1),
        per_vue_pca=pca_hits / n_trials,
        n_trials=n_trials,
        false_associations=false_assoc,
    )


def vue_snr_reports(scenario: Scenario, beamformers: Beamformers, rng) -> list:
    """Coupled-target SINR of every VUE beam with all RIS back-reflecting."""
    vues = scenario.vues
    profiles = [backreflect_phases(scenario.ris_elements, vues.ris_theta_rad[i], vues.ris_psi_rad[i])
                for i in range(len(vues))]
    gains = composite_gains(scenario, profiles, beamformers.precoder, beamformers.combiner, rng=rng,
                            beam_targets=np.arange(len(vues)))
    return [analytics.snr(scenario, gains, q) for q in range(len(vues))]
