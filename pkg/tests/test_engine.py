import math

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from ris_t2u import analytics, engine
from ris_t2u.channels import range_cell_mask
from ris_t2u.codebook import build_codebook
from ris_t2u.errors import ConfigError
from ris_t2u.scenario import SPEED_OF_LIGHT, RadioParams, ScenarioConfig, build_scenario

from conftest import single_vue_config


def test_beamformers():
    s = build_scenario(ScenarioConfig(bs_elements=32), 0)
    b = engine.build_beamformers(s)
    assert b.num_streams == 16
    np.testing.assert_allclose(np.linalg.norm(b.precoder, axis=0), 1.0)
    np.testing.assert_array_equal(b.precoder, b.combiner)
    assert b.per_stream_power_w == pytest.approx(s.radio.tx_power_w / 16)
    a = np.exp(1j * math.pi * np.arange(32) * math.sin(s.vues.azimuth_rad[0]))
    assert abs(np.conj(b.combiner[:, 0]) @ a) ** 2 == pytest.approx(32)
    with pytest.raises(ConfigError):
        engine.build_beamformers(s, num_comm_streams=17)
    with pytest.raises(ConfigError):
        engine.build_beamformers(build_scenario(ScenarioConfig(bs_elements=8, num_vues=9), 0))


@pytest.mark.parametrize("p_fa", [0.01, 0.05, 0.1])
def test_threshold_calibration(p_fa):
    n = 100_000
    det, _ = engine.detect(np.zeros(n), p_fa, np.random.default_rng(11))
    assert abs(det.mean() - p_fa) <= 3 * math.sqrt(p_fa * (1 - p_fa) / n)


@pytest.mark.parametrize("gamma_db", [0, 5, 10, 15])
def test_detection_matches_marcum(gamma_db):
    n = 100_000
    gamma = 10 ** (gamma_db / 10)
    clean = np.full(n, math.sqrt(gamma) * np.exp(0.7j))
    det, _ = engine.detect(clean, 0.01, np.random.default_rng(gamma_db))
    p = analytics.pcd(gamma, 0.01)
    assert abs(det.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1e-12


def test_disturbance_scales_threshold():
    n = 100_000
    det, _ = engine.detect(np.zeros((1, n)), 0.05, np.random.default_rng(2), disturbance=np.array([1.0]))
    det4, _ = engine.detect(np.zeros((1, n)), 0.05, np.random.default_rng(2), disturbance=np.array([4.0]))
    assert det4.sum() < det.sum()


def _isolated(n=64, r=80.0, **radio_kw):
    return build_scenario(single_vue_config(n=n, r=r, radio=RadioParams(**radio_kw)), 0)


def test_cell_values_calibrated_to_sinr():
    s = _isolated()
    beams = engine.build_beamformers(s)
    cb = build_codebook(1)
    rng = np.random.default_rng(0)
    from ris_t2u.channels import scattering_amplitudes
    amp = scattering_amplitudes(s, rng)
    factors = engine.vue_reflection_factors(s, cb, rng)
    cells = engine.build_cells(s, beams, amp, factors)
    gamma = engine.vue_snr_reports(s, beams, np.random.default_rng(0))[0].snr
    word = cb.codeword(0).astype(bool)
    np.testing.assert_allclose(np.abs(cells.clean[0, word]) ** 2, gamma, rtol=1e-9)
    assert np.all(cells.clean[0, ~word] == 0)
    assert cells.disturbance[0] == 1.0


def test_cell_pairs_window():
    r = np.array([10.0, 11.0, 15.0, 10.5])
    q, j = engine._cell_pairs(r, 1.2)
    pairs = set(zip(q.tolist(), j.tolist()))
    assert pairs == {(0, 0), (0, 1), (0, 3), (1, 0), (1, 1), (1, 3), (2, 2), (3, 0), (3, 1), (3, 3)}


def test_constant_clutter_never_associates():
    cfg = ScenarioConfig(clutter_density_per_m2=0.05, clutter_mean_reflectivity_dbm2=30.0)
    s = build_scenario(cfg, 1)
    cb = build_codebook(16)
    out = engine.run_trial(s, engine.build_beamformers(s), cb, np.random.default_rng(1))
    k = len(s.vues)
    ranges = s.stacked("range_m")
    targets = out.cell_targets[k:]
    # cells without a VUE in their range cell see a constant echo over the epoch
    alone = np.array([not np.any(range_cell_mask(ranges[:k], ranges[t], s.radio)) for t in targets])
    assert alone.sum() > 100
    assert np.all(out.cell_decoded[k:][alone] == -1)
    assert np.any(out.cell_detected[k:][alone])


def test_classical_radius_rejects_more():
    cfg = ScenarioConfig(clutter_density_per_m2=0.1)
    loose = engine.estimate_pcd_pca(cfg, 3, 2, sigma_gps=())
    tight = engine.estimate_pcd_pca(cfg, 3, 2, sigma_gps=(), decoder_radius=7)
    assert tight.false_associations < loose.false_associations


def test_trial_outcome_fields():
    s = build_scenario(ScenarioConfig(), 3)
    cb = build_codebook(16)
    out = engine.run_trial(s, engine.build_beamformers(s), cb, np.random.default_rng(3))
    assert out.detections.shape == (16, 32)
    assert out.decoded_bits.dtype == np.int8
    # correct only when the decoded index equals the assigned code
    np.testing.assert_array_equal(out.correct, out.decoded_index == s.vues.code_index)
    assoc = out.association
    assert all(0 <= v < 16 for v in assoc.values())


def test_pca_infinite_snr():
    cfg = ScenarioConfig(radio=RadioParams(tx_power_dbm=60.0))
    est = engine.estimate_pcd_pca(cfg, 5, 0, sigma_gps=())
    assert est.pca.value == 1.0 and est.pcd.value == 1.0


def test_reproducible_estimates():
    cfg = ScenarioConfig(bs_elements=16, clutter_density_per_m2=0.05)
    a = engine.estimate_pcd_pca(cfg, 4, 9)
    b = engine.estimate_pcd_pca(cfg, 4, 9)
    assert a.pca.successes == b.pca.successes
    assert {s: e.successes for s, e in a.pca_gps.items()} == {s: e.successes for s, e in b.pca_gps.items()}
    np.testing.assert_array_equal(a.per_vue_pca, b.per_vue_pca)
    with pytest.raises(ConfigError):
        engine.estimate_pcd_pca(cfg, 0, 9)


def test_isolated_vues_pca_vs_analytic():
    # VUEs on distinct range cells: no coupling, so each beam sees the analytic single-target SINR
    k = 16
    ranges = tuple(20.0 + 5.0 * i for i in range(k))
    cfg = ScenarioConfig(num_vues=k, vue_placement="fixed", vue_ranges_m=ranges,
                         vue_azimuths_deg=tuple(np.linspace(-50, 50, k)))
    n_trials = 50
    est = engine.estimate_pcd_pca(cfg, n_trials, 4, sigma_gps=())
    s = build_scenario(cfg, [4, 0, 0])
    reports = engine.vue_snr_reports(s, engine.build_beamformers(s), np.random.default_rng(0))
    expected = np.mean([analytics.pca(r.snr, 0.05, 32) for r in reports])
    assert abs(est.pca.value - expected) <= 3 * math.sqrt(max(expected * (1 - expected), 1e-4) / (n_trials * k)) + 0.01


def test_position_estimate_bounds(radio):
    rng = np.random.default_rng(0)
    r = np.full(2000, 100.0)
    az = np.zeros(2000)
    est = engine.estimate_position_from_detection(r, az, 16, radio, rng)
    rr = np.hypot(est[:, 0], est[:, 1])
    aa = np.arctan2(est[:, 1], est[:, 0])
    half = SPEED_OF_LIGHT / (4 * radio.bandwidth_hz)
    assert half == pytest.approx(1.2287, abs=1e-3)
    assert np.all(np.abs(rr - 100) <= half) and np.all(np.abs(aa) <= 1 / 16)
    assert 100 * math.tan(1 / 16) == pytest.approx(6.25, abs=0.01)
    fine = engine.estimate_position_from_detection(r, az, 10**6, RadioParams(bandwidth_hz=1e12), rng)
    np.testing.assert_allclose(fine[:, 0], 100.0, atol=1e-3)


def test_nearest_neighbour_matching():
    fixes = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    targets = np.array([[10.0, 1, 0], [0.0, 1, 0], [5.0, 0, 0]])
    np.testing.assert_array_equal(engine.nearest_neighbour_match(fixes, targets), [1, 0])
    # greedy: the globally shortest pair is matched first
    fixes = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    targets = np.array([[1.2, 0, 0], [5.0, 0, 0]])
    np.testing.assert_array_equal(engine.nearest_neighbour_match(fixes, targets), [1, 0])
    # ties go to the lowest index
    np.testing.assert_array_equal(engine.nearest_neighbour_match(np.zeros((1, 3)), np.array([[1.0, 0, 0], [-1.0, 0, 0]])), [0])
    assert engine.nearest_neighbour_match(np.zeros((2, 3)), np.zeros((0, 3))).tolist() == [-1, -1]


def test_gps_baseline_perfect_and_misassociation():
    s = build_scenario(ScenarioConfig(), 0)
    match = engine.gps_baseline_associate(s, s.vues.positions, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(match, np.arange(16))
    one = build_scenario(single_vue_config(r=50.0), 0)
    clutter_pos = one.vues.positions + np.array([[0.0, 3.0, 0.0]])
    detections = np.vstack([one.vues.positions, clutter_pos])
    noise = np.array([[0.0, 1.0, 0.0]])  # fix lands 4 m off, 1 m from the clutter point
    m = engine.gps_baseline_associate(one, detections, 4.0, standard_noise=noise)
    assert m.tolist() == [1]


def test_gps_fix_noise_statistics():
    s = build_scenario(ScenarioConfig(), 0)
    rng = np.random.default_rng(5)
    errs = np.vstack([engine.gps_fixes(s, 4.0, rng).positions - s.vues.positions for _ in range(500)])
    assert errs.std() == pytest.approx(4.0, rel=0.05)
    assert abs(np.corrcoef(errs[:, 0], errs[:, 1])[0, 1]) < 0.05


@pytest.mark.parametrize("k, n", [(0, 10), (3, 10), (10, 10), (37, 400)])
def test_wilson_interval(k, n):
    lo, hi = engine.wilson_interval(k, n)
    ref = proportion_confint(k, n, alpha=0.05, method="wilson")
    assert lo == pytest.approx(ref[0], abs=1e-9) and hi == pytest.approx(ref[1], abs=1e-9)
    assert engine.Estimate(k, n).half_width == pytest.approx((ref[1] - ref[0]) / 2, abs=1e-9)
