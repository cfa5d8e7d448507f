import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import integrate, optimize, special, stats

from ris_t2u import analytics
from ris_t2u.analytics import (binomial_cdf, bit_error_prob, clamp_p_fa, code_detection_prob,
                               error_correction_capability, marcum_q1, pca, pcd)
from ris_t2u.channels import composite_gains, steering_beam, two_way_power
from ris_t2u.ris import backreflect_phases, ris_reflectivity, ris_side_length
from ris_t2u.scenario import RadioParams, ScenarioConfig, build_scenario

from conftest import single_vue_config


def q1_quadrature(a, b):
    """Rician tail integral with the exponentially scaled Bessel function."""
    f = lambda x: x * math.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x)
    if a > b:
        # the density is concentrated near x = a; integrate the finite complement
        val, _ = integrate.quad(f, 0.0, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        return 1.0 - val
    val, _ = integrate.quad(f, b, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


GRID = [(0.0, 0.5), (0.5, 0.5), (1.0, 1.0), (2.0, 1.0), (1.0, 3.0), (3.0, 2.5), (5.0, 5.5), (10.0, 8.0),
        (20.0, 22.0), (0.1, 4.0), (7.0, 1.0), (40.0, 38.0), (83.0, 2.45)]


@pytest.mark.parametrize("a, b", GRID)
def test_marcum_vs_quadrature(a, b):
    assert marcum_q1(a, b) == pytest.approx(q1_quadrature(a, b), abs=1e-9)


@pytest.mark.parametrize("a, b", GRID)
def test_marcum_vs_noncentral_chi2(a, b):
    assert marcum_q1(a, b) == pytest.approx(stats.ncx2.sf(b * b, 2, a * a), abs=1e-9)


def test_marcum_identities():
    for b in (0.1, 1.0, 2.447, 5.0):
        assert marcum_q1(0.0, b) == pytest.approx(math.exp(-b * b / 2), abs=1e-9)
    for a in (0.0, 0.3, 4.0, 50.0):
        assert marcum_q1(a, 0.0) == 1.0
    b = math.sqrt(-2 * math.log(0.05))
    assert marcum_q1(0.0, b) == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(ValueError):
        marcum_q1(-1.0, 1.0)


def test_marcum_one_one():
    oracle = q1_quadrature(1.0, 1.0)
    assert marcum_q1(1.0, 1.0) == pytest.approx(oracle, abs=1e-9)
    assert marcum_q1(1.0, 1.0) == pytest.approx(0.733276, abs=1e-3)


def test_marcum_vectorised():
    a = np.array([[0.0, 1.0], [2.0, 3.0]])
    out = marcum_q1(a, 1.0)
    assert out.shape == (2, 2)
    assert out[1, 1] == pytest.approx(marcum_q1(3.0, 1.0))


def test_pcd_examples():
    assert pcd(0.0, 0.05) == pytest.approx(0.05, abs=1e-12)
    assert pcd(1e4, 0.05) == pytest.approx(1.0)
    g = 10.0
    assert pcd(g, 0.01) == pytest.approx(q1_quadrature(math.sqrt(2 * g), math.sqrt(-2 * math.log(0.01))), abs=1e-9)
    with pytest.raises(ValueError):
        pcd(1.0, 1.0)
    with pytest.raises(ValueError):
        pcd(-1.0, 0.1)


def test_pcd_strictly_increasing():
    gammas = np.linspace(0, 30, 61)
    for pf in (1e-4, 0.01, 0.05, 0.3):
        assert np.all(np.diff(pcd(gammas, pf)) > 0)
    pfs = np.array([1e-5, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9])
    for g in (0.5, 3.0, 10.0):
        assert np.all(np.diff([pcd(g, p) for p in pfs]) > 0)


def test_bit_error_prob_oracle():
    assert bit_error_prob(0.0) == 0.5
    assert bit_error_prob(2.0) == pytest.approx(0.078650, abs=1e-6)
    for g in (0.01, 0.5, 2.0, 7.3, 20.0, 60.0):
        ref = float(mpmath.erfc(mpmath.sqrt(mpmath.mpf(g) / 2)) / 2)
        assert bit_error_prob(g) == pytest.approx(ref, rel=1e-12, abs=1e-300)
    assert bit_error_prob(1e4) < 1e-300


def _exact_binomial_cdf(c, upto, p):
    p = Fraction(p)
    return float(sum(math.comb(c, i) * p**i * (1 - p) ** (c - i) for i in range(upto + 1)))


@pytest.mark.parametrize("c", [2, 4, 8, 16, 32, 64])
@pytest.mark.parametrize("p", [0.01, 0.1, 0.5])
def test_code_detection_vs_exact_binomial(c, p):
    upto = error_correction_capability(c)
    assert binomial_cdf(c, upto, p) == pytest.approx(_exact_binomial_cdf(c, upto, p), abs=1e-12)


def test_code_detection_examples():
    assert code_detection_prob(1e6, 32) == 1.0
    assert code_detection_prob(0.0, 32) == pytest.approx(0.4300, abs=1e-4)
    assert pca(0.0, 0.05, 32) == pytest.approx(0.0215, abs=1e-4)
    assert pca(1e4, 0.05, 32) == pytest.approx(1.0)
    g = np.linspace(0, 20, 21)
    assert np.all(pca(g, 0.05, 32) <= pcd(g, 0.05))
    assert np.all(np.diff(code_detection_prob(g, 32)) >= -1e-15)
    with pytest.raises(ValueError):
        code_detection_prob(1.0, 12)


def test_binomial_cdf_large_c_no_overflow():
    v = binomial_cdf(1024, 511, 0.5)
    assert 0.0 < v < 0.5
    assert binomial_cdf(8, 3, 0.0) == 1.0 and binomial_cdf(8, 3, 1.0) == 0.0


def test_clamp():
    np.testing.assert_allclose(clamp_p_fa([0.0, 0.5, 1.0]), [1e-6, 0.5, 1 - 1e-6])


def _matched_single(n=64, r=100.0, **radio_kw):
    radio = RadioParams(**radio_kw)
    s = build_scenario(single_vue_config(n=n, r=r, radio=radio), 0)
    v = s.vues
    f = steering_beam(n, v.azimuth_rad).T
    g = composite_gains(s, [backreflect_phases(s.ris_elements, v.ris_theta_rad[0], v.ris_psi_rad[0])],
                        f, f, rng=np.random.default_rng(0))
    return s, g


def test_snr_noise_only_and_anchor():
    s, g = _matched_single()
    rep = analytics.snr(s, g, 0)
    radio = s.radio
    expected = radio.tx_power_w * abs(g.gains[0, 0]) ** 2 * radio.processing_gain / radio.noise_power_w
    assert rep.snr == pytest.approx(expected, rel=1e-12)
    # independent end-to-end evaluation of the matched cell-edge VUE
    omega = two_way_power(ris_reflectivity(8836, 70e9), 100.0, radio)
    anchor = 0.1 * omega * 64**2 * 8 * 1024 / 10 ** (-11.2)
    assert rep.snr == pytest.approx(anchor, rel=1e-9)
    assert rep.snr_db == pytest.approx(35.39, abs=0.01)
    assert rep.hypothesis == "vue"


def test_snr_doubling_p():
    s1, g1 = _matched_single(repetition_factor=8)
    s2, g2 = _matched_single(repetition_factor=16)
    assert analytics.snr(s2, g2, 0).snr == pytest.approx(2 * analytics.snr(s1, g1, 0).snr)


def test_snr_interference_monotone():
    base = analytics.SnrReport(0, "vue", 1.0, 0.1, 0.1, 0.1)
    more = analytics.SnrReport(0, "vue", 1.0, 0.2, 0.1, 0.1)
    assert more.snr < base.snr
    assert analytics.SnrReport(0, "vue", 0.0, 0, 0, 1).snr_db == -math.inf


def test_roc_curve_properties():
    template = ScenarioConfig()
    grid = [0.001, 0.01, 0.05, 0.2, 0.5]
    curves = [analytics.roc_curve(template, beta, 0.2, grid, drops=40, seed=3) for beta in (-20, -10, 0)]
    for c in curves:
        assert np.all(np.diff(c.p_cd) >= 0)
        assert c.drops == 40 and c.rho == 0.2
    # stronger clutter never helps on matched realizations
    assert np.all(curves[0].p_cd >= curves[1].p_cd) and np.all(curves[1].p_cd >= curves[2].p_cd)


def test_roc_vanishing_clutter_matches_noise_only():
    template = ScenarioConfig(num_vues=1)
    c = analytics.roc_curve(template, -200.0, 0.2, [0.01, 0.05], drops=5, seed=0)
    s, g = _matched_single(r=100.0)
    gamma = analytics.snr(s, g, 0).snr
    # beam gain is azimuth independent, so every drop has the same SINR
    np.testing.assert_allclose(c.p_cd, [pcd(gamma, 0.01), pcd(gamma, 0.05)], rtol=1e-9)


def test_ris_size_noise_limited_inversion():
    template = ScenarioConfig(num_vues=1)
    sz = analytics.ris_size_for_target(0.0, 8.0, 0.99, 0.05, template=template, drops=3)
    s, g = _matched_single(r=100.0)
    gamma_ref = analytics.snr(s, g, 0).snr
    gamma_star = optimize.brentq(lambda x: q1_quadrature(math.sqrt(2 * x), math.sqrt(-2 * math.log(0.05))) - 0.99,
                                 1e-3, 1e3, xtol=1e-12)
    side = math.ceil(math.sqrt(math.sqrt(gamma_star / gamma_ref) * 8836))
    assert abs(sz.side_elements - side) <= 1
    assert not sz.saturated
    assert sz.side_length_m == pytest.approx(ris_side_length(sz.ris_elements, 70e9))
    assert sz.achieved_pcd >= 0.99


def test_ris_size_monotone_and_saturation():
    template = ScenarioConfig()
    reports = analytics.sizing_reports(template, 0.2, 8.0, 60, 1)
    sizes = [analytics.ris_size_for_target(0.2, 8.0, p, 0.05, template=template, reports=reports).ris_elements
             for p in (0.5, 0.8, 0.9, 0.99)]
    assert sizes == sorted(sizes)
    sat = analytics.ris_size_for_target(0.2, 8.0, 0.99, 1e-6, template=template, reports=reports, max_side=5)
    assert sat.saturated and sat.achieved_pcd < 0.99
    with pytest.raises(ValueError):
        analytics.ris_size_for_target(0.2, 8.0, 1.0, 0.05, template=template, reports=reports)
