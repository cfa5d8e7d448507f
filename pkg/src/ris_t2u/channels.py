"""Array responses, path-loss power models and composite beamspace gains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .ris import RisProfile, coherent_sum
from .scenario import CLUTTER, VUE, RadioParams, Scenario


@dataclass(frozen=True)
class ArrayGeometry:
    element_count: int
    spacing_in_wavelengths: float
    layout: str  # "linear" | "square-planar"

    def __post_init__(self):
        if self.layout not in ("linear", "square-planar"):
            raise ConfigError("layout", f"unknown array layout {self.layout!r}")
        if self.layout == "square-planar":
            side = math.isqrt(self.element_count)
            if side * side != self.element_count:
                raise ConfigError("ris_elements", f"{self.element_count} is not a perfect square")

    @classmethod
    def bs(cls, n: int) -> "ArrayGeometry":
        return cls(n, 0.5, "linear")

    @classmethod
    def ris(cls, m: int) -> "ArrayGeometry":
        return cls(m, 0.25, "square-planar")


def steering_bs(geom: ArrayGeometry, azimuth_rad) -> np.ndarray:
    """ULA response exp(j*2*pi*d*n*sin(az)); a 1-D azimuth array gives shape (len, N)."""
    if geom.layout != "linear":
        raise ConfigError("layout", "BS steering needs a linear array")
    n = np.arange(geom.element_count)
    phase = 2.0 * math.pi * geom.spacing_in_wavelengths * np.multiply.outer(np.sin(azimuth_rad), n)
    return np.exp(1j * phase)


def steering_ris(geom: ArrayGeometry, theta_rad: float, psi_rad: float) -> np.ndarray:
    """UPA response for incidence (theta, psi); flattened with the cos(theta) index fastest."""
    if geom.layout != "square-planar":
        raise ConfigError("layout", "RIS steering needs a square-planar array")
    side = math.isqrt(geom.element_count)
    v, u = np.divmod(np.arange(geom.element_count), side)
    k = 2.0 * math.pi * geom.spacing_in_wavelengths
    return np.exp(1j * k * (u * math.cos(theta_rad) * math.sin(psi_rad)
                            + v * math.sin(theta_rad) * math.sin(psi_rad)))


def steering_beam(n: int, azimuth_rad) -> np.ndarray:
    """Unit-norm steering beamformer(s) toward ``azimuth_rad``."""
    return steering_bs(ArrayGeometry.bs(n), azimuth_rad) / math.sqrt(n)


def one_way_power(range_m, radio: RadioParams):
    """Friis free-space power gain (lambda / (4 pi R))^2."""
    return (radio.wavelength_m / (4.0 * math.pi * np.asarray(range_m, dtype=float))) ** 2


def two_way_power(reflectivity_m2, range_m, radio: RadioParams):
    """Radar-equation power gain Gamma lambda^2 / ((4 pi)^3 R^4)."""
    r = np.asarray(range_m, dtype=float)
    return np.asarray(reflectivity_m2, dtype=float) * radio.wavelength_m**2 / ((4.0 * math.pi) ** 3 * r**4)


def amplitude_model(kind: str, range_m, reflectivity_m2, radio: RadioParams):
    """Expected power gain of a channel amplitude.

    ``kind`` is ``"one-way"`` for a BS-to-point link, or a target kind (VUE or
    clutter) for the two-way scattering amplitude.
    """
    if kind == "one-way":
        return one_way_power(range_m, radio)
    if kind in (VUE, CLUTTER):
        return two_way_power(reflectivity_m2, range_m, radio)
    raise ValueError(f"unknown amplitude kind {kind!r}")


def scattering_amplitudes(scenario: Scenario, rng) -> np.ndarray:
    """Complex two-way amplitude per target (VUEs first), frozen for the whole code epoch.

    VUE amplitudes have deterministic modulus sqrt(Omega_tw(Gamma_k)) and a random
    phase; clutter amplitudes are circular Gaussian with power Omega_tw(Gamma_l).
    """
    radio = scenario.radio
    k = len(scenario.vues)
    n_c = len(scenario.clutter)
    vue_power = two_way_power(scenario.vues.reflectivity_m2, scenario.vues.range_m, radio)
    vue_amp = np.sqrt(vue_power) * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, k))
    cn = (rng.standard_normal(n_c) + 1j * rng.standard_normal(n_c)) / math.sqrt(2.0)
    clutter_amp = np.sqrt(two_way_power(scenario.clutter.reflectivity_m2, scenario.clutter.range_m, radio)) * cn
    return np.concatenate([vue_amp, clutter_amp])


def ris_cascade_factor(profile: RisProfile, theta_rad: float, psi_rad: float) -> complex:
    """RIS contribution to the VUE echo, normalised so back-reflection gives modulus 1.

    Combined with the calibrated amplitude sqrt(Omega_tw(Gamma_k)) / M this is the
    a_M^T Phi a_M term of the cascade. Non-reflecting profiles are modelled through
    their leakage power ratio with the phase of the actual coherent sum.
    """
    if not profile.reflecting and profile.leakage_power_ratio <= 0.0:
        return 0j
    m = profile.element_count
    s = coherent_sum(profile, theta_rad, psi_rad)
    if profile.reflecting:
        return s / m
    phase = s / abs(s) if abs(s) > 0 else 1.0
    return math.sqrt(profile.leakage_power_ratio) * phase


def array_coupling(n: int, beam_azimuth_rad, target_azimuth_rad) -> np.ndarray:
    """(w^H a_N(target)) (a_N(target)^H f) for matched steering beams w = f."""
    w = steering_beam(n, beam_azimuth_rad)
    a = steering_bs(ArrayGeometry.bs(n), target_azimuth_rad)
    proj = np.sum(np.conj(w) * a, axis=-1)
    return proj * np.conj(proj)


def steering_coupling(n: int, beam_azimuth_rad, target_azimuth_rad) -> np.ndarray:
    """Closed form of :func:`array_coupling`: |sum_n exp(j pi n x)|^2 / N, x = sin(target) - sin(beam)."""
    x = np.sin(target_azimuth_rad) - np.sin(beam_azimuth_rad)
    half = 0.5 * math.pi * np.asarray(x, float)
    den = np.sin(half)
    small = np.abs(den) < 1e-12
    ratio = np.where(small, float(n), np.sin(n * half) / np.where(small, 1.0, den))
    return ratio * ratio / n


def range_cell_mask(ranges_m, reference_range_m: float, radio: RadioParams) -> np.ndarray:
    """Targets that share the range-resolution cell centred on ``reference_range_m``."""
    return np.abs(np.asarray(ranges_m) - reference_range_m) < 0.5 * radio.range_resolution_m


@dataclass(frozen=True)
class ChannelGains:
    """Effective gains g[q, j] = w_q^H H_j f_q for every beam q and target j (VUEs first)."""

    gains: np.ndarray
    vue_modes: tuple
    per_stream_power_w: float
    beam_targets: np.ndarray | None = None

    @property
    def num_beams(self) -> int:
        return self.gains.shape[0]


def composite_gains(scenario: Scenario, ris_profiles, precoder: np.ndarray, combiner: np.ndarray,
                    rng=None, amplitudes: np.ndarray | None = None,
                    beam_targets: np.ndarray | None = None) -> ChannelGains:
    """Beamspace gains of all targets under each (precoder, combiner) column pair.

    ``ris_profiles`` has one profile per VUE (its current configuration). Either
    ``amplitudes`` (from :func:`scattering_amplitudes`) or ``rng`` must be given.
    Targets outside the BS field of view contribute zero.
    """
    precoder = np.atleast_2d(precoder)
    combiner = np.atleast_2d(combiner)
    n = scenario.bs_elements
    k = len(scenario.vues)
    if precoder.shape[0] != n or combiner.shape[0] != n:
        raise DimensionError(f"beamformers need {n} rows, got {precoder.shape[0]} and {combiner.shape[0]}")
    if precoder.shape[1] != combiner.shape[1]:
        raise DimensionError("precoder and combiner column counts differ")
    if precoder.shape[1] < k:
        raise DimensionError(f"need at least K={k} beams, got {precoder.shape[1]}")
    if len(ris_profiles) != k:
        raise DimensionError(f"need one RIS profile per VUE ({k}), got {len(ris_profiles)}")
    if amplitudes is None:
        if rng is None:
            raise ValueError("composite_gains needs amplitudes or an rng")
        amplitudes = scattering_amplitudes(scenario, rng)

    vues = scenario.vues
    cascade = np.array([ris_cascade_factor(p, vues.ris_theta_rad[i], vues.ris_psi_rad[i])
                        for i, p in enumerate(ris_profiles)], dtype=complex)
    factor = np.concatenate([cascade, np.ones(len(scenario.clutter), dtype=complex)])
    factor = factor * scenario.visible()

    a = steering_bs(ArrayGeometry.bs(n), scenario.stacked("azimuth_rad"))  # (Q, N)
    rx = np.conj(combiner.T) @ a.T  # w_q^H a_j -> (S, Q)
    tx = np.conj(a) @ precoder  # a_j^H f_q -> (Q, S)
    g = rx * tx.T * (amplitudes * factor)[None, :]
    modes = tuple(p.mode for p in ris_profiles)
    power = scenario.radio.tx_power_w / precoder.shape[1]
    return ChannelGains(g, modes, power, beam_targets)
