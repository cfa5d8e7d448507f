"""Scenario generation: radio parameters, VUE placement and Poisson clutter drops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

VUE = "vue"
CLUTTER = "clutter"

PLACEMENTS = ("uniform", "probe-edge", "fixed")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class CodeTiming:
    """Bit and code-epoch durations derived from the system time unit."""

    pulse_time_s: float
    repetition_factor: int
    code_length: int

    @property
    def bit_time_s(self) -> float:
        return self.repetition_factor * self.pulse_time_s

    @property
    def code_duration_s(self) -> float:
        return self.code_length * self.repetition_factor * self.pulse_time_s


@dataclass(frozen=True)
class RadioParams:
    """Global radio parameters; defaults are the reference 70 GHz deployment.

    ``time_unit_s`` defaults to ``time_bandwidth_product / bandwidth_hz`` so that the
    two stay consistent unless both are given explicitly.
    """

    carrier_frequency_hz: float = 70e9
    bandwidth_hz: float = 61e6
    tx_power_dbm: float = 20.0
    noise_power_dbm: float = -82.0
    ue_noise_power_dbm: float = -82.0
    cell_radius_m: float = 100.0
    time_bandwidth_product: float = 1024.0
    repetition_factor: int = 8
    false_alarm_target: float = 0.05
    time_unit_s: float | None = None

    def __post_init__(self):
        if not self.carrier_frequency_hz > 0:
            raise ConfigError("carrier_frequency_hz", "must be > 0")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth_hz", "must be > 0")
        if not self.cell_radius_m > 0:
            raise ConfigError("cell_radius_m", "must be > 0")
        if not 0.0 < self.false_alarm_target < 1.0:
            raise ConfigError("p_fa", "must lie in (0, 1)")
        if int(self.repetition_factor) != self.repetition_factor or self.repetition_factor < 1:
            raise ConfigError("repetition_factor", "must be an integer >= 1")
        if not self.time_bandwidth_product >= 1:
            raise ConfigError("time_bandwidth_product", "must be >= 1")
        if self.time_unit_s is None:
            object.__setattr__(self, "time_unit_s", self.time_bandwidth_product / self.bandwidth_hz)
        elif not self.time_unit_s > 0:
            raise ConfigError("time_unit_s", "must be > 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def tx_power_w(self) -> float:
        return float(dbm_to_watts(self.tx_power_dbm))

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watts(self.noise_power_dbm))

    @property
    def processing_gain(self) -> float:
        """Noise reduction P*TB from matched filtering and averaging over one bit."""
        return self.repetition_factor * self.time_bandwidth_product

    @property
    def range_resolution_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)

    def timing(self, code_length: int) -> CodeTiming:
        return CodeTiming(self.time_unit_s, int(self.repetition_factor), int(code_length))


@dataclass(frozen=True)
class Target:
    kind: str
    range_m: float
    azimuth_rad: float
    radial_velocity_mps: float
    reflectivity_m2: float
    ris_incidence: tuple[float, float] | None = None
    code_index: int | None = None

    @property
    def position(self) -> np.ndarray:
        return np.array([self.range_m * math.cos(self.azimuth_rad),
                         self.range_m * math.sin(self.azimuth_rad), 0.0])


@dataclass(frozen=True)
class TargetSet:
    """Column-oriented collection of targets of one kind.

    Clutter drops hold thousands of points, so targets are stored as parallel
    arrays; indexing returns a :class:`Target` view.
    """

    kind: str
    range_m: np.ndarray
    azimuth_rad: np.ndarray
    radial_velocity_mps: np.ndarray
    reflectivity_m2: np.ndarray
    ris_theta_rad: np.ndarray | None = None
    ris_psi_rad: np.ndarray | None = None
    code_index: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.range_m)

    def __getitem__(self, i: int) -> Target:
        inc = None
        code = None
        if self.kind == VUE:
            inc = (float(self.ris_theta_rad[i]), float(self.ris_psi_rad[i]))
            code = int(self.code_index[i])
        return Target(self.kind, float(self.range_m[i]), float(self.azimuth_rad[i]),
                      float(self.radial_velocity_mps[i]), float(self.reflectivity_m2[i]),
                      inc, code)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def positions(self) -> np.ndarray:
        """(n, 3) Cartesian positions with the BS at the origin, z = 0."""
        return np.column_stack([self.range_m * np.cos(self.azimuth_rad),
                                self.range_m * np.sin(self.azimuth_rad),
                                np.zeros(len(self))])

    def with_reflectivity(self, reflectivity_m2) -> "TargetSet":
        refl = np.broadcast_to(np.asarray(reflectivity_m2, dtype=float), self.range_m.shape).copy()
        return TargetSet(self.kind, self.range_m, self.azimuth_rad, self.radial_velocity_mps,
                         refl, self.ris_theta_rad, self.ris_psi_rad, self.code_index)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to draw one scenario (one sweep point of an experiment)."""

    radio: RadioParams = field(default_factory=RadioParams)
    num_vues: int = 16
    bs_elements: int = 64
    ris_elements: int = 94 * 94
    clutter_density_per_m2: float = 0.0
    clutter_mean_reflectivity_dbm2: float = 8.0
    clutter_reflectivity_std_db: float = 0.0
    fov_half_width_deg: float = 60.0
    vue_placement: str = "uniform"
    vue_ranges_m: tuple[float, ...] | None = None
    vue_azimuths_deg: tuple[float, ...] | None = None
    min_vue_separation_m: float = 5.0
    ris_max_elevation_deg: float = 60.0
    vue_speed_max_mps: float = 30.0
    clutter_moving_fraction: float = 0.5
    clutter_speed_max_mps: float = 15.0
    min_range_m: float = 1.0

    def __post_init__(self):
        if self.num_vues < 1:
            raise ConfigError("num_vues", "must be >= 1")
        if self.bs_elements < 1:
            raise ConfigError("bs_elements", "must be >= 1")
        side = math.isqrt(int(self.ris_elements))
        if self.ris_elements < 1 or side * side != self.ris_elements:
            raise ConfigError("ris_elements", f"{self.ris_elements} is not a perfect square")
        if self.clutter_density_per_m2 < 0 or not math.isfinite(self.clutter_density_per_m2):
            raise ConfigError("clutter_density_per_m2", "must be finite and >= 0")
        if self.clutter_reflectivity_std_db < 0:
            raise ConfigError("clutter_reflectivity_std_db", "must be >= 0")
        if not 0 < self.fov_half_width_deg <= 180:
            raise ConfigError("fov_half_width_deg", "must lie in (0, 180]")
        if self.vue_placement not in PLACEMENTS:
            raise ConfigError("vue_placement", f"must be one of {PLACEMENTS}")
        if self.vue_placement == "fixed":
            if self.vue_ranges_m is None or self.vue_azimuths_deg is None:
                raise ConfigError("vue_ranges_m", "fixed placement needs vue_ranges_m and vue_azimuths_deg")
            if len(self.vue_ranges_m) != self.num_vues or len(self.vue_azimuths_deg) != self.num_vues:
                raise ConfigError("vue_ranges_m", "fixed placement needs one entry per VUE")
            if any(not self.min_range_m <= r <= self.radio.cell_radius_m for r in self.vue_ranges_m):
                raise ConfigError("vue_ranges_m", "ranges must lie within the cell")
        if self.min_vue_separation_m < 0:
            raise ConfigError("min_vue_separation_m", "must be >= 0")
        if not 0 <= self.ris_max_elevation_deg <= 90:
            raise ConfigError("ris_max_elevation_deg", "must lie in [0, 90]")
        if not 0 <= self.clutter_moving_fraction <= 1:
            raise ConfigError("clutter_moving_fraction", "must lie in [0, 1]")

    @property
    def code_length(self) -> int:
        return code_length_for(self.num_vues)

    @property
    def fov_half_width_rad(self) -> float:
        return math.radians(self.fov_half_width_deg)


def code_length_for(num_vues: int) -> int:
    """Smallest power of two that leaves room for ``num_vues`` codewords plus the all-ones row."""
    return 1 << (int(num_vues)).bit_length()


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams
    vues: TargetSet
    clutter: TargetSet
    clutter_density_per_m2: float
    clutter_mean_reflectivity_dbm2: float
    clutter_reflectivity_std_db: float
    bs_elements: int
    ris_elements: int
    code_length: int
    rng_seed: object
    fov_half_width_rad: float = math.pi / 3

    @property
    def num_targets(self) -> int:
        return len(self.vues) + len(self.clutter)

    def stacked(self, attr: str) -> np.ndarray:
        """Concatenate a per-target attribute, VUEs first then clutter."""
        return np.concatenate([getattr(self.vues, attr), getattr(self.clutter, attr)])

    @property
    def positions(self) -> np.ndarray:
        return np.vstack([self.vues.positions, self.clutter.positions])

    def visible(self) -> np.ndarray:
        """Mask of targets inside the BS array's field of view."""
        return np.abs(self.stacked("azimuth_rad")) <= self.fov_half_width_rad

    def with_clutter_reflectivity(self, reflectivity_m2) -> "Scenario":
        from dataclasses import replace
        return replace(self, clutter=self.clutter.with_reflectivity(reflectivity_m2))


def _sample_sector(rng, n, r_min, r_max, half_width):
    """Uniform-by-area draws over an annular sector."""
    u = rng.random(n)
    r = np.sqrt(r_min**2 + u * (r_max**2 - r_min**2))
    az = rng.uniform(-half_width, half_width, n)
    return r, az


def _place_vues(cfg: ScenarioConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    k = cfg.num_vues
    radius = cfg.radio.cell_radius_m
    hw = cfg.fov_half_width_rad
    if cfg.vue_placement == "fixed":
        return (np.asarray(cfg.vue_ranges_m, dtype=float),
                np.radians(np.asarray(cfg.vue_azimuths_deg, dtype=float)))
    ranges = np.empty(k)
    az = np.empty(k)
    placed = 0
    tries = 0
    while placed < k:
        tries += 1
        if tries > 1000 * k:
            raise ConfigError("min_vue_separation_m", "cannot place VUEs with the requested separation")
        if placed == 0 and cfg.vue_placement == "probe-edge":
            r = radius
            a = rng.uniform(-hw, hw)
        else:
            r, a = _sample_sector(rng, 1, cfg.min_range_m, radius, hw)
            r, a = float(r[0]), float(a[0])
        if placed:
            dx = r * math.cos(a) - ranges[:placed] * np.cos(az[:placed])
            dy = r * math.sin(a) - ranges[:placed] * np.sin(az[:placed])
            if np.min(np.hypot(dx, dy)) < cfg.min_vue_separation_m:
                continue
        ranges[placed], az[placed] = r, a
        placed += 1
    return ranges, az


def build_scenario(cfg: ScenarioConfig, seed) -> Scenario:
    """Draw one scenario snapshot.

    VUEs are placed inside the BS field of view; clutter is a homogeneous Poisson
    process over the whole disk of radius R with log-normal reflectivity.
    ``seed`` may be an int or a sequence of ints (per-trial substreams).
    """
    from .ris import ris_reflectivity

    ss = np.random.SeedSequence(seed)
    rng_vue, rng_count, rng_clutter, rng_refl = (np.random.default_rng(s) for s in ss.spawn(4))
    radio = cfg.radio
    radius = radio.cell_radius_m

    ranges, az = _place_vues(cfg, rng_vue)
    k = cfg.num_vues
    psi_max = math.radians(cfg.ris_max_elevation_deg)
    theta = rng_vue.uniform(-math.pi, math.pi, k)
    psi = rng_vue.uniform(0.0, psi_max, k)
    vel = rng_vue.uniform(-cfg.vue_speed_max_mps, cfg.vue_speed_max_mps, k)
    gamma_k = ris_reflectivity(cfg.ris_elements, radio.carrier_frequency_hz)
    vues = TargetSet(VUE, ranges, az, vel, np.full(k, gamma_k), theta, psi, np.arange(k))

    rho = cfg.clutter_density_per_m2
    n_clutter = int(rng_count.poisson(rho * math.pi * radius**2)) if rho > 0 else 0
    r_c = radius * np.sqrt(rng_clutter.random(n_clutter))
    r_c = np.maximum(r_c, cfg.min_range_m)
    az_c = rng_clutter.uniform(-math.pi, math.pi, n_clutter)
    moving = rng_clutter.random(n_clutter) < cfg.clutter_moving_fraction
    v_c = np.where(moving, rng_clutter.uniform(-cfg.clutter_speed_max_mps, cfg.clutter_speed_max_mps,
                                               n_clutter), 0.0)
    z = rng_refl.standard_normal(n_clutter)
    refl_db = cfg.clutter_mean_reflectivity_dbm2 + cfg.clutter_reflectivity_std_db * z
    clutter = TargetSet(CLUTTER, r_c, az_c, v_c, db_to_linear(refl_db))

    return Scenario(radio, vues, clutter, rho, cfg.clutter_mean_reflectivity_dbm2,
                    cfg.clutter_reflectivity_std_db, cfg.bs_elements, cfg.ris_elements,
                    cfg.code_length, seed, cfg.fov_half_width_rad)


def delay_doppler(t: Target, radio: RadioParams) -> tuple[float, float]:
    """One-way delay R/c and Doppler shift f0*V/c."""
    return t.range_m / SPEED_OF_LIGHT, radio.carrier_frequency_hz * t.radial_velocity_mps / SPEED_OF_LIGHT

