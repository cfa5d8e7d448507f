"""Experiment configuration: flat JSON documents with per-experiment sweep defaults.

Every key is optional. Radio keys default to the reference deployment (70 GHz,
61 MHz, 20 dBm transmit power, -82 dBm noise, 100 m cell, 16 VUEs); sweep keys
default per experiment kind to the layouts of the detection, sizing and
association studies. Powers stay in dBm / dBm^2 / dB in the document and are
converted to linear units in :mod:`ris_t2u.scenario` only.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .codebook import classical_decoder_radius, default_decoder_radius
from .errors import ConfigError
from .scenario import RadioParams, ScenarioConfig, code_length_for

KINDS = ("roc", "ris-size", "pca", "single-run")
FORMATS = ("csv", "json")

ROC_P_FA_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0)

# sweep defaults per kind; keys missing here fall back to the field default
KIND_DEFAULTS = {
    "roc": dict(bs_elements=[64], clutter_density_per_m2=[0.2, 0.4], beta_c_db=[-20.0, -10.0, 0.0],
                p_fa=list(ROC_P_FA_GRID), trials=500),
    "ris-size": dict(bs_elements=[64], clutter_density_per_m2=[0.05, 0.1, 0.2, 0.3, 0.4],
                     clutter_reflectivity_dbm2=[0.0, 4.0, 8.0], p_cd_target=[0.9, 0.99],
                     p_fa=[0.05], trials=1000),
    "pca": dict(bs_elements=[16, 32, 64], clutter_density_per_m2=[0.0, 0.1],
                clutter_reflectivity_dbm2=[8.0], sigma_gps_m=[1.0, 4.0, 8.0], p_fa=[0.05], trials=1000),
    "single-run": dict(bs_elements=[64], clutter_density_per_m2=[0.1], clutter_reflectivity_dbm2=[8.0],
                       sigma_gps_m=[1.0, 4.0, 8.0], p_fa=[0.05], trials=1),
}

LIST_KEYS = ("bs_elements", "ris_elements", "clutter_density_per_m2", "clutter_reflectivity_dbm2",
             "beta_c_db", "sigma_gps_m", "p_fa", "p_cd_target")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "single-run"
    # radio
    carrier_frequency_hz: float = 70e9
    bandwidth_hz: float = 61e6
    tx_power_dbm: float = 20.0
    noise_power_dbm: float = -82.0
    cell_radius_m: float = 100.0
    time_bandwidth_product: float = 1024.0
    repetition_factor: int = 8
    # deployment
    num_vues: int = 16
    bs_elements: tuple = (64,)
    ris_elements: tuple = (94 * 94,)
    clutter_density_per_m2: tuple = (0.0,)
    clutter_reflectivity_dbm2: tuple = (8.0,)
    clutter_reflectivity_std_db: float = 0.0
    beta_c_db: tuple = (-10.0,)
    fov_half_width_deg: float = 60.0
    vue_placement: str = "uniform"
    min_vue_separation_m: float = 5.0
    # detection / association
    p_fa: tuple = (0.05,)
    p_cd_target: tuple = (0.99,)
    sigma_gps_m: tuple = (1.0, 4.0, 8.0)
    decoder_radius: object = "default"  # "default", "classical" or an integer
    nonreflect_variant: str = "random"
    leakage_power_ratio: float = 0.0
    max_ris_side: int = 400
    # run control
    trials: int = 1
    seed: int = 0
    output: str | None = None
    format: str = "csv"

    @property
    def code_length(self) -> int:
        return code_length_for(self.num_vues)

    @property
    def radio(self) -> RadioParams:
        return RadioParams(carrier_frequency_hz=self.carrier_frequency_hz, bandwidth_hz=self.bandwidth_hz,
                           tx_power_dbm=self.tx_power_dbm, noise_power_dbm=self.noise_power_dbm,
                           ue_noise_power_dbm=self.noise_power_dbm, cell_radius_m=self.cell_radius_m,
                           time_bandwidth_product=self.time_bandwidth_product,
                           repetition_factor=self.repetition_factor,
                           false_alarm_target=min(max(self.p_fa[0], 1e-6), 1 - 1e-6))

    def decoder_radius_value(self) -> int:
        if self.decoder_radius == "default":
            return default_decoder_radius(self.code_length)
        if self.decoder_radius == "classical":
            return classical_decoder_radius(self.code_length)
        return int(self.decoder_radius)

    def scenario(self, bs_elements: int | None = None, ris_elements: int | None = None,
                 rho: float | None = None, clutter_reflectivity_dbm2: float | None = None) -> ScenarioConfig:
        """Scenario template for one sweep point (first sweep value where not given)."""
        return ScenarioConfig(
            radio=self.radio,
            num_vues=self.num_vues,
            bs_elements=int(self.bs_elements[0] if bs_elements is None else bs_elements),
            ris_elements=int(self.ris_elements[0] if ris_elements is None else ris_elements),
            clutter_density_per_m2=float(self.clutter_density_per_m2[0] if rho is None else rho),
            clutter_mean_reflectivity_dbm2=float(self.clutter_reflectivity_dbm2[0]
                                                 if clutter_reflectivity_dbm2 is None
                                                 else clutter_reflectivity_dbm2),
            clutter_reflectivity_std_db=self.clutter_reflectivity_std_db,
            fov_half_width_deg=self.fov_half_width_deg,
            vue_placement=self.vue_placement,
            min_vue_separation_m=self.min_vue_separation_m,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of everything except output location and format."""
        d = self.to_dict()
        d.pop("output")
        d.pop("format")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def _as_number(key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    if integer:
        if int(v) != v:
            raise ConfigError(key, f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _as_list(key, v, integer=False):
    items = v if isinstance(v, (list, tuple)) else [v]
    if not items:
        raise ConfigError(key, "sweep list must not be empty")
    return tuple(_as_number(f"{key}[{i}]", x, integer) for i, x in enumerate(items))


def _coerce(key, v):
    if key in LIST_KEYS:
        return _as_list(key, v, integer=key in ("bs_elements", "ris_elements"))
    if key in ("experiment", "vue_placement", "nonreflect_variant", "format"):
        if not isinstance(v, str):
            raise ConfigError(key, f"expected a string, got {v!r}")
        return v
    if key == "output":
        if v is not None and not isinstance(v, str):
            raise ConfigError(key, f"expected a path string, got {v!r}")
        return v
    if key == "decoder_radius":
        if v in ("default", "classical"):
            return v
        return _as_number(key, v, integer=True)
    integer = key in ("repetition_factor", "num_vues", "trials", "seed", "max_ris_side")
    return _as_number(key, v, integer)


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in KINDS:
        raise ConfigError("experiment", f"must be one of {KINDS}, got {cfg.experiment!r}")
    if cfg.format not in FORMATS:
        raise ConfigError("format", f"must be one of {FORMATS}")
    if cfg.trials < 1:
        raise ConfigError("trials", "must be >= 1")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    for i, r in enumerate(cfg.clutter_density_per_m2):
        if r < 0:
            raise ConfigError(f"clutter_density_per_m2[{i}]", "must be >= 0")
    for i, n in enumerate(cfg.bs_elements):
        if n < 1:
            raise ConfigError(f"bs_elements[{i}]", "must be >= 1")
        if n < cfg.num_vues:
            raise ConfigError(f"bs_elements[{i}]", f"N = {n} cannot serve K = {cfg.num_vues} sensing beams")
    for i, m in enumerate(cfg.ris_elements):
        if m < 1 or math.isqrt(m) ** 2 != m:
            raise ConfigError(f"ris_elements[{i}]", f"{m} is not a perfect square")
    for i, s in enumerate(cfg.sigma_gps_m):
        if s < 0:
            raise ConfigError(f"sigma_gps_m[{i}]", "must be >= 0")
    grid_ok = (lambda p: 0.0 <= p <= 1.0) if cfg.experiment == "roc" else (lambda p: 0.0 < p < 1.0)
    for i, p in enumerate(cfg.p_fa):
        if not grid_ok(p):
            raise ConfigError(f"p_fa[{i}]", f"out of range: {p}")
    for i, p in enumerate(cfg.p_cd_target):
        if not 0.0 < p < 1.0:
            raise ConfigError(f"p_cd_target[{i}]", "must lie in (0, 1)")
    if cfg.leakage_power_ratio < 0:
        raise ConfigError("leakage_power_ratio", "must be >= 0")
    if cfg.nonreflect_variant not in ("random", "specular"):
        raise ConfigError("nonreflect_variant", "must be 'random' or 'specular'")
    if not isinstance(cfg.decoder_radius, str) and not 0 <= cfg.decoder_radius <= cfg.code_length // 2:
        raise ConfigError("decoder_radius", f"must lie in [0, {cfg.code_length // 2}]")
    if cfg.max_ris_side < 1:
        raise ConfigError("max_ris_side", "must be >= 1")
    # radio and deployment checks live with the scenario types
    try:
        cfg.scenario()
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError("scenario", str(e)) from e


def load_document(path) -> dict:
    """Read a JSON config document; I/O errors propagate, malformed JSON is a ConfigError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(doc, dict):
        raise ConfigError("<document>", f"{path}: top level must be an object")
    return doc


def parse_config(source=None, overrides: dict | None = None, kind: str | None = None) -> ExperimentConfig:
    """Resolve a config from a path or dict, inline overrides, and the experiment kind.

    Precedence: overrides > document > kind defaults > field defaults. ``kind``
    (from a CLI subcommand) wins over the document's ``experiment`` key.
    """
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = dict(source)
    else:
        doc = load_document(source)
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in doc:
        if key not in FIELD_NAMES:
            raise ConfigError(key, "unknown configuration key")
    if kind is not None:
        doc["experiment"] = kind
    exp = _coerce("experiment", doc.get("experiment", ExperimentConfig.experiment))
    if exp not in KINDS:
        raise ConfigError("experiment", f"must be one of {KINDS}, got {exp!r}")
    values = {k: _coerce(k, v) for k, v in KIND_DEFAULTS[exp].items()}
    values.update({k: _coerce(k, v) for k, v in doc.items()})
    cfg = replace(ExperimentConfig(), **values)
    _validate(cfg)
    return cfg
