"""Experiment dispatch: config in, result records out."""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import analytics, engine
from .config import ExperimentConfig
from .errors import ConfigError, ExperimentError
from .results import ResultRecord
from .scenario import build_scenario


def _ci(estimate) -> float:
    return estimate.half_width


def _roc(cfg: ExperimentConfig, rec):
    out = []
    for n, m, rho in itertools.product(cfg.bs_elements, cfg.ris_elements, cfg.clutter_density_per_m2):
        template = cfg.scenario(bs_elements=n, ris_elements=m)
        for beta in cfg.beta_c_db:
            curve = analytics.roc_curve(template, beta, rho, cfg.p_fa, drops=cfg.trials, seed=cfg.seed)
            for pf_in, pcd, half in zip(cfg.p_fa, curve.p_cd, curve.p_cd_half_width):
                out.append(rec("pcd", float(pcd), float(half), clutter_density_per_m2=rho, beta_c_db=beta,
                               bs_elements=n, ris_elements=m, p_fa=pf_in))
    return out


def _ris_size(cfg: ExperimentConfig, rec):
    out = []
    for n, rho, refl in itertools.product(cfg.bs_elements, cfg.clutter_density_per_m2,
                                          cfg.clutter_reflectivity_dbm2):
        template = cfg.scenario(bs_elements=n)
        reports = analytics.sizing_reports(template, rho, refl, cfg.trials, cfg.seed)
        for pcd_t, pfa_t in itertools.product(cfg.p_cd_target, cfg.p_fa):
            size = analytics.ris_size_for_target(rho, refl, pcd_t, pfa_t, template=template,
                                                 max_side=cfg.max_ris_side, reports=reports)
            coords = dict(clutter_density_per_m2=rho, clutter_reflectivity_dbm2=refl, bs_elements=n,
                          p_cd_target=pcd_t, p_fa=pfa_t)
            length = math.inf if size.saturated else float(size.side_length_m)
            out.append(rec("L_ris", length, None, ris_elements=size.ris_elements, **coords))
            out.append(rec("pcd", float(size.achieved_pcd), None, ris_elements=size.ris_elements, **coords))
    return out


def _pca(cfg: ExperimentConfig, rec):
    out = []
    p_fa = cfg.p_fa[0]
    for rho, refl, m, n in itertools.product(cfg.clutter_density_per_m2, cfg.clutter_reflectivity_dbm2,
                                             cfg.ris_elements, cfg.bs_elements):
        template = cfg.scenario(bs_elements=n, ris_elements=m, rho=rho, clutter_reflectivity_dbm2=refl)
        est = engine.estimate_pcd_pca(template, cfg.trials, cfg.seed, p_fa=p_fa, sigma_gps=cfg.sigma_gps_m,
                                      decoder_radius=cfg.decoder_radius_value(),
                                      nonreflect_variant=cfg.nonreflect_variant,
                                      leakage_power_ratio=cfg.leakage_power_ratio)
        coords = dict(clutter_density_per_m2=rho, clutter_reflectivity_dbm2=refl, bs_elements=n,
                      ris_elements=m, p_fa=p_fa)
        out.append(rec("pcd", est.pcd.value, _ci(est.pcd), method="ris", **coords))
        out.append(rec("pca", est.pca.value, _ci(est.pca), method="ris", **coords))
        for s, e in est.pca_gps.items():
            out.append(rec("pca", e.value, _ci(e), method="gps", sigma_gps_m=s, **coords))
    return out


def _single_run(cfg: ExperimentConfig, rec):
    out = _pca(cfg, rec)
    # coupled-target SINR of each VUE beam in the first trial's drop
    for rho, refl, m, n in itertools.product(cfg.clutter_density_per_m2, cfg.clutter_reflectivity_dbm2,
                                             cfg.ris_elements, cfg.bs_elements):
        template = cfg.scenario(bs_elements=n, ris_elements=m, rho=rho, clutter_reflectivity_dbm2=refl)
        scenario = build_scenario(template, [cfg.seed, 0, 0])
        beams = engine.build_beamformers(scenario)
        reports = engine.vue_snr_reports(scenario, beams, np.random.default_rng([cfg.seed, 0, 1]))
        for q, r in enumerate(reports):
            out.append(rec("snr_db", float(r.snr_db), None, clutter_density_per_m2=rho,
                           clutter_reflectivity_dbm2=refl, bs_elements=n, ris_elements=m, vue=q))
    return out


RUNNERS = {"roc": _roc, "ris-size": _ris_size, "pca": _pca, "single-run": _single_run}


def run_experiment(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Run every sweep point of ``cfg`` and return one record per evaluated metric."""
    h = cfg.config_hash()

    def rec(metric, value, half, **coords):
        return ResultRecord(cfg.experiment, metric, value, half, cfg.trials, cfg.seed, h, coords)

    try:
        return RUNNERS[cfg.experiment](cfg, rec)
    except ConfigError as e:
        raise ConfigError(e.key, f"{cfg.experiment}: {e.message}") from e
    except (ValueError, ArithmeticError) as e:
        raise ExperimentError(f"{cfg.experiment}: {e}") from e

