"""Check suites: each runs its experiments and returns a report of named criteria."""

from __future__ import annotations

import json
import math
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from . import mixing, montecarlo
from .config import SUITES, ExperimentConfig
from .excursion import (
    b_entry_for_depth,
    check_convexity,
    fit_power_law,
    inverse_delta_functional,
    predict_delta_min,
    simulate_excursion,
    winding_identity_check,
    write_ensemble_csv,
)
from .geometry import ProfileSurface, cusp_volume, gaussian_curvature, inverse_cusp_distance, level_length
from .parallel import derive_seed, mapper

SUITE_KEYS = {name: i for i, name in enumerate(SUITES)}


def criterion(name: str, anchor: str, measured: float, bound: str, passed: bool) -> dict:
    return {"name": name, "anchor": anchor, "measured": float(measured), "bound": bound,
            "passed": bool(passed)}


def _rtag(r: float) -> str:
    return f"r={r:g}"


# geometry

def _conservation_item(r, x_max, tol, seed, index):
    surface = ProfileSurface(r, x_max)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    delta_entry = surface.delta0 - surface.collar_halfwidth * rng.random()
    b = 10.0 ** rng.uniform(-6.0, math.log10(0.999))
    orientation = 1 if rng.random() < 0.5 else -1
    rec = simulate_excursion(surface, delta_entry, b, tol=tol, orientation=orientation,
                             keep_trajectory=True)
    return rec.trajectory.clairaut_drift, rec.trajectory.speed_drift


def run_geometry(cfg: ExperimentConfig, seed: int, pmap: Callable, out: Path) -> list:
    crit = []
    s = cfg.surface
    for r in s.r_values:
        surface = ProfileSurface(r, s.x_max)
        delta = np.logspace(-4, -2, 201)
        x = inverse_cusp_distance(surface, delta)
        dev = np.max(np.abs(gaussian_curvature(surface, x) * delta ** 2 / (r * (r - 1)) + 1.0))
        crit.append(criterion(f"K·δ² → −r(r−1) [{_rtag(r)}]", "curvature expansion in the cusp distance",
                              dev, "<= 0.05", dev <= 0.05))
        B = np.logspace(-4, -2, 9)
        vol = np.asarray(cusp_volume(surface, B)) / (2 * math.pi * B ** (r + 1) / (r + 1))
        ell = np.asarray(level_length(surface, B)) / (2 * math.pi * B ** r)
        dv, dl = float(np.max(np.abs(vol - 1))), float(np.max(np.abs(ell - 1)))
        crit.append(criterion(f"vol(δ ≤ B) / (2πB^(r+1)/(r+1)) → 1 [{_rtag(r)}]",
                              "cusp volume asymptotics", dv, "<= 0.01", dv <= 0.01))
        crit.append(criterion(f"ℓ(B) / (2πB^r) → 1 [{_rtag(r)}]", "level length asymptotics",
                              dl, "<= 0.01", dl <= 0.01))
        drifts = pmap(partial(_conservation_item, r, s.x_max, s.tol, derive_seed(seed, int(r * 1000))),
                      range(cfg.geometry.n_random_excursions))
        cd = max(d[0] for d in drifts)
        sd = max(d[1] for d in drifts)
        crit.append(criterion(f"Clairaut drift [{_rtag(r)}]", "Clairaut integral conservation",
                              cd, "<= 1e-08", cd <= 1e-8))
        crit.append(criterion(f"speed drift [{_rtag(r)}]", "unit speed conservation",
                              sd, "<= 1e-08", sd <= 1e-8))
    return crit


# excursions

def _excursion_item(r, x_max, tol, b):
    surface = ProfileSurface(r, x_max)
    rec = simulate_excursion(surface, surface.delta0, b, tol=tol, keep_trajectory=True)
    ident = winding_identity_check(rec.trajectory)
    rel = abs(ident.lhs - ident.rhs) / abs(ident.rhs) if ident.rhs else abs(ident.lhs)
    predicted = predict_delta_min(surface, surface.delta0, b)
    convex = check_convexity(rec.trajectory)
    return replace(rec, trajectory=None), abs(rec.delta_min / predicted - 1.0), bool(convex), rel


def run_excursion(cfg: ExperimentConfig, seed: int, pmap: Callable, out: Path) -> list:
    crit = []
    s, e = cfg.surface, cfg.excursion
    for r in s.r_values:
        surface = ProfileSurface(r, s.x_max)
        b_depth = np.logspace(-6, math.log10(0.5), e.n_depth_samples)
        D = np.logspace(1, 4, e.n_winding_samples)
        b_wind = np.array([b_entry_for_depth(surface, surface.delta0, d) for d in D])
        res = pmap(partial(_excursion_item, r, s.x_max, s.tol), list(b_depth) + list(b_wind))
        depth, wind = res[: b_depth.size], res[b_depth.size:]
        err = max(x[1] for x in depth)
        crit.append(criterion(f"δ_min vs Clairaut prediction [{_rtag(r)}]",
                              "excursion depth from the Clairaut relation", err, "<= 0.02", err <= 0.02))
        ratio = max(x[0].duration / x[0].delta_entry for x in res)
        crit.append(criterion(f"duration / δ_entry [{_rtag(r)}]", "exit time at most twice the entry level",
                              ratio, "<= 2.1", ratio <= 2.1))
        conv = float(np.mean([x[2] for x in res]))
        crit.append(criterion(f"convexity of δ along excursions [{_rtag(r)}]",
                              "convexity of the cusp distance", conv, "== 1", conv == 1.0))
        fit = fit_power_law([(x[0].D, x[0].winding) for x in wind])
        crit.append(criterion(f"w ≍ D^(r−1) slope [{_rtag(r)}]", "winding number power law",
                              fit.slope, f"{r - 1:g} ± 0.05", abs(fit.slope - (r - 1)) <= 0.05))
        ident = max(x[3] for x in wind)
        crit.append(criterion(f"winding identity [{_rtag(r)}]", "winding integral identity",
                              ident, "<= 1e-06", ident <= 1e-6))
        if r == e.log_law_r:
            h = inverse_delta_functional([x[0] for x in wind])
            crit.append(criterion(f"∫dt/δ linear in log D [{_rtag(r)}]", "logarithmic hyperbolic distance",
                                  h.r_squared, "r² > 0.99", h.r_squared > 0.99))
        write_ensemble_csv([x[0] for x in res], out / f"excursions_r{r:g}.csv")
    return crit


# mixing

def first_cosine(u):
    x = u[:, 0] if u.ndim == 2 else u
    return np.cos(2.0 * np.pi * x)


def identity(u):
    return u[:, 0] if u.ndim == 2 else u


def run_mixing(cfg: ExperimentConfig, seed: int, pmap: Callable, out: Path) -> list:
    crit = []
    m = cfg.mixing
    T_grid = np.unique(np.round(np.logspace(math.log10(m.variance_T_min), math.log10(m.variance_T_max), 13)))
    flows = [("doubling", {}, first_cosine), ("catmap", {}, first_cosine)]
    flows += [("intermittent", {"alpha": a}, identity) for a in m.variance_intermittency]
    for i, (kind, params, f) in enumerate(flows):
        flow = mixing.create_flow(kind, params)
        res = mixing.variance_growth_experiment(flow, f, T_grid, m.variance_orbits,
                                                derive_seed(seed, 1, i), mapper=pmap)
        limit = res.expected_exponent + 0.1
        tag = kind if not params else f"{kind} α={params['alpha']:.4g}"
        crit.append(criterion(f"Var growth slope [{tag}]", "variance of ergodic integrals",
                              res.slope, f"<= {limit:.4g}", res.slope <= limit))
        res.to_csv(out / f"variance_{kind}{'' if not params else '_%.4g' % params['alpha']}.csv")
    errs = [abs(mixing.closed_form_double_integral(C, T) / mixing.double_integral_quadrature(C, T) - 1)
            for C in (0.5, 1.0, 1.5, 2.0) for T in (1.0, 10.0, 100.0)]
    crit.append(criterion("closed-form double integral vs quadrature", "decay kernel double integral",
                          max(errs), "<= 1e-06", max(errs) <= 1e-6))
    flow = mixing.create_flow(m.kind, {"alpha": m.intermittency} if m.kind == "intermittent" else {})
    eff = mixing.EffectiveAverageConfig(m.alpha, m.m, m.xi, m.k_max, m.k0)
    rep = mixing.effective_sandwich_experiment(flow, mixing.BumpFamily(m.theta), eff,
                                               m.sandwich_orbits, derive_seed(seed, 2), mapper=pmap)
    rep.to_json(out / "sandwich.json")
    crit.append(criterion(f"sandwich holds for k ≥ {m.k0} [{m.kind}]", "effective ergodic theorem",
                          rep.fraction_clean, ">= 0.95", rep.fraction_clean >= 0.95))
    return crit


# surrogate geodesics

def run_montecarlo(cfg: ExperimentConfig, seed: int, pmap: Callable, out: Path) -> list:
    crit = []
    mc, s = cfg.montecarlo, cfg.surface
    window = montecarlo.AcceptanceWindow(mc.epsilon, mc.c)
    tail = montecarlo.tail_law_check(montecarlo.ReturnProcess(mc.gap_law, mc.mu_gap, seed))
    crit.append(criterion("R·P(b ≤ 1/R) band", "entry-angle tail",
                          float(np.max(np.abs(np.log2(tail)))), "<= 1 (log2)",
                          bool(np.all((tail >= 0.5) & (tail <= 2.0)))))
    for r in s.r_values:
        summaries = montecarlo.ensemble(r, mc.T_max, mc.n_trajectories, derive_seed(seed, int(r * 1000)),
                                        mc.mu_gap, mc.gap_law, s.x_max, mapper=pmap)
        montecarlo.write_summary_csv(summaries, out / f"geodesics_r{r:g}.csv")
        w = montecarlo.max_excursion_window_check(summaries, window, r, mc.t_min)
        crit.append(criterion(f"δ_min window containment [{_rtag(r)}]", "deepest excursion window",
                              w.containment, ">= 0.95", w.containment >= 0.95))
        crit.append(criterion(f"δ_min decay exponent [{_rtag(r)}]", "deepest excursion window",
                              w.exponent, f"{1 / r:.4g} ± 0.05", abs(w.exponent - 1 / r) <= 0.05))
        lin = montecarlo.winding_and_distance_linearity(summaries, mc.t_min)
        crit.append(criterion(f"W(T) linear [{_rtag(r)}]", "total winding grows linearly",
                              lin.fit_W.slope, "1 ± 0.05", abs(lin.fit_W.slope - 1) <= 0.05))
        crit.append(criterion(f"dist_hyp(T) linear [{_rtag(r)}]", "hyperbolic distance grows linearly",
                              lin.fit_H.slope, "1 ± 0.05", abs(lin.fit_H.slope - 1) <= 0.05))
        if r == 3:
            sv = montecarlo.sullivan_comparison(summaries, 3.0, window, mc.t_min)
            crit.append(criterion("y_max exponent [r=3]", "maximum imaginary part window",
                                  sv.exponent, "0.6667 ± 0.07", abs(sv.exponent - 2 / 3) <= 0.07))
            crit.append(criterion("y_max window containment [r=3]", "maximum imaginary part window",
                                  sv.containment, ">= 0.95", sv.containment >= 0.95))
    return crit


RUNNERS = {"geometry": run_geometry, "excursion": run_excursion, "mixing": run_mixing,
           "montecarlo": run_montecarlo}

_SECTION_FOR = {"geometry": ("surface", "geometry"), "excursion": ("surface", "excursion"),
                "mixing": ("mixing",), "montecarlo": ("surface", "montecarlo")}


def run_suite(name: str, cfg: ExperimentConfig, workers: int, out: Path) -> dict:
    """Run one suite and write ``<name>_report.json`` under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    seed = derive_seed(cfg.seed, SUITE_KEYS[name])
    crit = RUNNERS[name](cfg, seed, mapper(workers), out)
    full = cfg.to_dict()
    report = {
        "suite": name,
        "master_seed": cfg.seed,
        "suite_seed": seed,
        "config": {k: full[k] for k in _SECTION_FOR[name]},
        "criteria": crit,
        "passed": all(c["passed"] for c in crit),
    }
    path = out / f"{name}_report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    return report
