"""Experiment runner: flat-file configs in, CSV/JSON artifacts out.

Every run writes a manifest.json holding the resolved parameters, the seed
and library versions; reruns with the same config and seed are byte-identical
in every artifact (wall time is stored separately in timing.txt so it never
breaks determinism).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

import hyptrap
from hyptrap import diffusion, feynman_kac, fock, geometry, spectral, stats
from hyptrap.feynman_kac import canonical_axis_point
from hyptrap.geometry import HPoint
from hyptrap.ppp import (
    Configuration,
    ConstantPotential,
    FactorPotential,
    PotentialSpec,
    ball_volume,
    sample_configuration,
    theorem_regime_bound,
)

COMMANDS = (
    "sample-ppp",
    "simulate-bm",
    "estimate-z",
    "estimate-rho",
    "phi-profile",
    "q-marginal",
    "doob-compare",
    "radial-oracle",
    "born-check",
    "contour-check",
    "fock-check",
    "full-pipeline",
)

DEFAULTS = {
    "d": 2,
    "kappa": 0.0,
    "a": 1.0,
    "r0": 1.0,
    "vmax": 0.1,
    "planted": [0.0],
    "window_radius": 0.0,   # 0 -> auto from the path budget
    "h": 1e-2,
    "n_paths": 1000,
    "T": 10.0,
    "t_grid": [5.0, 10.0, 20.0],
    "marginal_time": 1.0,
    "probes": [0.0, 0.5, 1.0, 2.0, 4.0],
    "resample_period": 1.0,
    "r_max": 30.0,
    "m_cells": 3000,
    "n_quad": 64,
    "born_kmax": 60,
    "born_z_im": 0.15,
    "fock_volumes": [0.5, 1.0, 2.0],
    "fock_samples": 100_000,
    "n_max": 12,
    "seed": 0,
    "workers": 1,
    "dump_paths": 0,
    "ks_threshold": 0.01,
    "rho_tolerance": 0.02,
    "ratio_sigma": 4.0,
}

_LIST_KEYS = {"planted", "t_grid", "probes", "fock_volumes"}
_INT_KEYS = {"d", "n_paths", "m_cells", "n_quad", "born_kmax", "fock_samples",
             "n_max", "seed", "workers", "dump_paths"}


class ConfigError(ValueError):
    pass


def parse_config(path):
    """Flat key=value file; '#' starts a comment; lists are comma separated."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _LIST_KEYS:
            out[key] = [float(v) for v in value.split(",") if v.strip()]
        elif key in _INT_KEYS:
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def resolve_config(overrides, cli_seed=None, cli_workers=None):
    cfg = dict(DEFAULTS)
    cfg.update(overrides)
    if cli_seed is not None:
        cfg["seed"] = cli_seed
    if cli_workers is not None:
        cfg["workers"] = cli_workers
    if cfg["h"] <= 0 or cfg["h"] > diffusion.MAX_STEP:
        raise ConfigError(f"h must lie in (0, {diffusion.MAX_STEP}]")
    if cfg["d"] < 2:
        raise ConfigError("d must be >= 2")
    return cfg


def path_budget(cfg, horizon):
    """Geodesic radius the paths can plausibly reach by the horizon."""
    start = max(cfg["probes"]) if cfg["probes"] else 0.0
    return start + 0.5 * (cfg["d"] - 1) * horizon + 6.0 * np.sqrt(horizon) + 5.0


def build_scene(cfg, rng=None):
    """Planted + optionally sampled configuration, and its factor potential."""
    d = cfg["d"]
    horizon = max([cfg["T"]] + list(cfg["t_grid"]))
    window = cfg["window_radius"]
    if window <= 0:
        window = path_budget(cfg, horizon) + cfg["r0"]
    planted = [canonical_axis_point(d, r).z for r in cfg["planted"]]
    pts = np.asarray(planted).reshape(-1, d + 1)
    if cfg["kappa"] > 0:
        mean = cfg["kappa"] * ball_volume(d, window)
        if mean > 1e7:
            raise ConfigError(
                f"sampled PPP in this window has mean count {mean:.3g}; "
                "shrink window_radius, kappa or the horizon"
            )
        sampled = sample_configuration(d, window, cfg["kappa"],
                                       rng or np.random.default_rng(cfg["seed"]))
        if len(sampled):
            pts = np.vstack([pts, sampled.points]) if len(pts) else sampled.points
    config = Configuration(pts, window, cfg["kappa"], d)
    spec = PotentialSpec(cfg["a"], cfg["r0"], cfg["vmax"], max(cfg["kappa"], 1e-12))
    return spec, config, FactorPotential(spec, config)


def trap_radial_potential(cfg):
    """The radial profile of the planted-trap potential (single trap at o)."""
    spec = PotentialSpec(cfg["a"], cfg["r0"], cfg["vmax"], 1.0)

    def V(r):
        return np.minimum(spec.v_max, spec.profile(r))

    return V


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(
                repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
                for x in row) + "\n")


def write_manifest(out_dir, command, cfg, extra=None):
    # worker count is an execution detail like wall time: it never affects the
    # numbers, so it stays out of the manifest to keep reruns byte-identical
    params = {k: v for k, v in cfg.items() if k != "workers"}
    manifest = {
        "command": command,
        "parameters": params,
        "seed": cfg["seed"],
        "regime": "theorem-1" if cfg["vmax"] < theorem_regime_bound(cfg["d"]) else "above-threshold",
        "versions": {
            "hyptrap": hyptrap.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    with open(Path(out_dir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_sample_ppp(cfg, out):
    rng = np.random.default_rng(cfg["seed"])
    window = cfg["window_radius"] or 5.0
    config = sample_configuration(cfg["d"], window, cfg["kappa"], rng)
    (out / "configuration.json").write_text(config.to_json() + "\n")
    write_csv(out / "summary.csv", "n_points,window_radius,kappa,mean_count",
              [(len(config), float(window), cfg["kappa"],
                cfg["kappa"] * ball_volume(cfg["d"], window))])
    return {}


def cmd_simulate_bm(cfg, out):
    d, T, h, N = cfg["d"], cfg["T"], cfg["h"], cfg["n_paths"]
    ens = feynman_kac.simulate_tilted_ensemble(
        geometry.origin(d), None, T, h, N, cfg["seed"], workers=cfg["workers"])
    radii = ens.final_radii
    write_csv(out / "radial.csv", "T,mean_r,stderr_r,mean_r_over_T",
              [(T, float(radii.mean()), float(radii.std(ddof=1) / np.sqrt(N)),
                float(radii.mean() / T))])
    if cfg["dump_paths"]:
        rng = np.random.default_rng(cfg["seed"])
        for i in range(min(N, 10)):
            path = diffusion.simulate_path(geometry.origin(d), T, h, rng)
            path.to_csv(out / f"path_{i:03d}.csv")
    return {}


def cmd_estimate_z(cfg, out):
    spec, config, potential = build_scene(cfg)
    est = feynman_kac.estimate_Z(geometry.origin(cfg["d"]), potential, cfg["T"],
                                 cfg["h"], cfg["n_paths"], cfg["seed"],
                                 workers=cfg["workers"])
    write_csv(out / "z.csv", "T,Z,stderr,ess,n_paths",
              [(cfg["T"], est.z_hat, est.stderr, float(est.ensemble.ess), cfg["n_paths"])])
    return {}


def cmd_estimate_rho(cfg, out):
    spec, config, potential = build_scene(cfg)
    est = feynman_kac.estimate_rho(geometry.origin(cfg["d"]), potential,
                                   cfg["t_grid"], cfg["h"], cfg["n_paths"],
                                   cfg["seed"], workers=cfg["workers"])
    write_csv(out / "rho.csv", "rho_hat,rho_stderr,flagged",
              [(est.rho_hat, est.rho_stderr, int(est.diagnostics["flagged"]))])
    write_csv(out / "logz.csv", "T,neg_log_z",
              list(zip(est.diagnostics["T_grid"],
                       [-lz for lz in est.diagnostics["log_z"]])))
    return {"rho_hat": est.rho_hat}


def cmd_phi_profile(cfg, out):
    spec, config, potential = build_scene(cfg)
    probes = [canonical_axis_point(cfg["d"], r) for r in cfg["probes"]]
    table = feynman_kac.estimate_phi_ratio(probes, spec, config, cfg["T"], cfg["h"],
                                           cfg["n_paths"], cfg["seed"],
                                           workers=cfg["workers"])
    write_csv(out / "phi_ratio.csv", "r,ratio,stderr", table)
    return {}


def cmd_q_marginal(cfg, out):
    spec, config, potential = build_scene(cfg)
    qm = feynman_kac.q_marginal(geometry.origin(cfg["d"]), potential,
                                cfg["marginal_time"], cfg["t_grid"], cfg["h"],
                                cfg["n_paths"], cfg["seed"], workers=cfg["workers"])
    rows = []
    for i, r in enumerate(qm.radii):
        rows.append([float(r)] + [float(qm.weights_by_T[T][i]) for T in sorted(qm.weights_by_T)])
    ts = sorted(qm.weights_by_T)
    write_csv(out / "q_marginal.csv", "r," + ",".join(f"w_T{T:g}" for T in ts), rows)
    write_csv(out / "q_stabilization.csv", "T_pair,sup_distance",
              [(f"{a:g}->{b:g}", dist) for (a, b, dist) in
               zip(ts[:-1], ts[1:], qm.sup_distances)])
    return {"sup_distances": qm.sup_distances}


def _oracle(cfg):
    op = spectral.build_radial_operator(cfg["d"], cfg["r_max"], cfg["m_cells"],
                                        trap_radial_potential(cfg))
    return op, spectral.solve_ground_state(op)


def cmd_radial_oracle(cfg, out):
    op, spec_out = _oracle(cfg)
    spectral.eigenpair_to_csv(spec_out, out / "eigenpair.csv")
    h_fn = spectral.survival_harmonic(op)
    write_csv(out / "survival.csv", "r,h",
              list(zip(op.grid.tolist(), h_fn.tolist())))
    write_csv(out / "spectrum.csv", "rho,gap,r_max,m,d",
              [(spec_out.rho, spec_out.gap, cfg["r_max"], cfg["m_cells"], cfg["d"])])
    return {"rho": spec_out.rho, "gap": spec_out.gap}


def cmd_born_check(cfg, out):
    op, spec_out = _oracle(cfg)
    z = spec_out.rho + 1j * cfg["born_z_im"]
    w = np.ones(op.m)
    born, tail = spectral.born_resolvent_apply(op, z, w, cfg["born_kmax"])
    direct = spectral.direct_resolvent_solve(op, z, w)
    rel = float(np.sqrt(op.weighted_dot(born - direct, born - direct))
                / np.sqrt(op.weighted_dot(direct, direct)))
    amplified = spectral.build_radial_operator(
        cfg["d"], cfg["r_max"], cfg["m_cells"],
        lambda r: 100.0 * trap_radial_potential(cfg)(r))
    try:
        spectral.born_resolvent_apply(amplified, z, w, cfg["born_kmax"])
        diverged = 0
    except spectral.BornDivergenceError:
        diverged = 1
    write_csv(out / "born.csv", "z_re,z_im,rel_error,tail_bound,amplified_diverges",
              [(float(np.real(z)), float(np.imag(z)), rel, float(tail), diverged)])
    return {"rel_error": rel, "amplified_diverges": diverged}


def cmd_contour_check(cfg, out):
    op, spec_out = _oracle(cfg)
    center = spec_out.rho
    radius = spec_out.gap / 2.0
    vec, rayleigh = spectral.contour_projector(op, center, radius, cfg["n_quad"])
    diff = vec - spec_out.phi
    err_vec = float(np.sqrt(op.weighted_dot(diff, diff)))
    err_val = abs(rayleigh - spec_out.rho)
    write_csv(out / "contour.csv", "center,radius,n_quad,vec_error,rayleigh_error",
              [(center, radius, cfg["n_quad"], err_vec, err_val)])
    return {"vec_error": err_vec, "rayleigh_error": err_val}


def cmd_fock_check(cfg, out):
    reports = []
    for v in cfg["fock_volumes"]:
        radius = fock.radius_for_volume(cfg["d"], v)
        region = fock.BallRegion(geometry.origin(cfg["d"]), radius)
        for name in ("count", "void"):
            rep = fock.isometry_check(name, region, cfg["d"], n_max=cfg["n_max"],
                                      mc_samples=cfg["fock_samples"], seed=cfg["seed"])
            reports.append(rep)
    with open(out / "fock.json", "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"max_rel_error": max(r["rel_error"] for r in reports)}


def cmd_doob_compare(cfg, out):
    return _pipeline_core(cfg, out, include_rho=False)


def cmd_full_pipeline(cfg, out):
    return _pipeline_core(cfg, out, include_rho=True)


def _pipeline_core(cfg, out, include_rho):
    """Planted-trap end-to-end: oracle -> MC rate -> phi ratios -> Q vs Doob.

    The quantitative targets are the transient-case ground-state pair: decay
    rate zero and the survival harmonic h (the positive solution of
    (-1/2 Lap + V) h = 0), whose Doob transform generates the limiting
    Q-process for a compactly supported trap.
    """
    checks = {}
    op, spec_out = _oracle(cfg)
    spectral.eigenpair_to_csv(spec_out, out / "eigenpair.csv")
    h_surv = spectral.survival_harmonic(op)
    write_csv(out / "survival.csv", "r,h", list(zip(op.grid.tolist(), h_surv.tolist())))

    spec, config, potential = build_scene(cfg)
    d = cfg["d"]
    if include_rho:
        est = feynman_kac.estimate_rho(geometry.origin(d), potential, cfg["t_grid"],
                                       cfg["h"], cfg["n_paths"], cfg["seed"],
                                       workers=cfg["workers"])
        write_csv(out / "rho.csv", "rho_hat,rho_stderr,dirichlet_oracle_rho",
                  [(est.rho_hat, est.rho_stderr, spec_out.rho)])
        checks["rho_near_zero"] = bool(abs(est.rho_hat) <= cfg["rho_tolerance"])
        checks["rho_in_bound"] = bool(
            -3.0 * est.rho_stderr - 1e-9 <= est.rho_hat
            <= potential.v_max + 3.0 * est.rho_stderr)

    # eigenfunction ratios against the survival harmonic
    T = max(cfg["t_grid"])
    probes = [canonical_axis_point(d, r) for r in cfg["probes"]]
    table = feynman_kac.estimate_phi_ratio(probes, spec, config, T, cfg["h"],
                                           cfg["n_paths"], cfg["seed"],
                                           workers=cfg["workers"])
    from scipy.interpolate import PchipInterpolator

    h_interp = PchipInterpolator(op.grid, h_surv)
    h0 = float(h_interp(1e-9))
    rows = []
    ok = True
    for r, ratio, se in table:
        target = float(h_interp(r)) / h0
        rows.append((r, ratio, se, target))
        if abs(ratio - target) > cfg["ratio_sigma"] * max(se, 1e-6):
            ok = False
    write_csv(out / "phi_ratio.csv", "r,ratio,stderr,survival_ratio", rows)
    checks["phi_matches_survival"] = bool(ok)

    # Q-process marginal vs Doob transform of the survival harmonic
    qm = feynman_kac.q_marginal(geometry.origin(d), potential, cfg["marginal_time"],
                                cfg["t_grid"], cfg["h"], cfg["n_paths"], cfg["seed"],
                                workers=cfg["workers"])
    doob_r = feynman_kac.doob_final_radii(
        geometry.origin(d), op.grid, h_surv, cfg["marginal_time"], cfg["h"],
        cfg["n_paths"], cfg["seed"] + 1, workers=cfg["workers"])
    T_star = max(cfg["t_grid"])
    dstat, pval = stats.weighted_ks_2samp(qm.radii, qm.weights_by_T[T_star],
                                          doob_r, np.ones(len(doob_r)))
    write_csv(out / "doob_compare.csv", "t,T,ks_statistic,p_value",
              [(cfg["marginal_time"], T_star, dstat, pval)])
    checks["q_matches_doob"] = bool(pval > cfg["ks_threshold"])
    checks["q_stabilized"] = bool(
        not qm.sup_distances or qm.sup_distances[-1] < 4.0 / np.sqrt(cfg["n_paths"]))

    with open(out / "checks.json", "w") as fh:
        json.dump(checks, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not all(checks.values()):
        failed = [k for k, v in checks.items() if not v]
        raise RuntimeError(f"pipeline cross-checks failed: {failed}")
    return {"checks": checks}


HANDLERS = {
    "sample-ppp": cmd_sample_ppp,
    "simulate-bm": cmd_simulate_bm,
    "estimate-z": cmd_estimate_z,
    "estimate-rho": cmd_estimate_rho,
    "phi-profile": cmd_phi_profile,
    "q-marginal": cmd_q_marginal,
    "doob-compare": cmd_doob_compare,
    "radial-oracle": cmd_radial_oracle,
    "born-check": cmd_born_check,
    "contour-check": cmd_contour_check,
    "fock-check": cmd_fock_check,
    "full-pipeline": cmd_full_pipeline,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hyptrap",
        description="Brownian motion among Poissonian soft traps on H^d",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=str, default=None, help="flat key=value file")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=str, default="out")
    args = parser.parse_args(argv)

    try:
        overrides = parse_config(args.config) if args.config else {}
        cfg = resolve_config(overrides, cli_seed=args.seed, cli_workers=args.workers)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    try:
        extra = HANDLERS[args.command](cfg, out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = time.monotonic() - t0
    write_manifest(out, args.command, cfg, extra={"results": _jsonable(extra)})
    (out / "timing.txt").write_text(f"wall_time_seconds={wall:.3f}\n")
    print(f"{args.command}: artifacts in {out} ({wall:.1f}s)")
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


if __name__ == "__main__":
    sys.exit(main())
