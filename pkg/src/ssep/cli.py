"""Command-line experiments wiring the modules into reproducible artifacts.

    ssep <experiment> --config FILE [--seed S] [--out DIR] [--threads K]

Experiments: hydro, hydrostatic, corr, duality, gw-alpha, dual-stats,
engines-equal. Each run writes CSV artifacts plus summary.json into the
output directory; every CSV carries a JSON provenance header line. Exit
codes: 0 success, 2 when a configured acceptance band is violated, 1 on
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dual, exact, forward, gw, marks, pde, reports
from .params import ModelParams, load_params
from .profiles import InitialProfile

EXPERIMENTS = ("hydro", "hydrostatic", "corr", "duality", "gw-alpha",
               "dual-stats", "engines-equal")

TEST_FUNCTIONS = {
    "1": lambda u: np.ones_like(u),
    "u": lambda u: u,
    "sin_pi_u": lambda u: np.sin(np.pi * u),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    params: ModelParams
    profile: InitialProfile
    t_list: list
    n_samples: int
    seed: int
    out_dir: Path
    threads: int
    options: dict = field(default_factory=dict)

    @classmethod
    def load(cls, experiment: str, path, seed=None, out=None, threads=None) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        if "params" not in raw:
            raise ConfigError("config must contain a 'params' object")
        params = load_params(raw["params"])
        profile = InitialProfile.from_dict(raw.get("profile", {"kind": "constant", "value": 0.5}))
        t_raw = raw.get("t", [0.1])
        t_list = [float(t) for t in (t_raw if isinstance(t_raw, list) else [t_raw])]
        cfg_seed = int(raw.get("seed", 0)) if seed is None else int(seed)
        out_dir = Path(out if out is not None else raw.get("out", f"runs/{experiment}-seed{cfg_seed}"))
        threads = int(raw.get("threads", 1)) if threads is None else int(threads)
        known = {"params", "profile", "t", "n_samples", "seed", "out", "threads", "experiment"}
        options = {k: v for k, v in raw.items() if k not in known}
        return cls(experiment, params, profile, t_list,
                   int(raw.get("n_samples", 1000)), cfg_seed, out_dir, threads, options)

    def meta(self) -> dict:
        return {"experiment": self.experiment, "params": self.params.to_dict(),
                "profile": self.profile.to_dict(), "seed": self.seed,
                "h1_holds": self.params.h1_holds}


def _band_check(violations: list, name: str, value: float, bound: float) -> dict:
    ok = bool(value <= bound)
    if not ok:
        violations.append(f"{name}: {value:.6g} > {bound:.6g}")
    return {"value": value, "bound": bound, "pass": ok}


def _weak_statistics(field_values: np.ndarray, N: int, heat, tags) -> dict:
    """(1/(N-1)) sum_x G(x/N) rho_hat(x) minus the continuum integral, per G."""
    u_sites = np.arange(1, N) / N
    u_fine = np.linspace(0.0, 1.0, 4097)
    rho_fine = np.interp(u_fine, heat.u_grid, heat.values)
    out = {}
    for tag in tags:
        if tag not in TEST_FUNCTIONS:
            raise ConfigError(f"unknown test function {tag!r}")
        g = TEST_FUNCTIONS[tag]
        emp = float(np.mean(g(u_sites) * field_values))
        ref = float(np.trapezoid(g(u_fine) * rho_fine, u_fine))
        out[tag] = {"empirical": emp, "integral": ref, "diff": abs(emp - ref)}
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_hydro(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    violations: list = []
    opts = cfg.options
    x_lo = int(opts.get("x_lo", math.ceil(0.1 * p.N)))
    x_hi = int(opts.get("x_hi", math.floor(0.9 * p.N)))
    tags = opts.get("test_functions", ["1", "u", "sin_pi_u"])
    sup_band = opts.get("sup_band")
    weak_band = opts.get("weak_band")
    results = []
    for i, t in enumerate(cfg.t_list):
        dens = forward.estimate_density(cfg.profile, p, t, cfg.n_samples,
                                        cfg.seed, threads=cfg.threads)
        sol = pde.solve_discrete_density(p, cfg.profile, t_end=t, save_times=[t])
        heat = pde.heat_solution(cfg.profile, p.alpha, p.alpha_prime, t,
                                 np.arange(1, p.N) / p.N, n_modes=int(opts.get("n_modes", 128)))
        sel = (dens.sites >= x_lo) & (dens.sites <= x_hi)
        sup_dist = float(np.abs(dens.values - heat.values)[sel].max())
        weak = _weak_statistics(dens.values, p.N, heat, tags)
        entry = {"t": t, "sup_bulk_distance": sup_dist,
                 "bulk_window": [x_lo, x_hi], "weak_statistics": weak,
                 "mc_stderr_max": float(dens.stderr.max())}
        if sup_band is not None:
            entry["sup_check"] = _band_check(violations, f"sup distance at t={t}",
                                             sup_dist, float(sup_band))
        if weak_band is not None:
            for tag, w in weak.items():
                entry[f"weak_check_{tag}"] = _band_check(
                    violations, f"weak statistic G={tag} at t={t}", w["diff"], float(weak_band))
        results.append(entry)
        suffix = "" if i == 0 else f"_t{i}"
        reports.write_density_csv(cfg.out_dir / f"density{suffix}.csv", dens, cfg.meta())
        disc_full = np.interp(np.arange(1, p.N), sol.sites, sol.values[-1])
        stat = pde.stationary_profile(p.alpha, p.alpha_prime, np.arange(1, p.N) / p.N)
        reports.write_reference_csv(cfg.out_dir / f"pde{suffix}.csv", np.arange(1, p.N),
                                    disc_full, heat.values, stat,
                                    {**cfg.meta(), "t": t})
    return {"experiment": "hydro", "config": cfg.meta(), "results": results}, violations


def run_hydrostatic(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    opts = cfg.options
    violations: list = []
    burn_in = float(opts.get("burn_in", 2.0))
    t_end = float(opts.get("t_end", 6.0))
    n_traj = int(opts.get("n_traj", max(1, cfg.n_samples // 256)))
    dens = forward.time_averaged_density(cfg.profile, p, burn_in, t_end, n_traj,
                                         cfg.seed, threads=cfg.threads)
    u = dens.sites / p.N
    target = pde.stationary_profile(p.alpha, p.alpha_prime, u)
    l2 = float(np.sqrt(np.mean((dens.values - target) ** 2)))
    sup = float(np.abs(dens.values - target).max())
    summary = {"experiment": "hydrostatic", "config": cfg.meta(),
               "burn_in": burn_in, "t_end": t_end, "n_traj": n_traj,
               "l2_distance": l2, "sup_distance": sup,
               "mc_stderr_max": float(np.nanmax(dens.stderr))}
    if opts.get("l2_band") is not None:
        summary["l2_check"] = _band_check(violations, "hydrostatic L2 distance",
                                          l2, float(opts["l2_band"]))
    reports.write_density_csv(cfg.out_dir / "density.csv", dens, cfg.meta())
    reports.write_reference_csv(cfg.out_dir / "pde.csv", dens.sites,
                                np.interp(dens.sites, np.arange(3, p.N - 2),
                                          pde.discrete_linear_profile(p)),
                                target, target, cfg.meta())
    return summary, violations


def run_corr(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    opts = cfg.options
    violations: list = []
    t = cfg.t_list[0]
    min_dist = int(opts.get("min_distance", math.ceil(0.2 * p.N)))
    pairs = forward.all_far_pairs(p, min_dist)
    corr = forward.estimate_correlation(cfg.profile, p, t, cfg.n_samples, cfg.seed,
                                        pair_set=pairs, threads=cfg.threads)
    abs_cov = np.abs(corr.values)
    max_abs = float(abs_cov.max())
    # noise band for a maximum over n_pairs estimates: per-pair threshold at
    # the Bonferroni-corrected level (total false-alarm budget 1%)
    from scipy.stats import norm
    z_band = float(norm.isf(0.005 / len(pairs)))
    band = z_band * float(corr.stderr.max())
    excess = float(np.max(np.maximum(abs_cov - z_band * corr.stderr, 0.0)))
    summary = {"experiment": "corr", "config": cfg.meta(), "t": t,
               "min_distance": min_dist, "n_pairs": int(len(pairs)),
               "max_abs_cov": max_abs, "noise_band": band, "band_z": z_band,
               "excess_over_band": excess}
    if opts.get("excess_band") is not None:
        summary["excess_check"] = _band_check(violations, "correlation excess",
                                              excess, float(opts["excess_band"]))
    if opts.get("pde_delta") is not None:
        delta = float(opts["pde_delta"])
        sol = pde.solve_correlation_field(p, cfg.profile, delta, t)
        summary["pde_max_abs_far"] = sol.max_abs_over(min_dist)
    reports.write_corr_csv(cfg.out_dir / "corr.csv", corr, cfg.meta())
    return summary, violations


def run_duality(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    opts = cfg.options
    violations: list = []
    T = float(opts.get("horizon", 0.5))
    n_seeds = int(opts.get("n_seeds", cfg.n_samples))
    rng = np.random.default_rng(cfg.seed)
    mismatches = 0
    tree_mismatches = 0
    failures = 0
    rows = []
    for i in range(n_seeds):
        stream = marks.generate(p, T, cfg.seed + i)
        eta0 = (rng.random(p.n_sites) < 0.5).astype(np.uint8)
        x = int(rng.integers(1, p.N))
        t = float(rng.uniform(0.0, T))
        eta_t = forward.run_graphical(eta0, stream, t)
        resolved = dual.resolve_site(x, t, eta0, stream)
        ok = resolved == eta_t[x - 1]
        mismatches += not ok
        tree, _ = dual.build_determination_tree(
            x, p, marks.reverse(stream, t), t, eta0=eta0)
        if tree is dual.FAILED:
            failures += 1
            sign = ""
            tree_ok = True
        else:
            sign = dual.solve_tree(tree)
            tree_ok = (sign == "+") == (eta_t[x - 1] == 1)
            tree_mismatches += not tree_ok
        rows.append((cfg.seed + i, x, t, int(eta_t[x - 1]), int(resolved),
                     sign, int(tree is dual.FAILED), int(ok and tree_ok)))
    reports.write_csv(cfg.out_dir / "duality.csv", {**cfg.meta(), "horizon": T},
                      ["seed", "x", "t", "forward", "resolved", "tree_sign",
                       "failed", "match"], rows)
    summary = {"experiment": "duality", "config": cfg.meta(), "horizon": T,
               "n_seeds": n_seeds, "resolver_mismatches": mismatches,
               "tree_mismatches": tree_mismatches, "failure_count": failures,
               "failure_rate": failures / n_seeds}
    summary["exactness_check"] = _band_check(violations, "duality mismatches",
                                             mismatches + tree_mismatches, 0)
    return summary, violations


def run_gw_alpha(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    opts = cfg.options
    violations: list = []
    results = {}
    for mode in opts.get("modes", ["limit", "finite_N"]):
        a_hat, se = gw.estimate_alpha_gw(p, cfg.n_samples, cfg.seed, mode=mode)
        entry = {"alpha_hat": a_hat, "stderr": se,
                 "fixed_point_residual": gw.fixed_point_residual(p, a_hat)}
        if mode == "limit":
            a = p.alpha
            entry["alpha_closed_form"] = a
            entry["z_score"] = (a_hat - a) / se
            if opts.get("z_band") is not None:
                entry["z_check"] = _band_check(violations, "gw-alpha |z|",
                                               abs(entry["z_score"]), float(opts["z_band"]))
        results[mode] = entry
    summary = {"experiment": "gw-alpha", "config": cfg.meta(),
               "n_samples": cfg.n_samples, "results": results}
    if opts.get("tree_law"):
        tl = opts["tree_law"] if isinstance(opts["tree_law"], dict) else {}
        report = gw.compare_tree_laws(
            p, float(tl.get("t", 1.0)), int(tl.get("n_samples", 20000)),
            cfg.seed + 1, max_size=int(tl.get("max_size", 40)))
        reports.write_summary(cfg.out_dir / "tree_law.json", report)
        summary["tree_law_tv"] = report["tv"]
    reports.write_summary(cfg.out_dir / "gw_alpha.json", summary)
    return summary, violations


def run_dual_stats(cfg: ExperimentConfig) -> tuple[dict, list]:
    p0 = cfg.params
    opts = cfg.options
    violations: list = []
    n_list = [int(n) for n in opts.get("N_list", [p0.N])]
    x = int(opts.get("x", 3))
    n_runs = int(opts.get("n_runs", cfg.n_samples))
    per_n = {}
    for i, N in enumerate(n_list):
        p = ModelParams(**{**p0.to_dict(), "N": N})
        horizon = float(opts.get("horizon", min(4.0, 20.0 * N ** (p.theta - 1.0))))
        batch = dual.sample_dual_runs(x, p, horizon, n_runs, cfg.seed + i)
        fk = batch.first_event_kinds()
        has = fk >= 0
        death_frac = float(np.isin(fk[has], [0, 1]).mean()) if has.any() else float("nan")
        per_n[N] = {
            "horizon": horizon,
            "p_kappa_gt_logN": float((batch.kappa > math.log(N)).mean()),
            "p_lifespan_gt_threshold": float(
                (batch.lifespan > N ** (-p.theta_hat / 2.0)).mean()),
            "lifespan_threshold": N ** (-p.theta_hat / 2.0),
            "failure_rate": float(batch.failed.mean()),
            "hit_horizon_rate": float(batch.hit_horizon.mean()),
            "death_fraction_first_event": death_frac,
            "mean_kappa": float(batch.kappa.mean()),
            "mean_lifespan": float(batch.lifespan.mean()),
        }
        if i == 0 or N == max(n_list):
            reports.write_dual_stats_csv(cfg.out_dir / f"dual_stats_N{N}.csv",
                                         batch, cfg.seed + i, cfg.meta())
        if N == n_list[0]:
            reports.write_dual_stats_csv(cfg.out_dir / "dual_stats.csv",
                                         batch, cfg.seed + i, cfg.meta())
    summary = {"experiment": "dual-stats", "config": cfg.meta(), "x": x,
               "n_runs": n_runs, "per_N": per_n}
    if opts.get("monotone_check") and len(n_list) >= 2:
        sigma = math.sqrt(0.25 / n_runs)
        for key in ("p_kappa_gt_logN", "p_lifespan_gt_threshold", "failure_rate"):
            vals = [per_n[N][key] for N in n_list]
            steps_ok = all(vals[j + 1] <= vals[j] + 4.0 * sigma * math.sqrt(2.0)
                           for j in range(len(vals) - 1))
            overall = vals[-1] < vals[0]
            summary[f"monotone_{key}"] = {"values": vals, "steps_ok": steps_ok,
                                          "overall_decrease": overall}
            if not (steps_ok and overall):
                violations.append(f"{key} not non-increasing in N: {vals}")
    return summary, violations


def run_engines_equal(cfg: ExperimentConfig) -> tuple[dict, list]:
    p = cfg.params
    opts = cfg.options
    violations: list = []
    t = cfg.t_list[0]
    n = cfg.n_samples
    cfg_g = forward.final_configurations(cfg.profile, p, t, n, cfg.seed, threads=cfg.threads)
    cfg_r = forward.graphical_replicas(cfg.profile, p, t, n, cfg.seed + 10 ** 6)
    m_g, e_g = forward._mean_stderr(cfg_g)
    m_r, e_r = forward._mean_stderr(cfg_r)
    z_mean = np.abs(m_g - m_r) / np.sqrt(e_g ** 2 + e_r ** 2)
    summary = {"experiment": "engines-equal", "config": cfg.meta(), "t": t,
               "n_replicas": n,
               "max_z_mean_engines": float(z_mean.max())}
    oracle = bool(opts.get("oracle", p.n_sites <= 12))
    if oracle:
        Q = exact.generator_matrix(p)
        pt = exact.transient_distribution(exact.product_distribution(cfg.profile, p), Q, t)
        m_ex = exact.site_means(pt, p.n_sites)
        se = np.sqrt(np.maximum(m_ex * (1 - m_ex), 1e-12) / n)
        summary["max_z_gillespie_vs_exact"] = float(np.max(np.abs(m_g - m_ex) / se))
        summary["max_z_graphical_vs_exact"] = float(np.max(np.abs(m_r - m_ex) / se))
        cov_ex = exact.pair_covariances(pt, p.n_sites)
        iu = np.triu_indices(p.n_sites, k=1)
        cov_g = np.cov(cfg_g.T, ddof=1)[iu]
        cov_r = np.cov(cfg_r.T, ddof=1)[iu]
        se_cov = np.sqrt((np.maximum(m_ex * (1 - m_ex), 1e-12)[iu[0]] *
                          np.maximum(m_ex * (1 - m_ex), 1e-12)[iu[1]] +
                          cov_ex[iu] ** 2) / n)
        summary["max_z_cov_gillespie"] = float(np.max(np.abs(cov_g - cov_ex[iu]) / se_cov))
        summary["max_z_cov_graphical"] = float(np.max(np.abs(cov_r - cov_ex[iu]) / se_cov))
    if opts.get("z_band") is not None:
        zb = float(opts["z_band"])
        for key in [k for k in summary if k.startswith("max_z")]:
            summary[key + "_check"] = _band_check(violations, key, summary[key], zb)
    return summary, violations


RUNNERS = {
    "hydro": run_hydro,
    "hydrostatic": run_hydrostatic,
    "corr": run_corr,
    "duality": run_duality,
    "gw-alpha": run_gw_alpha,
    "dual-stats": run_dual_stats,
    "engines-equal": run_engines_equal,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssep",
        description="Experiments on the exclusion process with slow non-reversible reservoirs")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="replica-level process count")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.experiment, args.config,
                                    seed=args.seed, out=args.out, threads=args.threads)
    except (OSError, ValueError, KeyError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if not cfg.params.h1_holds:
        print("warning: fill rate >= reservoir rate; dual process may not die out",
              file=sys.stderr)
    summary, violations = RUNNERS[cfg.experiment](cfg)
    summary["violations"] = violations
    reports.write_summary(cfg.out_dir / "summary.json", summary)
    if violations:
        for v in violations:
            print(f"band violation: {v}", file=sys.stderr)
        print(f"{cfg.experiment}: FAIL ({len(violations)} band violations) -> {cfg.out_dir}")
        return 2
    print(f"{cfg.experiment}: ok -> {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
