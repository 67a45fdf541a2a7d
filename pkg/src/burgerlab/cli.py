"""Command-line front end.

Every command reads one flat config file, runs one experiment, and writes a
manifest plus its result files into the output directory.  Exit codes:
0 success, 1 acceptance/validation failure, 2 configuration error,
3 numerical failure (blow-up or invalid estimate).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, acceptance
from .artifacts import (ResultsLedger, fmt, write_measure_csv,
                        write_residuals, write_trajectory_bin,
                        write_trajectory_csv)
from .config import (config_to_text, field_from_pairs, pairs_to_text,
                     parse_config)
from .cylinder import ExpFunction, apply_K0, ou_exact_semigroup
from .errors import ConfigError, DomainError, IntegrationError
from .estimators import (chapman_kolmogorov, directional_derivative_crn,
                         estimate_feynman_kac, estimate_Pt,
                         feynman_kac_reconstruction, generator_fd,
                         moment_estimate, sample_terminal_states)
from .measures import (Dirac, DiracMixture, GaussianModes,
                       sample_initial_measure, v_integrability, weak_residual,
                       push_forward)
from .noise import derive_stream, normal_block, ou_decay, ou_step_std
from .solver import SimConfig, simulate
from .spectral import Quadrature, SpectralField

COMMANDS = ("simulate", "ou-validate", "generator-check", "ck-check",
            "feynman-kac", "fokker-planck", "moments", "acceptance")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("BURGERLAB_OUT") or "burgerlab_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sim_config(cv: dict, horizon_key: str = "T") -> SimConfig:
    quad = Quadrature(cv["quad_points"]) if cv["quad_points"] > 0 else None
    return SimConfig(m=cv["m"], dt=cv["dt"], T=cv[horizon_key],
                     drift_enabled=cv["drift"], noise_enabled=cv["noise"],
                     record_stride=cv["record_stride"], quadrature=quad,
                     master_seed=cv["seed"])


def _measure_spec(cv: dict):
    kind = cv["measure"]
    if kind == "dirac":
        return Dirac(field_from_pairs(cv["measure_x0"], cv["m"]))
    if kind == "gaussian_modes":
        return GaussianModes(cv["measure_sigmas"])
    if kind == "mixture":
        atoms = tuple(field_from_pairs(g, cv["m"]) for g in cv["measure_atoms"])
        return DiracMixture(atoms, cv["measure_weights"])
    raise ConfigError(f"unknown measure kind {kind!r}")


class Manifest:
    def __init__(self, command: str, cv: dict, workers: int):
        self.data = {
            "tool": "burgerlab",
            "version": __version__,
            "command": command,
            "seed": cv["seed"],
            "workers": workers,
            "config": config_to_text(cv),
            "started_utc": datetime.now(timezone.utc).isoformat(),
            "artifacts": [],
            "status": "running",
        }

    def finish(self, out_dir: Path, status: str, **extra) -> Path:
        self.data["finished_utc"] = datetime.now(timezone.utc).isoformat()
        self.data["status"] = status
        self.data.update(extra)
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return path


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv)
    x0 = field_from_pairs(cv["x0"], cv["m"])
    traj = simulate(x0, cfg, derive_stream(cv["seed"], 0))
    csv_path = out_dir / "trajectory.csv"
    bin_path = out_dir / "trajectory.bin"
    write_trajectory_csv(csv_path, traj)
    write_trajectory_bin(bin_path, traj)
    manifest.data["artifacts"] = ["trajectory.csv", "trajectory.bin"]
    print(f"wrote {csv_path} ({len(traj.states)} snapshots, m={cfg.m})")
    return EXIT_OK


def cmd_ou_validate(cv, workers, out_dir, manifest):
    """Drift-off oracle battery at config scale: mean vs closed form + KS law."""
    from scipy import stats

    cfg = _sim_config(cv, "t")
    if cfg.drift_enabled:
        cfg = _sim_config({**cv, "drift": False}, "t")
    ledger = ResultsLedger(cv["seed"])
    n = cv["n"]
    x = field_from_pairs(cv["x0"], cv["m"])
    failures = []
    case = 0
    for h_spec in (((1, 1.0),), ((2, 1.0),), ((1, 1.0), (2, 0.5))):
        f = ExpFunction(SpectralField.from_pairs(h_spec, cv["m"]))
        est = estimate_Pt(f, x, cv["t"], n, cfg, workers=workers,
                          stream_offset=case * n)
        exact = ou_exact_semigroup(f, x, cv["t"])
        z = abs(est.mean - exact) / max(est.stderr, 1e-300)
        ledger.add("ou_oracle", cv["t"], pairs_to_text(h_spec),
                   pairs_to_text(cv["x0"]), est.mean, est.stderr, est.n)
        if z > 4.0 or not est.valid:
            failures.append(f"h={pairs_to_text(h_spec)}: z={z:.2f}")
        case += 1

    n_ks = min(n, 10_000)
    sim, aborted = sample_terminal_states(x, cv["t"], n_ks, cfg,
                                          workers=workers,
                                          stream_offset=case * n)
    normals = normal_block(cv["seed"], case * n + n_ks, n_ks, cfg.m)
    exact_samples = (ou_decay(cv["t"], cfg.m) * x.pad_to(cfg.m).coeffs
                     + ou_step_std(cv["t"], cfg.m) * normals)
    for k in range(min(4, cfg.m)):
        p = stats.ks_2samp(sim[:, k], exact_samples[:, k]).pvalue
        if p <= 0.01:
            failures.append(f"KS mode {k + 1}: p={p:.4f}")
    if aborted:
        failures.append(f"{aborted} aborted paths")

    manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
    ledger.write(out_dir)
    if failures:
        print("ou-validate FAILED: " + "; ".join(failures))
        return EXIT_FAILED
    print(f"ou-validate passed ({case} oracle cases + KS modes 1-4)")
    return EXIT_OK


def cmd_generator_check(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv, "t")
    ledger = ResultsLedger(cv["seed"])
    f = ExpFunction(SpectralField.from_pairs(cv["h"], cv["m"]))
    x = field_from_pairs(cv["x0"], cv["m"])
    t_grid = cv["t_grid"]
    cfg = cfg.with_horizon(max(t_grid))
    start = time.perf_counter()
    est = generator_fd(f, x, t_grid, cv["n"], cfg, workers=workers)
    wall = time.perf_counter() - start
    target = apply_K0(f, x, cfg.quadrature)
    gap = abs(est.value - target)
    tol = max(3.0 * est.stderr, 0.10 * abs(target))
    ledger.add("generator_fd", max(t_grid), pairs_to_text(cv["h"]),
               pairs_to_text(cv["x0"]), est.value, est.stderr, est.n,
               wall_time_s=wall)
    ledger.write(out_dir)
    manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
    print(f"D* = {est.value:.6f} vs K0 phi = {target:.6f} "
          f"(|gap| = {gap:.3e}, tol = {tol:.3e})")
    if not est.valid:
        return EXIT_NUMERICAL
    return EXIT_OK if gap <= tol else EXIT_FAILED


def cmd_ck_check(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv, "t")
    cfg = cfg.with_horizon(cv["s"] + cv["t"])
    ledger = ResultsLedger(cv["seed"])
    f = ExpFunction(SpectralField.from_pairs(cv["h"], cv["m"]))
    x = field_from_pairs(cv["x0"], cv["m"])
    direct, nested = chapman_kolmogorov(f, x, cv["s"], cv["t"], cv["n_outer"],
                                        cv["n_inner"], cfg, workers=workers)
    sigma = float(np.hypot(direct.stderr, nested.stderr))
    gap = abs(direct.mean - nested.mean)
    ledger.add("ck_direct", cv["s"] + cv["t"], pairs_to_text(cv["h"]),
               pairs_to_text(cv["x0"]), direct.mean, direct.stderr, direct.n)
    ledger.add("ck_nested", cv["s"] + cv["t"], pairs_to_text(cv["h"]),
               pairs_to_text(cv["x0"]), nested.mean, nested.stderr, nested.n)
    ledger.write(out_dir)
    manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
    print(f"direct = {direct.mean:.6f}, nested = {nested.mean:.6f}, "
          f"|gap| = {gap:.3e} vs 4 sigma = {4 * sigma:.3e}")
    if not (direct.valid and nested.valid):
        return EXIT_NUMERICAL
    return EXIT_OK if gap <= 4.0 * sigma else EXIT_FAILED


def cmd_feynman_kac(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv, "t")
    ledger = ResultsLedger(cv["seed"])
    f = ExpFunction(SpectralField.from_pairs(cv["h"], cv["m"]))
    x = field_from_pairs(cv["x0"], cv["m"])
    if cv["c"] == 0:
        fk = estimate_feynman_kac(f, x, cv["t"], 0.0, cv["n"], cfg,
                                  workers=workers)
        plain = estimate_Pt(f, x, cv["t"], cv["n"], cfg, workers=workers)
        identical = fk.mean == plain.mean
        ledger.add("feynman_kac", cv["t"], pairs_to_text(cv["h"]),
                   pairs_to_text(cv["x0"]), fk.mean, fk.stderr, fk.n)
        ledger.write(out_dir)
        manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
        print(f"c=0 bit-identity with estimate_Pt: {identical}")
        return EXIT_OK if identical else EXIT_FAILED
    recon = feynman_kac_reconstruction(f, x, cv["t"], cv["c"], cv["n"], cfg,
                                       s_nodes=cv["s_nodes"], workers=workers)
    tol = 4.0 * recon.combined_stderr + 2.0 * recon.quad_delta
    ledger.add("fk_lhs", cv["t"], pairs_to_text(cv["h"]),
               pairs_to_text(cv["x0"]), recon.lhs.mean, recon.lhs.stderr,
               recon.lhs.n)
    ledger.add("fk_rhs", cv["t"], pairs_to_text(cv["h"]),
               pairs_to_text(cv["x0"]), recon.rhs.mean, recon.rhs.stderr,
               recon.rhs.n)
    ledger.write(out_dir)
    manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
    print(f"P_t phi = {recon.lhs.mean:.6f}; S_t phi + c int = "
          f"{recon.rhs.mean:.6f}; |gap| = {recon.gap:.3e} (tol {tol:.3e})")
    if not (recon.lhs.valid and recon.rhs.valid):
        return EXIT_NUMERICAL
    return EXIT_OK if recon.gap <= tol else EXIT_FAILED


def cmd_fokker_planck(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv, "t")
    f = ExpFunction(SpectralField.from_pairs(cv["h"], cv["m"]))
    mu0 = sample_initial_measure(_measure_spec(cv), cv["n_particles"],
                                 derive_stream(cv["seed"], 0))
    write_measure_csv(out_dir / "measure_initial.csv", mu0)
    res = weak_residual(mu0, f, cv["t"], cv["n_quad"], cfg, workers=workers,
                        stream_offset=cv["n_particles"])
    write_residuals(out_dir / "residuals.csv",
                    [(cv["t"], res.value, res.mc_stderr, res.quad_delta)])
    path = push_forward(mu0, np.linspace(0.0, cv["t"], 5), cfg,
                        workers=workers, stream_offset=cv["n_particles"])
    vint = v_integrability(path, cfg.quadrature)
    write_measure_csv(out_dir / "measure_final.csv", path.measures[-1])
    manifest.data["artifacts"] = ["measure_initial.csv", "measure_final.csv",
                                  "residuals.csv"]
    manifest.data["v_integrability"] = vint
    ok = abs(res.value) <= 4.0 * res.combined_error
    print(f"weak residual = {res.value:.3e} "
          f"(mc {res.mc_stderr:.2e}, quad {res.quad_delta:.2e}); "
          f"V-integrability = {vint:.4g}")
    if not res.valid or not path.valid:
        return EXIT_NUMERICAL
    return EXIT_OK if ok else EXIT_FAILED


def cmd_moments(cv, workers, out_dir, manifest):
    cfg = _sim_config(cv, "T")
    ledger = ResultsLedger(cv["seed"])
    x = field_from_pairs(cv["x0"], cv["m"])
    est = moment_estimate(x, cv["p"], cv["k"], cv["T"], cv["n"], cfg,
                          workers=workers)
    ledger.add(f"moment_p{cv['p']:g}_k{cv['k']:g}", cv["T"], "0",
               pairs_to_text(cv["x0"]), est.mean, est.stderr, est.n)
    ledger.write(out_dir)
    manifest.data["artifacts"] = ["results.csv", "results.jsonl"]
    print(f"E[sup |X|_{cv['p']:g}^{cv['k']:g}] = {est.mean.real:.6g} "
          f"+- {est.stderr:.2g} (aborted {est.aborted})")
    if not est.valid or not np.isfinite(est.mean.real):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_acceptance(cv, workers, out_dir, manifest):
    ledger = ResultsLedger(cv["seed"])
    results = acceptance.run_all(cv["seed"], workers, ledger=ledger, echo=print)
    rows = ["cid,name,passed,measured,threshold"]
    for r in results:
        name = r.name.replace(",", ";")
        measured = r.measured.replace(",", ";")
        threshold = r.threshold.replace(",", ";")
        rows.append(f"{r.cid},{name},{int(r.passed)},{measured},{threshold}")
    (out_dir / "acceptance_results.csv").write_text("\n".join(rows) + "\n")
    ledger.write(out_dir)
    manifest.data["artifacts"] = ["acceptance_results.csv", "results.csv",
                                  "results.jsonl"]
    manifest.data["criteria"] = [
        {"cid": r.cid, "name": r.name, "passed": r.passed,
         "measured": r.measured, "threshold": r.threshold,
         "wall_time_s": r.wall_time_s}
        for r in results
    ]
    n_failed = sum(not r.passed for r in results)
    print(f"{len(results) - n_failed}/{len(results)} criteria passed")
    return EXIT_OK if n_failed == 0 else EXIT_FAILED


_HANDLERS = {
    "simulate": cmd_simulate,
    "ou-validate": cmd_ou_validate,
    "generator-check": cmd_generator_check,
    "ck-check": cmd_ck_check,
    "feynman-kac": cmd_feynman_kac,
    "fokker-planck": cmd_fokker_planck,
    "moments": cmd_moments,
    "acceptance": cmd_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burgerlab",
        description="Stochastic Burgers laboratory: simulation and "
                    "semigroup/Fokker-Planck verification.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="override the config worker count")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default $BURGERLAB_OUT "
                             "or ./burgerlab_out)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cv = parse_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cv["seed"] = args.seed
    if args.workers is not None:
        cv["workers"] = args.workers
    workers = cv["workers"]
    out_dir = _out_dir(args)
    manifest = Manifest(args.command, cv, workers)
    try:
        code = _HANDLERS[args.command](cv, workers, out_dir, manifest)
    except (ConfigError, DomainError) as exc:
        manifest.finish(out_dir, "config-error", error=str(exc))
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        manifest.finish(out_dir, "numerical-failure", error=str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest.finish(out_dir, "ok" if code == EXIT_OK else "failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
