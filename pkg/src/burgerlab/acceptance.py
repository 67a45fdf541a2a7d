"""The acceptance battery: one function per criterion, fully pinned.

Every criterion carries its own tolerances and sample sizes; nothing is
calibrated at run time.  Criteria consume disjoint stream-offset blocks of
the master seed so re-running any single criterion reproduces its numbers
exactly.  Pass/fail is returned as data; the CLI turns failures into a
nonzero exit status.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .cylinder import (ExpFunction, apply_K0, eval_function,
                       ou_exact_derivative, ou_exact_semigroup)
from .estimators import (chapman_kolmogorov_panel, directional_derivative_crn,
                         estimate_feynman_kac, estimate_Pt,
                         feynman_kac_reconstruction, generator_fd,
                         moment_estimate, sample_terminal_states)
from .measures import Dirac, sample_initial_measure, weak_residual
from .noise import derive_stream, normal_block, ou_decay, ou_step_std
from .solver import SimConfig, simulate_deterministic_burgers
from .spectral import SpectralField, drift_coeffs, inner_product, lp_norm

# stream-offset blocks, one slab per criterion
_SLAB = 50_000_000


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    measured: str
    threshold: str
    wall_time_s: float = 0.0
    details: dict = field(default_factory=dict)


def _pairs(spec, m):
    return SpectralField.from_pairs(spec, m) if spec else SpectralField.zero(m)


def _h(spec, m):
    return ExpFunction(_pairs(spec, m))


# ---------------------------------------------------------------------------
# 1. Galerkin energy identity

def criterion_1(seed: int, workers: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    gen = derive_stream(seed, _SLAB * 1).generator()
    worst = 0.0
    for m in (2, 4, 8, 16, 32, 64):
        coeffs = gen.standard_normal((100, m))
        drifts = drift_coeffs(coeffs, m)
        num = np.abs(np.sum(coeffs * drifts, axis=1))
        den = (np.linalg.norm(coeffs, axis=1) * np.linalg.norm(drifts, axis=1))
        worst = max(worst, float(np.max(num / den)))
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        1, "Galerkin energy identity <b_m(x),x> = 0", worst <= 1e-10,
        f"max |<b,x>|/(|x||b|) = {worst:.3e}", "<= 1e-10", elapsed)


# ---------------------------------------------------------------------------
# 2. OU semigroup oracle

_C2_PANEL = [
    ((), ((1, 1.0),)),
    ((), ((2, 1.0),)),
    (((1, 1.0),), ((1, 1.0),)),
    (((1, 1.0),), ((2, 1.0),)),
    (((2, 1.0),), ((1, 1.0), (2, 1.0))),
    (((1, 1.0), (2, 0.5)), ((1, 1.0),)),
    (((1, 0.5), (3, -0.5)), ((3, 1.0),)),
    (((1, 2.0),), ((1, 0.5),)),
    (((1, 1.0), (2, 1.0), (3, 1.0)), ((1, 1.0), (2, -1.0))),
    (((4, 0.3),), ((4, 1.0),)),
]


def criterion_2(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m, n = 32, 100_000
    cfg = SimConfig(m=m, dt=0.01, T=0.2, drift_enabled=False, master_seed=seed)
    passed_cases = 0
    zs = []
    case = 0
    for t in (0.05, 0.2):
        for x_spec, h_spec in _C2_PANEL:
            x, f = _pairs(x_spec, m), _h(h_spec, m)
            est = estimate_Pt(f, x, t, n, cfg, workers=workers,
                              stream_offset=_SLAB * 2 + case * n)
            exact = ou_exact_semigroup(f, x, t)
            z = abs(est.mean - exact) / est.stderr
            zs.append(float(z))
            passed_cases += (z <= 4.0) and est.valid
            if ledger is not None:
                ledger.add("ou_oracle", t, _fmt_pairs(h_spec), _fmt_pairs(x_spec),
                           est.mean, est.stderr, est.n)
            case += 1
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        2, "OU semigroup oracle, drift off", passed_cases >= 18,
        f"{passed_cases}/20 cases within 4 stderr (max z = {max(zs):.2f})",
        ">= 18/20", elapsed, {"z_scores": zs})


# ---------------------------------------------------------------------------
# 3. OU law exactness (Kolmogorov-Smirnov per mode)

def criterion_3(seed: int, workers: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    m, n, t = 32, 10_000, 0.2
    cfg = SimConfig(m=m, dt=1e-3, T=t, drift_enabled=False, master_seed=seed)
    x = SpectralField.from_pairs([(1, 1.0), (2, 0.5), (3, 0.25), (4, 0.125)], m)
    sim, aborted = sample_terminal_states(x, t, n, cfg, workers=workers,
                                          stream_offset=_SLAB * 3)
    # exact one-shot transition samples on an independent stream block
    normals = normal_block(seed, _SLAB * 3 + n, n, m)
    exact = ou_decay(t, m) * x.coeffs + ou_step_std(t, m) * normals
    pvals = [float(stats.ks_2samp(sim[:, k], exact[:, k]).pvalue)
             for k in range(4)]
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        3, "OU transition law exactness (KS, modes 1-4)",
        min(pvals) > 0.01 and aborted == 0,
        f"min p-value = {min(pvals):.4f} over modes 1-4", "> 0.01", elapsed,
        {"p_values": pvals})


# ---------------------------------------------------------------------------
# 4. generator identity on the core

_C4_PANEL = [
    (((1, 1.0),), ()),
    (((1, 1.0),), ((1, 1.0),)),
    (((1, 2.0),), ((1, 0.5), (2, 0.5))),
    (((1, 1.0), (2, 0.3)), ((1, 1.0),)),
    (((1, 0.7), (2, 0.7)), ((1, 1.0), (3, 0.5))),
]


def criterion_4(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m, n = 32, 1_000_000
    cfg = SimConfig(m=m, dt=1e-3, T=0.02, master_seed=seed)
    t_grid = (0.02, 0.01)
    all_pass = True
    rows = []
    for case, (h_spec, x_spec) in enumerate(_C4_PANEL):
        f, x = _h(h_spec, m), _pairs(x_spec, m)
        est = generator_fd(f, x, t_grid, n, cfg, workers=workers,
                           stream_offset=_SLAB * 4 + case * n)
        target = apply_K0(f, x, cfg.quadrature)
        gap = abs(est.value - target)
        tol = max(3.0 * est.stderr, 0.10 * abs(target))
        ok = gap <= tol and est.valid
        all_pass &= ok
        rows.append((gap, tol, abs(target)))
        if ledger is not None:
            ledger.add("generator_fd", t_grid[0], _fmt_pairs(h_spec),
                       _fmt_pairs(x_spec), est.value, est.stderr, est.n)
    worst = max(r[0] / r[1] for r in rows)
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        4, "generator identity: Richardson (P_t phi - phi)/t vs K0 phi",
        all_pass, f"max |D* - K0 phi| / tol = {worst:.3f}",
        "<= 1 with tol = max(3 stderr, 10% |K0 phi|)", elapsed,
        {"cases": [{"gap": g, "tol": tl, "target": tg} for g, tl, tg in rows]})


# ---------------------------------------------------------------------------
# 5. Chapman-Kolmogorov

def criterion_5(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m = 32
    cfg = SimConfig(m=m, dt=1e-3, T=0.2, master_seed=seed)
    x = SpectralField.basis(1, m)
    h_specs = [((1, 1.0),), ((2, 1.0),), ((1, 0.5), (2, 0.5))]
    fs = [_h(h, m) for h in h_specs]
    pairs = chapman_kolmogorov_panel(fs, x, 0.1, 0.1, 1000, 100, cfg,
                                     workers=workers, stream_offset=_SLAB * 5)
    worst = 0.0
    all_pass = True
    for h_spec, (direct, nested) in zip(h_specs, pairs):
        sigma = np.hypot(direct.stderr, nested.stderr)
        ratio = abs(direct.mean - nested.mean) / (4.0 * sigma)
        worst = max(worst, float(ratio))
        all_pass &= ratio <= 1.0 and direct.valid and nested.valid
        if ledger is not None:
            ledger.add("ck_direct", 0.2, _fmt_pairs(h_spec), "1:1",
                       direct.mean, direct.stderr, direct.n)
            ledger.add("ck_nested", 0.2, _fmt_pairs(h_spec), "1:1",
                       nested.mean, nested.stderr, nested.n)
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        5, "Chapman-Kolmogorov: nested vs direct", all_pass,
        f"max |A - B| / (4 sigma) = {worst:.3f}", "<= 1", elapsed)


# ---------------------------------------------------------------------------
# 6. deterministic convergence

def criterion_6(seed: int, workers: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    T = 0.5
    finals = {}
    for dt in (1e-3, 5e-4, 2.5e-4):
        cfg = SimConfig(m=64, dt=dt, T=T, noise_enabled=False,
                        record_stride=10**9, master_seed=seed)
        finals[dt] = simulate_deterministic_burgers(
            SpectralField.basis(1, 64), cfg).final
    d1 = np.linalg.norm(finals[1e-3].coeffs - finals[5e-4].coeffs)
    d2 = np.linalg.norm(finals[5e-4].coeffs - finals[2.5e-4].coeffs)
    order = float(np.log2(d1 / d2))

    ref64 = simulate_deterministic_burgers(
        SpectralField.basis(1, 64),
        SimConfig(m=64, dt=1e-4, T=T, noise_enabled=False,
                  record_stride=10**9, master_seed=seed)).final
    ref128 = simulate_deterministic_burgers(
        SpectralField.basis(1, 128),
        SimConfig(m=128, dt=1e-4, T=T, noise_enabled=False,
                  record_stride=10**9, master_seed=seed)).final
    gap = float(np.linalg.norm(ref64.pad_to(128).coeffs - ref128.coeffs))
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        6, "deterministic convergence in dt and m",
        order >= 0.9 and gap <= 1e-3,
        f"dt-order = {order:.3f}; |X_64 - X_128|_2 = {gap:.3e}",
        "order >= 0.9 and gap <= 1e-3", elapsed,
        {"order": order, "mode_gap": gap})


# ---------------------------------------------------------------------------
# 7. weak Fokker-Planck residual

def criterion_7(seed: int, workers: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    m, n_particles, t, n_quad = 32, 10_000, 0.2, 16
    f = _h(((1, 1.0),), m)
    x0 = SpectralField.basis(1, m)
    mu0 = sample_initial_measure(Dirac(x0), n_particles,
                                 derive_stream(seed, _SLAB * 7))

    cfg_ou = SimConfig(m=m, dt=1e-3, T=t, drift_enabled=False, master_seed=seed)
    res_ou = weak_residual(mu0, f, t, n_quad, cfg_ou, workers=workers,
                           stream_offset=_SLAB * 7 + n_particles)
    oracle_gap = ou_exact_semigroup(f, x0, t) - eval_function(f, x0)
    ou_lhs_ok = abs(res_ou.lhs - oracle_gap) <= 4.0 * res_ou.lhs_stderr
    ou_resid_ok = abs(res_ou.value) <= 4.0 * res_ou.combined_error

    cfg_bg = SimConfig(m=m, dt=1e-3, T=t, drift_enabled=True, master_seed=seed)
    res_bg = weak_residual(mu0, f, t, n_quad, cfg_bg, workers=workers,
                           stream_offset=_SLAB * 7 + 3 * n_particles)
    bg_resid_ok = abs(res_bg.value) <= 4.0 * res_bg.combined_error
    shrink = res_bg.quad_delta / max(res_bg.quad_delta_refined, 1e-300)
    shrink_ok = shrink >= 3.0

    passed = (ou_lhs_ok and ou_resid_ok and bg_resid_ok and shrink_ok
              and res_ou.valid and res_bg.valid)
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        7, "weak Fokker-Planck residual (OU oracle + Burgers self-consistency)",
        passed,
        (f"|res_OU| = {abs(res_ou.value):.2e} (err {4*res_ou.combined_error:.2e}); "
         f"|res_B| = {abs(res_bg.value):.2e} (err {4*res_bg.combined_error:.2e}); "
         f"quad shrink = {shrink:.1f}x"),
        "residuals within 4x combined error; shrink >= 3", elapsed,
        {"ou_lhs_gap": abs(res_ou.lhs - oracle_gap),
         "shrink": float(shrink)})


# ---------------------------------------------------------------------------
# 8. Feynman-Kac reconstruction

def criterion_8(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m, n, t, c = 16, 100_000, 0.2, 0.5
    cfg = SimConfig(m=m, dt=1e-3, T=t, master_seed=seed)
    f = _h(((1, 1.0),), m)
    x = SpectralField.basis(1, m)

    plain = estimate_Pt(f, x, t, n, cfg, workers=workers,
                        stream_offset=_SLAB * 8)
    fk0 = estimate_feynman_kac(f, x, t, 0.0, n, cfg, workers=workers,
                               stream_offset=_SLAB * 8)
    bit_identical = (fk0.mean == plain.mean
                     and fk0.stderr_re == plain.stderr_re
                     and fk0.stderr_im == plain.stderr_im)

    recon = feynman_kac_reconstruction(f, x, t, c, n, cfg, s_nodes=8,
                                       workers=workers,
                                       stream_offset=_SLAB * 8 + 2 * n)
    tol = 4.0 * recon.combined_stderr + 2.0 * recon.quad_delta
    recon_ok = recon.gap <= tol and recon.lhs.valid and recon.rhs.valid
    if ledger is not None:
        ledger.add("fk_lhs", t, "1:1", "1:1", recon.lhs.mean,
                   recon.lhs.stderr, recon.lhs.n)
        ledger.add("fk_rhs", t, "1:1", "1:1", recon.rhs.mean,
                   recon.rhs.stderr, recon.rhs.n)
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        8, "Feynman-Kac: c=0 bit-identity and reconstruction at c=0.5",
        bit_identical and recon_ok,
        f"bit-identity = {bit_identical}; |gap| = {recon.gap:.2e} (tol {tol:.2e})",
        "identity exact; gap within 4 sigma + quadrature tolerance", elapsed)


# ---------------------------------------------------------------------------
# 9. gradient check with common random numbers

_C9_TRIPLES = [
    ((), ((1, 1.0),), ((1, 1.0),)),
    (((1, 1.0),), ((1, 1.0),), ((1, 1.0),)),
    (((1, 1.0),), ((2, 1.0),), ((1, 1.0),)),          # orthogonal: exact zero
    (((2, 1.0),), ((1, 1.0), (2, 1.0)), ((1, 1.0),)),
    (((1, 0.5),), ((1, 0.5),), ((1, 1.0), (2, 1.0))),
]


def criterion_9(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m, n, t, eps = 32, 100_000, 0.1, 1e-3
    cfg = SimConfig(m=m, dt=0.01, T=t, drift_enabled=False, master_seed=seed)
    all_pass = True
    worst = 0.0
    for case, (x_spec, g_spec, h_spec) in enumerate(_C9_TRIPLES):
        x, g, f = _pairs(x_spec, m), _pairs(g_spec, m), _h(h_spec, m)
        est = directional_derivative_crn(f, x, g, t, eps, n, cfg,
                                         workers=workers,
                                         stream_offset=_SLAB * 9 + case * n)
        exact = ou_exact_derivative(f, x, t, g)
        # O(eps^2) bias bound: third directional derivative of the OU action
        sens = abs(inner_product(
            SpectralField(ou_decay(t, m) * g.pad_to(m).coeffs), f.h.pad_to(m)))
        tol = 3.0 * est.stderr + eps**2 * max(sens, 1.0) ** 3
        gap = abs(est.value - exact)
        all_pass &= gap <= tol and est.valid
        worst = max(worst, gap / tol)
        if ledger is not None:
            ledger.add("crn_derivative", t, _fmt_pairs(h_spec),
                       _fmt_pairs(x_spec), est.value, est.stderr, est.n)
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        9, "CRN directional derivative vs exact OU derivative", all_pass,
        f"max |fd - exact| / tol = {worst:.3f}",
        "<= 1 with tol = 3 stderr + O(eps^2)", elapsed)


# ---------------------------------------------------------------------------
# 10. moment bound shape

def criterion_10(seed: int, workers: int = 1, ledger=None) -> CriterionResult:
    t0 = time.perf_counter()
    m, n, T = 32, 1000, 0.5
    cfg = SimConfig(m=m, dt=1e-3, T=T, master_seed=seed)
    e1 = SpectralField.basis(1, m)
    all_finite = True
    zero_aborted = True
    ratios = {}
    case = 0
    for p, k in ((4.0, 2.0), (6.0, 8.0)):
        base_norm = lp_norm(e1, p, cfg.quadrature)
        vals = []
        for target in (0.0, 1.0, 2.0, 4.0, 8.0):
            x = SpectralField.zero(m) if target == 0 else (target / base_norm) * e1
            est = moment_estimate(x, p, k, T, n, cfg, workers=workers,
                                  stream_offset=_SLAB * 10 + case * n)
            case += 1
            value = est.mean.real
            all_finite &= bool(np.isfinite(value))
            zero_aborted &= est.aborted == 0
            vals.append(value / (1.0 + target**k))
            if ledger is not None:
                ledger.add(f"moment_p{p:g}_k{k:g}", T, "0",
                           f"1:{0 if target == 0 else target / base_norm:g}",
                           est.mean, est.stderr, est.n)
        ratios[(p, k)] = max(vals) / min(vals)
    worst = max(ratios.values())
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        10, "moment growth shape: sup-moment vs 1 + |x|_p^k",
        all_finite and zero_aborted and worst < 10.0,
        f"max ratio spread = {worst:.2f}; aborted paths = {0 if zero_aborted else '>0'}",
        "spread < 10, zero aborted", elapsed,
        {"spreads": {f"p{p:g}k{k:g}": v for (p, k), v in ratios.items()}})


def _fmt_pairs(spec) -> str:
    return ",".join(f"{k}:{v:g}" for k, v in spec) if spec else "0"


_CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}

_LEDGERED = {2, 4, 5, 8, 9, 10}


def run_criterion(cid: int, seed: int, workers: int = 1,
                  ledger=None) -> CriterionResult:
    fn = _CRITERIA[cid]
    if cid in _LEDGERED:
        return fn(seed, workers, ledger=ledger)
    return fn(seed, workers)


def run_all(seed: int, workers: int = 1, ledger=None, echo=None) -> list:
    """Criteria 1-10 in order (11, reproducibility, is checked externally
    by re-running this battery under different worker counts and comparing
    the emitted CSV ledgers byte for byte)."""
    results = []
    for cid in sorted(_CRITERIA):
        res = run_criterion(cid, seed, workers, ledger=ledger)
        if echo is not None:
            mark = "PASS" if res.passed else "FAIL"
            echo(f"[{mark}] criterion {res.cid}: {res.name} -- {res.measured} "
                 f"({res.wall_time_s:.1f}s)")
        results.append(res)
    return results
