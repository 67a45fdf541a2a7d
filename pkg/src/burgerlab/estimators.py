"""Monte Carlo estimation of the transition semigroup and its generator.

Estimators fan trajectories out in fixed-size chunks; path i always draws
from stream (master_seed, stream_offset + i) and chunk boundaries never
depend on the worker count, so every estimate is bit-reproducible for a
given seed regardless of parallelism.  Means are accumulated as weighted
sums in chunk order; standard errors come from a one-pass Welford/Chan
accumulator carried alongside.

Variance reduction is by common random numbers throughout: generator
difference quotients reuse one path set across t-levels, and directional
derivatives drive both perturbed copies with identical noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cylinder import ExpFunction, eval_batch, eval_function
from .errors import DomainError
from .noise import normal_block
from .solver import SimConfig, StepKernel, steps_for
from .spectral import (Quadrature, SpectralField, default_quadrature,
                       lp_norm, lp_norm_batch)

CHUNK = 4096  # fixed chunk width; part of the reproducibility contract


# ---------------------------------------------------------------------------
# accumulation

@dataclass(frozen=True)
class McEstimate:
    """A complex Monte Carlo estimate with per-component standard errors."""

    mean: complex
    stderr_re: float
    stderr_im: float
    n: int
    aborted: int = 0

    @property
    def stderr(self) -> float:
        """Scalar error bar: Euclidean combination of the component errors."""
        return float(np.hypot(self.stderr_re, self.stderr_im))

    @property
    def valid(self) -> bool:
        return self.aborted == 0


class RunningMoments:
    """Chan-merged Welford moments plus an order-fixed weighted sum."""

    def __init__(self):
        self.n = 0
        self.aborted = 0
        self.wsum = 0.0 + 0.0j
        self.mean = 0.0 + 0.0j
        self.m2_re = 0.0
        self.m2_im = 0.0

    def add_values(self, values: np.ndarray, alive: np.ndarray | None,
                   weight: float) -> None:
        """Fold one chunk of complex samples into the running moments."""
        if alive is not None:
            self.aborted += int(values.size - np.count_nonzero(alive))
            values = values[alive]
        nb = values.size
        if nb == 0:
            return
        self.wsum += complex(np.sum(values * weight))
        mean_b = complex(np.mean(values))
        m2b_re = float(np.sum((values.real - mean_b.real) ** 2))
        m2b_im = float(np.sum((values.imag - mean_b.imag) ** 2))
        na = self.n
        ntot = na + nb
        delta = mean_b - self.mean
        self.mean += delta * (nb / ntot)
        scale = na * nb / ntot
        self.m2_re += m2b_re + delta.real ** 2 * scale
        self.m2_im += m2b_im + delta.imag ** 2 * scale
        self.n = ntot

    def estimate(self, n_requested: int) -> McEstimate:
        if self.n == 0:
            return McEstimate(np.nan + 0j, np.nan, np.nan, 0, self.aborted)
        mean = self.wsum
        if self.aborted:
            mean = mean * (n_requested / self.n)
        if self.n > 1:
            se_re = float(np.sqrt(self.m2_re / (self.n - 1) / self.n))
            se_im = float(np.sqrt(self.m2_im / (self.n - 1) / self.n))
        else:
            se_re = se_im = 0.0
        return McEstimate(complex(mean), se_re, se_im, self.n, self.aborted)


def _chunk_ranges(n: int):
    return [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]


def _map_chunks(n: int, workers: int, task):
    """Run task(start, stop) over fixed chunks; results in chunk order."""
    ranges = _chunk_ranges(n)
    if workers <= 1 or len(ranges) <= 1:
        return [task(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task, a, b) for a, b in ranges]
        return [fut.result() for fut in futures]


# ---------------------------------------------------------------------------
# batched path engine

def _noise_for(cfg: SimConfig, stream_offset: int, start: int, count: int,
               n_steps: int) -> np.ndarray | None:
    if not cfg.noise_enabled or n_steps == 0:
        return None
    block = normal_block(cfg.master_seed, stream_offset + start, count,
                         n_steps * cfg.m)
    return block.reshape(count, n_steps, cfg.m)


def _evolve(states: np.ndarray, kernel: StepKernel, noise: np.ndarray | None,
            n_steps: int, on_step=None) -> np.ndarray:
    """Advance a (count, m) batch n_steps; returns the alive mask.

    Rows that leave the finite range are zeroed and dropped from the mask so
    later arithmetic stays clean.  on_step(j, states, alive) fires after step
    j (1-based) for estimators that record along the path.
    """
    alive = np.ones(states.shape[0], dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n_steps + 1):
            kernel.advance(states, None if noise is None else noise[:, j - 1, :])
            finite = np.isfinite(states).all(axis=1)
            newly_dead = alive & ~finite
            if newly_dead.any():
                states[newly_dead] = 0.0
                alive[newly_dead] = False
            if on_step is not None:
                on_step(j, states, alive)
    return alive


def _tile_state(x: SpectralField, m: int, count: int) -> np.ndarray:
    return np.tile(x.pad_to(m).coeffs, (count, 1))


def sample_terminal_states(x: SpectralField, t: float, n: int, cfg: SimConfig,
                           *, workers: int = 1,
                           stream_offset: int = 0) -> tuple[np.ndarray, int]:
    """Terminal coefficient rows X(t, x) of n trajectories, plus abort count."""
    n_steps = steps_for(t, cfg.dt)

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        alive = _evolve(states, StepKernel(cfg), noise, n_steps)
        return states, alive

    out = np.empty((n, cfg.m))
    aborted = 0
    pos = 0
    for states, alive in _map_chunks(n, workers, task):
        out[pos:pos + len(states)] = states
        aborted += int(len(states) - np.count_nonzero(alive))
        pos += len(states)
    return out, aborted


# ---------------------------------------------------------------------------
# semigroup estimators

def estimate_Pt(f: ExpFunction, x: SpectralField, t: float, n: int,
                cfg: SimConfig, *, workers: int = 1,
                stream_offset: int = 0) -> McEstimate:
    """P_t phi_h(x) = E[phi_h(X(t,x))] over n independent trajectories."""
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    if t < 0:
        raise DomainError(f"horizon must be >= 0, got {t}")
    if t == 0 or f.is_constant:
        return McEstimate(eval_function(f, x), 0.0, 0.0, n, 0)
    n_steps = steps_for(t, cfg.dt)
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        alive = _evolve(states, StepKernel(cfg), noise, n_steps)
        return eval_batch(f, states), alive

    moments = RunningMoments()
    for values, alive in _map_chunks(n, workers, task):
        moments.add_values(values, alive, inv_n)
    return moments.estimate(n)


@dataclass(frozen=True)
class FdEstimate:
    """Richardson-extrapolated generator value with propagated MC error."""

    value: complex
    stderr_re: float
    stderr_im: float
    n: int
    aborted: int
    levels: tuple  # ((t, McEstimate of the difference quotient), ...)

    @property
    def stderr(self) -> float:
        return float(np.hypot(self.stderr_re, self.stderr_im))

    @property
    def valid(self) -> bool:
        return self.aborted == 0


def generator_fd(f: ExpFunction, x: SpectralField, t_grid, n: int,
                 cfg: SimConfig, *, workers: int = 1,
                 stream_offset: int = 0) -> FdEstimate:
    """Finite-difference generator check (P_t phi - phi)/t with extrapolation.

    All t-levels ride the same driving noise (one path set, recorded at each
    level), which is the common-random-numbers coupling that makes the
    extrapolated difference usable at feasible sample sizes.  Assuming an
    O(t) bias, the two finest levels t1 > t2 combine to
    D* = (r D(t2) - D(t1)) / (r - 1) with r = t1/t2, evaluated per path.
    """
    times = sorted(float(t) for t in t_grid)
    if len(times) < 2:
        raise DomainError("t_grid needs at least two points")
    if times[0] <= 0:
        raise DomainError("t_grid must be positive")
    ratios = [times[i + 1] / times[i] for i in range(len(times) - 1)]
    if any(abs(r - ratios[0]) > 1e-9 * ratios[0] for r in ratios):
        raise DomainError("t_grid must be a geometric progression")
    level_steps = [steps_for(t, cfg.dt) for t in times]
    if len(set(level_steps)) != len(level_steps):
        raise DomainError("t_grid points collapse on the dt grid")
    n_steps = level_steps[-1]
    record = {s: i for i, s in enumerate(level_steps)}
    phi0 = eval_function(f, x)
    t2, t1 = times[0], times[1]  # two finest levels
    r = t1 / t2
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        snap = np.empty((len(times), count), dtype=np.complex128)

        def on_step(j, st, alive):
            if j in record:
                snap[record[j]] = eval_batch(f, st)

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)
        quot = (snap - phi0) / np.array(times)[:, None]
        richardson = (r * quot[0] - quot[1]) / (r - 1.0)
        return quot, richardson, alive

    star = RunningMoments()
    per_level = [RunningMoments() for _ in times]
    for quot, richardson, alive in _map_chunks(n, workers, task):
        star.add_values(richardson, alive, inv_n)
        for i in range(len(times)):
            per_level[i].add_values(quot[i], alive, inv_n)
    est = star.estimate(n)
    levels = tuple((times[i], per_level[i].estimate(n)) for i in range(len(times)))
    return FdEstimate(est.mean, est.stderr_re, est.stderr_im, est.n,
                      est.aborted, levels)


def chapman_kolmogorov_panel(fs, x: SpectralField, s: float, t: float,
                             n_outer: int, n_inner: int, cfg: SimConfig, *,
                             workers: int = 1, stream_offset: int = 0) -> list:
    """Direct-vs-nested semigroup estimates for several test functions.

    All functions are evaluated on one shared path set (legitimate: the pass
    condition is per function), which keeps the panel affordable.  Returns
    one (direct, nested) pair per function.
    """
    if s < 0 or t < 0:
        raise DomainError("legs must be nonnegative")
    fs = list(fs)
    n_total = n_outer * n_inner

    def multi_estimate(horizon, offset):
        n_steps = steps_for(horizon, cfg.dt)
        inv_n = 1.0 / n_total

        def task(start, stop):
            count = stop - start
            states = _tile_state(x, cfg.m, count)
            noise = _noise_for(cfg, offset, start, count, n_steps)
            alive = _evolve(states, StepKernel(cfg), noise, n_steps)
            return [eval_batch(f, states) for f in fs], alive

        mom = [RunningMoments() for _ in fs]
        for values, alive in _map_chunks(n_total, workers, task):
            for i, vals in enumerate(values):
                mom[i].add_values(vals, alive, inv_n)
        return [m.estimate(n_total) for m in mom]

    directs = multi_estimate(s + t, stream_offset)
    if s == 0 or t == 0:
        return list(zip(directs, directs))

    outer_steps = steps_for(s, cfg.dt)
    inner_steps = steps_for(t, cfg.dt)
    outer_offset = stream_offset + n_total
    inner_offset = outer_offset + n_outer

    def outer_task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, outer_offset, start, count, outer_steps)
        alive = _evolve(states, StepKernel(cfg), noise, outer_steps)
        return states, alive

    endpoints = np.empty((n_outer, cfg.m))
    outer_alive = np.empty(n_outer, dtype=bool)
    pos = 0
    for states, alive in _map_chunks(n_outer, workers, outer_task):
        endpoints[pos:pos + len(states)] = states
        outer_alive[pos:pos + len(states)] = alive
        pos += len(states)

    def inner_task(start, stop):
        count = stop - start
        states = endpoints[start // n_inner:(stop - 1) // n_inner + 1]
        states = np.repeat(states, n_inner, axis=0)[
            start % n_inner: start % n_inner + count]
        states = np.ascontiguousarray(states)
        noise = _noise_for(cfg, inner_offset, start, count, inner_steps)
        alive = _evolve(states, StepKernel(cfg), noise, inner_steps)
        return [eval_batch(f, states) for f in fs], alive

    values = np.empty((len(fs), n_total), dtype=np.complex128)
    inner_alive = np.empty(n_total, dtype=bool)
    pos = 0
    for vals, alive in _map_chunks(n_total, workers, inner_task):
        cnt = len(vals[0])
        for i in range(len(fs)):
            values[i, pos:pos + cnt] = vals[i]
        inner_alive[pos:pos + cnt] = alive
        pos += cnt

    alive_mat = inner_alive.reshape(n_outer, n_inner) & outer_alive[:, None]
    aborted = int(n_total - np.count_nonzero(alive_mat))
    counts = alive_mat.sum(axis=1)
    good = counts > 0
    pairs = []
    for i in range(len(fs)):
        vals_mat = np.where(alive_mat, values[i].reshape(n_outer, n_inner), 0.0)
        outer_means = vals_mat[good].sum(axis=1) / counts[good]
        mean = complex(np.sum(outer_means) / len(outer_means))
        if len(outer_means) > 1:
            se_re = float(np.std(outer_means.real, ddof=1)
                          / np.sqrt(len(outer_means)))
            se_im = float(np.std(outer_means.imag, ddof=1)
                          / np.sqrt(len(outer_means)))
        else:
            se_re = se_im = 0.0
        pairs.append((directs[i],
                      McEstimate(mean, se_re, se_im, int(counts.sum()), aborted)))
    return pairs


def chapman_kolmogorov(f: ExpFunction, x: SpectralField, s: float, t: float,
                       n_outer: int, n_inner: int, cfg: SimConfig, *,
                       workers: int = 1,
                       stream_offset: int = 0) -> tuple[McEstimate, McEstimate]:
    """Direct estimate of P_{s+t} phi(x) versus the nested P_s(P_t phi)(x).

    The nested leg evolves n_outer paths to time s, then continues each with
    n_inner fresh streams for another t; its standard error is computed over
    the outer-path means, which accounts for the clustering.
    """
    return chapman_kolmogorov_panel([f], x, s, t, n_outer, n_inner, cfg,
                                    workers=workers,
                                    stream_offset=stream_offset)[0]


# ---------------------------------------------------------------------------
# Feynman-Kac

def _norm4_pow4(states: np.ndarray, quad: Quadrature) -> np.ndarray:
    return lp_norm_batch(states, 4.0, quad) ** 4


def estimate_feynman_kac(f: ExpFunction, x: SpectralField, t: float, c: float,
                         n: int, cfg: SimConfig, *, workers: int = 1,
                         stream_offset: int = 0) -> McEstimate:
    """S_t phi(x) = E[exp(-c int_0^t |X(s,x)|_4^4 ds) phi(X(t,x))].

    The path integral uses the trapezoid rule on the step grid.  At c = 0 the
    weight is exactly 1.0 and the paths consume the identical noise, so the
    result is bit-identical to estimate_Pt on the same seed (the norm
    tracking is skipped, but the reduction still runs through this path).
    """
    if c < 0:
        raise DomainError(f"potential constant must be >= 0, got {c}")
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    if t == 0 or (f.is_constant and c == 0):
        return McEstimate(eval_function(f, x), 0.0, 0.0, n, 0)
    n_steps = steps_for(t, cfg.dt)
    quad = cfg.quadrature
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        integral = np.zeros(count)
        on_step = None
        if c > 0:
            prev = _norm4_pow4(states, quad)

            def on_step(j, st, alive):
                nonlocal prev
                cur = _norm4_pow4(st, quad)
                integral[alive] += (0.5 * cfg.dt) * (prev + cur)[alive]
                prev = cur

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)
        vals = np.exp(-c * integral) * eval_batch(f, states)
        return vals, alive

    moments = RunningMoments()
    for vals, alive in _map_chunks(n, workers, task):
        moments.add_values(vals, alive, inv_n)
    return moments.estimate(n)


def _trapz_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    gaps = np.diff(times)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return w


def snap_times_to_grid(times, dt: float) -> np.ndarray:
    """Round each time onto the step grid, keeping them distinct."""
    steps = np.round(np.asarray(times, dtype=np.float64) / dt).astype(int)
    if len(np.unique(steps)) != len(steps):
        raise DomainError("times collapse onto the same grid step")
    return steps * dt


@dataclass(frozen=True)
class FkReconstruction:
    """Both sides of P_t phi = S_t phi + c int_0^t S_{t-s}(|.|_4^4 phi) ds."""

    lhs: McEstimate
    rhs: McEstimate
    rhs_refined: McEstimate
    s_times: np.ndarray
    s_times_refined: np.ndarray

    @property
    def quad_delta(self) -> float:
        return float(abs(self.rhs.mean - self.rhs_refined.mean))

    @property
    def gap(self) -> float:
        return float(abs(self.lhs.mean - self.rhs.mean))

    @property
    def combined_stderr(self) -> float:
        return float(np.hypot(self.lhs.stderr, self.rhs.stderr))


def feynman_kac_reconstruction(f: ExpFunction, x: SpectralField, t: float,
                               c: float, n: int, cfg: SimConfig,
                               s_nodes: int = 8, *, workers: int = 1,
                               stream_offset: int = 0) -> FkReconstruction:
    """Estimate both sides of the damped-semigroup reconstruction identity.

    The left side is a plain estimate of P_t phi(x) on its own streams.  The
    right side evaluates S_t phi(x) and the s-integral of S_{t-s}(|.|_4^4 phi)(x)
    on a second, independent path set: every term S_{t-s} is sampled from the
    same trajectories restricted to [0, t-s], and the s-integral uses the
    trapezoid rule on s_nodes nodes (refined once to estimate quadrature
    error; the refinement shares the trajectories, so the difference isolates
    the quadrature component).
    """
    if s_nodes < 2:
        raise DomainError("need at least two s-quadrature nodes")
    lhs = estimate_Pt(f, x, t, n, cfg, workers=workers,
                      stream_offset=stream_offset)
    n_steps = steps_for(t, cfg.dt)
    quad = cfg.quadrature
    s_base = snap_times_to_grid(np.linspace(0.0, t, s_nodes), cfg.dt)
    s_fine = snap_times_to_grid(np.linspace(0.0, t, 2 * s_nodes - 1), cfg.dt)
    u_levels = sorted({n_steps - round(s / cfg.dt) for s in s_fine})
    u_index = {u: i for i, u in enumerate(u_levels)}
    w_base = _trapz_weights(s_base)
    w_fine = _trapz_weights(s_fine)
    rhs_offset = stream_offset + n
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, rhs_offset, start, count, n_steps)
        integral = np.zeros(count)
        prev = _norm4_pow4(states, quad)
        # G(u) = exp(-c I(u)) |X(u)|_4^4 phi(X(u)) per path, plus the S_t term
        g_at = np.empty((len(u_levels), count), dtype=np.complex128)
        damp_t = np.empty(count)
        phi_t = np.empty(count, dtype=np.complex128)

        def record(u, st):
            val = np.exp(-c * integral)
            if u == n_steps:
                damp_t[:] = val
                phi_t[:] = eval_batch(f, st)
            if u in u_index:
                g_at[u_index[u]] = val * prev * eval_batch(f, st)

        record(0, states)

        def on_step(j, st, alive):
            nonlocal prev
            cur = _norm4_pow4(st, quad)
            integral[alive] += (0.5 * cfg.dt) * (prev + cur)[alive]
            prev = cur
            record(j, st)

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)

        def rhs_values(s_times, weights):
            acc = damp_t * phi_t
            for s_val, w in zip(s_times, weights):
                u = n_steps - round(s_val / cfg.dt)
                acc = acc + (c * w) * g_at[u_index[u]]
            return acc

        return rhs_values(s_base, w_base), rhs_values(s_fine, w_fine), alive

    base = RunningMoments()
    fine = RunningMoments()
    for vals_b, vals_f, alive in _map_chunks(n, workers, task):
        base.add_values(vals_b, alive, inv_n)
        fine.add_values(vals_f, alive, inv_n)
    return FkReconstruction(lhs, base.estimate(n), fine.estimate(n),
                            s_base, s_fine)


# ---------------------------------------------------------------------------
# derivatives and moments

@dataclass(frozen=True)
class DerivativeEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    n: int
    aborted: int

    @property
    def stderr(self) -> float:
        return float(np.hypot(self.stderr_re, self.stderr_im))

    @property
    def valid(self) -> bool:
        return self.aborted == 0


def directional_derivative_crn(f: ExpFunction, x: SpectralField,
                               g: SpectralField, t: float, eps: float, n: int,
                               cfg: SimConfig, *, workers: int = 1,
                               stream_offset: int = 0) -> DerivativeEstimate:
    """Central difference (P_t phi(x+eps g) - P_t phi(x-eps g)) / (2 eps).

    Both evaluations ride identical noise streams (common random numbers), so
    the per-path difference is already the coupled estimator; bias is
    O(eps^2).
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    n_steps = steps_for(t, cfg.dt)
    x_plus = x.pad_to(cfg.m) + eps * g.pad_to(cfg.m)
    x_minus = x.pad_to(cfg.m) - eps * g.pad_to(cfg.m)
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        sp = _tile_state(x_plus, cfg.m, count)
        sm = _tile_state(x_minus, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        kernel = StepKernel(cfg)
        alive_p = np.ones(count, dtype=bool)
        alive_m = np.ones(count, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(1, n_steps + 1):
                nz = None if noise is None else noise[:, j - 1, :]
                kernel.advance(sp, nz)
                kernel.advance(sm, nz)
                for arr, alive in ((sp, alive_p), (sm, alive_m)):
                    finite = np.isfinite(arr).all(axis=1)
                    dead = alive & ~finite
                    if dead.any():
                        arr[dead] = 0.0
                        alive[dead] = False
        alive = alive_p & alive_m
        diffs = (eval_batch(f, sp) - eval_batch(f, sm)) / (2.0 * eps)
        return diffs, alive

    moments = RunningMoments()
    for diffs, alive in _map_chunks(n, workers, task):
        moments.add_values(diffs, alive, inv_n)
    est = moments.estimate(n)
    return DerivativeEstimate(est.mean, est.stderr_re, est.stderr_im,
                              est.n, est.aborted)


def moment_estimate(x: SpectralField, p: float, k: float, T: float, n: int,
                    cfg: SimConfig, *, workers: int = 1,
                    stream_offset: int = 0) -> McEstimate:
    """E[sup_{t<=T} |X(t,x)|_p^k], the sup taken over every step.

    The per-path sup over the step grid is a lower bound on the continuous
    sup; moment runs therefore always record at stride 1 regardless of
    cfg.record_stride.
    """
    if p < 2:
        raise DomainError(f"moment estimator needs p >= 2, got {p}")
    if k < 1:
        raise DomainError(f"moment estimator needs k >= 1, got {k}")
    quad = cfg.quadrature
    if T == 0:
        val = lp_norm(x.pad_to(cfg.m), p, quad) ** k
        return McEstimate(complex(val), 0.0, 0.0, n, 0)
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    n_steps = steps_for(T, cfg.dt)
    inv_n = 1.0 / n

    def task(start, stop):
        count = stop - start
        states = _tile_state(x, cfg.m, count)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        running = lp_norm_batch(states, p, quad)

        def on_step(j, st, alive):
            np.maximum(running, lp_norm_batch(st, p, quad), out=running,
                       where=alive)

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)
        return (running ** k).astype(np.complex128), alive

    moments = RunningMoments()
    for vals, alive in _map_chunks(n, workers, task):
        moments.add_values(vals, alive, inv_n)
    return moments.estimate(n)


def v_weight(x: SpectralField, quad: Quadrature | None = None) -> float:
    """Lyapunov weight V(x) = |x|_6^8 |x|_4^2."""
    quad = default_quadrature(x.m) if quad is None else quad
    return lp_norm(x, 6.0, quad) ** 8 * lp_norm(x, 4.0, quad) ** 2


def v_weight_batch(states: np.ndarray, quad: Quadrature) -> np.ndarray:
    return (lp_norm_batch(states, 6.0, quad) ** 8
            * lp_norm_batch(states, 4.0, quad) ** 2)
