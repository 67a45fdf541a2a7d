"""Weighted particle measures and the weak Fokker-Planck residual.

A finite (possibly signed) Borel measure is represented by a weighted
particle ensemble; the pushforward under the flow evolves every particle
along its own stream and leaves weights untouched.  Expectation over the
noise is achieved by particle multiplicity, which converges to the dual
semigroup action by the law of large numbers.

The weak-identity residual checks

    int phi d(mu_t) - int phi d(mu_0) = int_0^t ( int K0 phi d(mu_s) ) ds

by trapezoid quadrature in time over a single coupled particle set; the time
nodes are refined twice (nested, on the step grid) so the quadrature error
component of the residual can be reported separately from the Monte Carlo
one.  With the drift disabled the evolved process is Ornstein-Uhlenbeck and
the identity is checked with the OU operator in place of K0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cylinder import ExpFunction, eval_batch, k0_batch, l0_batch
from .errors import ConfigError, DomainError, IntegrationError
from .estimators import CHUNK, _evolve, _map_chunks, _noise_for, v_weight_batch
from .noise import _as_generator
from .solver import SimConfig, StepKernel, steps_for
from .spectral import Quadrature, SpectralField


@dataclass(frozen=True, eq=False)
class ParticleMeasure:
    """Particles (rows) with signed weights; sum |w_i| plays the TV role."""

    particles: np.ndarray  # (n, m)
    weights: np.ndarray    # (n,)

    def __post_init__(self):
        pts = np.array(self.particles, dtype=np.float64, copy=True)
        w = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DomainError("particles must be a nonempty (n, m) array")
        if pts.shape[0] != w.size:
            raise DomainError("particles and weights lengths differ")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if not np.all(np.isfinite(pts)):
            raise DomainError("particle coordinates must be finite")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "particles", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def m(self) -> int:
        return self.particles.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def total_variation_proxy(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.particles[i])


@dataclass(frozen=True)
class MeasurePath:
    """Snapshots of one coupled ensemble; particle i is a single trajectory."""

    times: np.ndarray
    measures: tuple
    aborted: int = 0

    @property
    def valid(self) -> bool:
        return self.aborted == 0


# ---------------------------------------------------------------------------
# initial ensembles

@dataclass(frozen=True)
class Dirac:
    x: SpectralField


@dataclass(frozen=True)
class GaussianModes:
    sigmas: tuple

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("gaussian mode deviations must be >= 0")


@dataclass(frozen=True)
class DiracMixture:
    atoms: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ConfigError("mixture needs matching nonempty atoms/weights")


def sample_initial_measure(spec, n_particles: int, rng) -> ParticleMeasure:
    """Realize a distribution descriptor as an n-particle ensemble."""
    if n_particles < 1:
        raise ConfigError(f"need at least one particle, got {n_particles}")
    if isinstance(spec, Dirac):
        pts = np.tile(spec.x.coeffs, (n_particles, 1))
        return ParticleMeasure(pts, np.full(n_particles, 1.0 / n_particles))
    if isinstance(spec, GaussianModes):
        gen = _as_generator(rng)
        sig = np.asarray(spec.sigmas)
        pts = gen.standard_normal((n_particles, sig.size)) * sig
        return ParticleMeasure(pts, np.full(n_particles, 1.0 / n_particles))
    if isinstance(spec, DiracMixture):
        counts = _mixture_counts(spec.weights, n_particles)
        m = max(a.m for a in spec.atoms)
        rows, w_rows = [], []
        for atom, w, cnt in zip(spec.atoms, spec.weights, counts):
            rows.append(np.tile(atom.pad_to(m).coeffs, (cnt, 1)))
            w_rows.append(np.full(cnt, w / cnt))
        return ParticleMeasure(np.vstack(rows), np.concatenate(w_rows))
    raise ConfigError(f"unknown initial-measure descriptor {spec!r}")


def _mixture_counts(weights, n_particles: int):
    """Split n particles over atoms proportionally to |w|, each atom >= 1."""
    props = np.abs(np.asarray(weights, dtype=np.float64))
    if props.sum() == 0:
        raise ConfigError("mixture weights cannot all vanish")
    if n_particles < props.size:
        raise ConfigError("need at least one particle per atom")
    raw = props / props.sum() * n_particles
    counts = np.maximum(1, np.floor(raw).astype(int))
    while counts.sum() > n_particles:
        counts[np.argmax(counts)] -= 1
    order = np.argsort(raw - counts)[::-1]
    for idx in order:
        if counts.sum() == n_particles:
            break
        counts[idx] += 1
    return counts


# ---------------------------------------------------------------------------
# pushforward and integration

def push_forward(mu0: ParticleMeasure, t_grid, cfg: SimConfig, *,
                 workers: int = 1, stream_offset: int = 0) -> MeasurePath:
    """Evolve every particle along its own stream; weights are carried over."""
    times = np.asarray(t_grid, dtype=np.float64)
    if times.size < 1 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise DomainError("t_grid must start at 0 and strictly increase")
    rec_steps = [steps_for(t, cfg.dt) for t in times]
    n_steps = rec_steps[-1]
    rec_index = {s: i for i, s in enumerate(rec_steps)}
    mu0_padded = mu0.particles if mu0.m == cfg.m else _pad_columns(mu0.particles, cfg.m)

    def task(start, stop):
        states = mu0_padded[start:stop].copy()
        count = stop - start
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        snaps = np.empty((len(times), count, cfg.m))
        if 0 in rec_index:
            snaps[rec_index[0]] = states

        def on_step(j, st, alive):
            if j in rec_index:
                snaps[rec_index[j]] = st

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)
        return snaps, alive

    all_snaps = np.empty((len(times), mu0.n, cfg.m))
    aborted = 0
    pos = 0
    for snaps, alive in _map_chunks(mu0.n, workers, task):
        cnt = snaps.shape[1]
        all_snaps[:, pos:pos + cnt] = snaps
        aborted += int(cnt - np.count_nonzero(alive))
        pos += cnt
    measures = tuple(ParticleMeasure(all_snaps[i], mu0.weights)
                     for i in range(len(times)))
    return MeasurePath(times, measures, aborted)


def _pad_columns(arr: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((arr.shape[0], m))
    keep = min(m, arr.shape[1])
    out[:, :keep] = arr[:, :keep]
    return out


def integrate(mu: ParticleMeasure, f: ExpFunction) -> complex:
    """sum_i w_i phi_h(x_i), reduced in the same chunk order the engine uses."""
    total = 0.0 + 0.0j
    for start in range(0, mu.n, CHUNK):
        stop = min(start + CHUNK, mu.n)
        vals = eval_batch(f, mu.particles[start:stop])
        total += complex(np.sum(vals * mu.weights[start:stop]))
    return total


# ---------------------------------------------------------------------------
# weak Fokker-Planck residual

@dataclass(frozen=True)
class WeakResidual:
    """LHS - RHS of the weak identity with separated error components."""

    value: complex
    mc_stderr: float
    quad_delta: float
    value_refined: complex
    value_fine: complex
    lhs: complex
    lhs_stderr: float
    rhs: complex
    n_quad: int
    aborted: int

    @property
    def combined_error(self) -> float:
        return self.mc_stderr + self.quad_delta

    @property
    def quad_delta_refined(self) -> float:
        """Quadrature component after one refinement (for shrink checks)."""
        return float(abs(self.value_refined - self.value_fine))

    @property
    def valid(self) -> bool:
        return self.aborted == 0


def _node_steps(n_steps: int, n_intervals: int) -> np.ndarray:
    steps = np.round(np.arange(n_intervals + 1) * (n_steps / n_intervals))
    steps = steps.astype(int)
    if len(np.unique(steps)) != steps.size:
        raise DomainError(f"{n_intervals} intervals do not fit {n_steps} steps")
    return steps


def _trapz_weights_from_steps(steps: np.ndarray, dt: float) -> np.ndarray:
    times = steps * dt
    w = np.zeros(times.size)
    gaps = np.diff(times)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return w


def weak_residual(mu0: ParticleMeasure, f: ExpFunction, t: float, n_quad: int,
                  cfg: SimConfig, *, workers: int = 1,
                  stream_offset: int = 0) -> WeakResidual:
    """Residual of the weak measure-evolution identity over [0, t].

    n_quad counts the uniform time subintervals of the base trapezoid rule
    (nodes snap to the step grid).  Two nested refinements of the rule run on
    the same trajectories, so value - value_refined isolates the quadrature
    component of the error; the Monte Carlo component is the sample standard
    error of the per-particle residuals.  The time integrand applies the
    Kolmogorov operator of the simulated dynamics: the full K0 when the drift
    is on, the OU operator when it is off.
    """
    if n_quad < 2:
        raise DomainError(f"need at least 2 quadrature intervals, got {n_quad}")
    if t <= 0:
        raise DomainError(f"horizon must be positive, got {t}")
    n_steps = steps_for(t, cfg.dt)
    levels = [n_quad, 2 * n_quad, 4 * n_quad]
    node_sets = [_node_steps(n_steps, q) for q in levels]
    weight_maps = []
    for steps in node_sets:
        w = _trapz_weights_from_steps(steps, cfg.dt)
        weight_maps.append(dict(zip(steps.tolist(), w.tolist())))
    all_steps = sorted(set(node_sets[-1].tolist()))
    op = k0_batch if cfg.drift_enabled else l0_batch
    quad = cfg.quadrature

    def op_values(states):
        if op is k0_batch:
            return k0_batch(f, states, quad)
        return l0_batch(f, states)

    def task(start, stop):
        count = stop - start
        states = mu0.particles[start:stop].copy()
        if states.shape[1] != cfg.m:
            states = _pad_columns(states, cfg.m)
        noise = _noise_for(cfg, stream_offset, start, count, n_steps)
        integrals = np.zeros((len(levels), count), dtype=np.complex128)
        phi0 = eval_batch(f, states)

        def record(step, st):
            ov = None
            for lvl, wmap in enumerate(weight_maps):
                if step in wmap:
                    if ov is None:
                        ov = op_values(st)
                    integrals[lvl] += wmap[step] * ov

        record(0, states)
        record_set = set(all_steps)

        def on_step(j, st, alive):
            if j in record_set:
                record(j, st)

        alive = _evolve(states, StepKernel(cfg), noise, n_steps, on_step)
        return eval_batch(f, states) - phi0, integrals, alive

    n = mu0.n
    phi_gaps = np.empty(n, dtype=np.complex128)
    integrals = np.empty((len(levels), n), dtype=np.complex128)
    alive_all = np.empty(n, dtype=bool)
    pos = 0
    for gaps, ints, alive in _map_chunks(n, workers, task):
        cnt = gaps.size
        phi_gaps[pos:pos + cnt] = gaps
        integrals[:, pos:pos + cnt] = ints
        alive_all[pos:pos + cnt] = alive
        pos += cnt
    aborted = int(n - np.count_nonzero(alive_all))
    w = mu0.weights
    lhs = complex(np.sum(phi_gaps * w))
    rhs_levels = [complex(np.sum(integrals[lvl] * w)) for lvl in range(len(levels))]
    totals = [lhs - rhs for rhs in rhs_levels]
    # stderr of the base residual over per-particle contributions n w_i r_i
    v = n * w * (phi_gaps - integrals[0])
    v_lhs = n * w * phi_gaps
    if n > 1:
        se = np.hypot(np.std(v.real, ddof=1), np.std(v.imag, ddof=1)) / np.sqrt(n)
        se_lhs = np.hypot(np.std(v_lhs.real, ddof=1),
                          np.std(v_lhs.imag, ddof=1)) / np.sqrt(n)
    else:
        se = se_lhs = 0.0
    return WeakResidual(
        value=totals[0],
        mc_stderr=float(se),
        quad_delta=float(abs(totals[0] - totals[1])),
        value_refined=totals[1],
        value_fine=totals[2],
        lhs=lhs,
        lhs_stderr=float(se_lhs),
        rhs=rhs_levels[0],
        n_quad=n_quad,
        aborted=aborted,
    )


def v_integrability(path: MeasurePath, quad: Quadrature) -> float:
    """Trapezoid time integral of sum_i |w_i| (1 + V(x_i(t))) along the path."""
    if not path.valid:
        raise IntegrationError("measure path contains blown-up particles",
                               time=float(path.times[-1]))
    samples = []
    for mu in path.measures:
        vals = 1.0 + v_weight_batch(mu.particles, quad)
        samples.append(float(np.sum(np.abs(mu.weights) * vals)))
    result = float(np.trapezoid(samples, path.times))
    if not np.isfinite(result):
        raise IntegrationError("V-integrability integral is not finite")
    return result
