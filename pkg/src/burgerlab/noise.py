"""Exact Ornstein-Uhlenbeck transitions and reproducible random streams.

Mode k of the linear equation dZ = AZ dt + dW is a scalar OU process with
rate |lambda_k|; over a step of length t its transition is Gaussian with
mean exp(lambda_k t) * z_k and variance (1 - exp(2 lambda_k t)) / (2|lambda_k|).
Sampling this transition directly makes the linear-plus-noise part of every
integrator exact in law, at any step size.

Streams are counter-based: trajectory i draws from a Philox generator keyed
by the 128-bit word (stream_index, master_seed), so any stream is O(1) to
derive, streams never overlap, and a path's draws do not depend on worker
scheduling.  Normal variates come from numpy's ziggurat implementation, fixed
per release of numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spectral import SpectralField, eigenvalues

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Identity of one reproducible stream: (master_seed, stream_index)."""

    master_seed: int
    stream_index: int

    def key(self) -> int:
        """128-bit Philox key; low word is the stream index."""
        return ((self.master_seed & _MASK64) << 64) | (self.stream_index & _MASK64)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        return np.random.Generator(np.random.Philox(key=self.key()))


def derive_stream(master_seed: int, index: int) -> RngStream:
    """Stream owned by trajectory/particle `index` under `master_seed`."""
    return RngStream(int(master_seed), int(index))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def normal_block(master_seed: int, first_index: int, count: int, per_path: int,
                 out: np.ndarray | None = None) -> np.ndarray:
    """Standard normals for `count` consecutive streams, shape (count, per_path).

    Row i holds the first `per_path` draws of stream first_index + i, exactly
    as RngStream.generator().standard_normal would produce them.  Rebinding
    the key on a single Philox instance avoids per-path construction cost but
    yields bit-identical values.
    """
    if out is None:
        out = np.empty((count, per_path))
    bg = np.random.Philox(key=0)
    gen = np.random.Generator(bg)
    state = bg.state
    key = state["state"]["key"].copy()
    counter = np.zeros(4, dtype=np.uint64)
    key[1] = master_seed & _MASK64
    for i in range(count):
        key[0] = (first_index + i) & _MASK64
        state["state"]["key"] = key
        state["state"]["counter"] = counter
        state["buffer_pos"] = 4
        bg.state = state
        out[i] = gen.standard_normal(per_path)
    return out


# ---------------------------------------------------------------------------
# OU transition law

def ou_decay(t: float, m: int) -> np.ndarray:
    """exp(lambda_k t) for k = 1..m."""
    return np.exp(eigenvalues(m) * t)


def ou_step_std(t: float, m: int) -> np.ndarray:
    """Standard deviation of mode k of the stochastic convolution W_A(t).

    Var = integral_0^t exp(2 lambda_k s) ds = (1 - exp(2 lambda_k t)) / (2|lambda_k|).
    """
    lam = eigenvalues(m)
    return np.sqrt((1.0 - np.exp(2.0 * lam * t)) / (-2.0 * lam))


def qt_quadratic_form(h: SpectralField, t: float) -> float:
    """<Q_t h, h> = sum_k h_k^2 (1 - exp(2 lambda_k t)) / (2|lambda_k|)."""
    if t < 0:
        raise DomainError(f"covariance form needs t >= 0, got {t}")
    std = ou_step_std(t, h.m)
    return float(np.sum((h.coeffs * std) ** 2))


def ou_transition_sample(state: SpectralField, dt: float, rng) -> SpectralField:
    """One exact draw of e^{dt A} state + W_A(dt), truncated to state.m modes."""
    if dt <= 0:
        raise DomainError(f"transition step needs dt > 0, got {dt}")
    gen = _as_generator(rng)
    m = state.m
    mean = ou_decay(dt, m) * state.coeffs
    return SpectralField(mean + ou_step_std(dt, m) * gen.standard_normal(m))
