"""Closed-form calculus on exponential test functions phi_h(x) = e^{i<x,h>}.

With D phi = i h phi and D^2 phi = -(h (x) h) phi, the two operators of
interest reduce to scalar multipliers of phi:

    L0 phi(x) = (-1/2 |h|_2^2 + i <A h, x>) phi(x)
    K0 phi(x) = L0 phi(x) - (i/2) <h', x^2> phi(x)

where <h', x^2> = integral_0^1 h'(xi) x(xi)^2 dxi is evaluated by
Gauss-Legendre quadrature of the analytically synthesized h' and x.  The
quadrature route is deliberately independent of the pseudospectral grid used
by the dynamics, so operator checks and trajectory checks share no code path.

The exact Ornstein-Uhlenbeck action on exponentials is

    R_t phi_h(x) = exp(i <e^{tA} x, h> - 1/2 <Q_t h, h>).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .noise import ou_decay, qt_quadratic_form
from .spectral import (Quadrature, SpectralField, _derivative_matrix,
                       default_quadrature, eigenvalues, synthesize)


@dataclass(frozen=True)
class ExpFunction:
    """The cylindrical exponential phi_h; h has finitely many modes."""

    h: SpectralField

    @classmethod
    def from_pairs(cls, pairs, m: int | None = None) -> "ExpFunction":
        return cls(SpectralField.from_pairs(pairs, m))

    @property
    def is_constant(self) -> bool:
        return not np.any(self.h.coeffs)

    def conjugate(self) -> "ExpFunction":
        """phi_{-h}, the complex conjugate function."""
        return ExpFunction(SpectralField(-self.h.coeffs))


def _dot_padded(a: np.ndarray, b: np.ndarray) -> float:
    n = min(a.size, b.size)
    return float(np.dot(a[:n], b[:n]))


def eval_function(f: ExpFunction, x: SpectralField) -> complex:
    """phi_h(x) = e^{i<x,h>}; unit modulus for every x."""
    return complex(np.exp(1j * _dot_padded(x.coeffs, f.h.coeffs)))


def eval_batch(f: ExpFunction, states: np.ndarray) -> np.ndarray:
    """phi_h over rows of a coefficient array, shape (..., m) -> (...)."""
    h = f.h.coeffs
    n = min(states.shape[-1], h.size)
    return np.exp(1j * (states[..., :n] @ h[:n]))


def apply_L0(f: ExpFunction, x: SpectralField) -> complex:
    """Ornstein-Uhlenbeck operator: 1/2 Tr[D^2 phi] + <x, A D phi>."""
    h = f.h.coeffs
    trace_part = -0.5 * float(np.dot(h, h))
    ah = eigenvalues(f.h.m) * h
    return (trace_part + 1j * _dot_padded(ah, x.coeffs)) * eval_function(f, x)


def _transport_integrals(f: ExpFunction, states: np.ndarray,
                         quad: Quadrature) -> np.ndarray:
    """integral h'(xi) x(xi)^2 dxi for each state row."""
    m_h = f.h.m
    dmat = _derivative_matrix(m_h, quad.n_points)          # (n_pts, m_h)
    h_prime = dmat @ f.h.coeffs                            # h' at nodes
    vals = synthesize(states, quad)
    return (vals * vals) @ (quad.weights * h_prime)


def apply_K0(f: ExpFunction, x: SpectralField,
             quad: Quadrature | None = None) -> complex:
    """Kolmogorov operator of the Burgers system on phi_h.

    K0 phi = L0 phi - (i/2) <h', x^2> phi; the transport integral is computed
    by quadrature with h' synthesized analytically.
    """
    quad = default_quadrature(max(x.m, f.h.m)) if quad is None else quad
    transport = _transport_integrals(f, x.coeffs.reshape(1, -1), quad)[0]
    return apply_L0(f, x) - 0.5j * transport * eval_function(f, x)


def l0_batch(f: ExpFunction, states: np.ndarray) -> np.ndarray:
    """apply_L0 over rows of a coefficient array."""
    h = f.h.coeffs
    trace_part = -0.5 * float(np.dot(h, h))
    ah = eigenvalues(f.h.m) * h
    n = min(states.shape[-1], ah.size)
    drift_part = states[..., :n] @ ah[:n]
    return (trace_part + 1j * drift_part) * eval_batch(f, states)


def k0_batch(f: ExpFunction, states: np.ndarray, quad: Quadrature) -> np.ndarray:
    """apply_K0 over rows of a coefficient array."""
    transport = _transport_integrals(f, states, quad)
    return l0_batch(f, states) - 0.5j * transport * eval_batch(f, states)


def ou_exact_semigroup(f: ExpFunction, x: SpectralField, t: float) -> complex:
    """R_t phi_h(x) = exp(i <e^{tA} x, h> - 1/2 <Q_t h, h>)."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    m = max(x.m, f.h.m)
    phase = _dot_padded(ou_decay(t, m) * x.pad_to(m).coeffs, f.h.coeffs)
    return complex(np.exp(1j * phase - 0.5 * qt_quadratic_form(f.h, t)))


def ou_exact_derivative(f: ExpFunction, x: SpectralField, t: float,
                        g: SpectralField) -> complex:
    """Directional derivative of R_t phi_h at x in direction g.

    Differentiating the closed form gives i <e^{tA} g, h> R_t phi_h(x), the
    exponential-function case of the derivative commutation identity
    <D R_t phi, g> = R_t(<D phi, e^{tA} g>).
    """
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    m = max(g.m, f.h.m)
    factor = _dot_padded(ou_decay(t, m) * g.pad_to(m).coeffs, f.h.coeffs)
    return 1j * factor * ou_exact_semigroup(f, x, t)
