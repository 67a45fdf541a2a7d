"""Sine eigenbasis of the Dirichlet Laplacian on (0,1) and spectral fields.

The basis is e_k(xi) = sqrt(2)*sin(k*pi*xi), orthonormal in L^2(0,1), with
A e_k = lambda_k e_k, lambda_k = -(k*pi)^2.  A state is a finite coefficient
vector c_1..c_m; the represented function x(xi) = sum_k c_k e_k(xi) vanishes
at both endpoints by construction.

L^p norms are evaluated by Gauss-Legendre quadrature of the synthesized
function.  The quadratic Burgers nonlinearity b_m(x) = P_m(1/2 d/dxi (P_m x)^2)
is computed pseudospectrally on a uniform interior grid fine enough that the
product expansion is exact (the square of an m-mode sine series is a cosine
series of degree 2m, so any grid with more than 2m intervals is alias-free).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# quadrature

@lru_cache(maxsize=64)
def _gauss_legendre_01(n_points: int):
    """Nodes/weights of Gauss-Legendre quadrature mapped to [0,1]."""
    t, w = np.polynomial.legendre.leggauss(n_points)
    nodes = 0.5 * (t + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class Quadrature:
    """A fixed quadrature rule on [0,1].

    Gauss-Legendre with n_points nodes integrates polynomials of degree
    2*n_points - 1 exactly; for the oscillatory sine-product integrands used
    here, n_points >= 4*m resolves all mode products j+k <= 2m to roundoff.
    """

    n_points: int
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if self.n_points < 1:
            raise DomainError(f"n_points must be positive, got {self.n_points}")
        if self.rule != "gauss-legendre":
            raise DomainError(f"unknown quadrature rule {self.rule!r}")

    @property
    def nodes(self) -> np.ndarray:
        return _gauss_legendre_01(self.n_points)[0]

    @property
    def weights(self) -> np.ndarray:
        return _gauss_legendre_01(self.n_points)[1]


def default_quadrature(m: int) -> Quadrature:
    """Default rule for fields with m modes: max(4m, 64) Gauss-Legendre points."""
    return Quadrature(max(4 * m, 64))


# ---------------------------------------------------------------------------
# fields

@dataclass(frozen=True, eq=False)
class SpectralField:
    """A state truncated to m sine modes, held as the coefficient vector."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, copy=True).reshape(-1)
        if c.size < 1:
            raise DomainError("a field needs at least one mode")
        if not np.all(np.isfinite(c)):
            raise DomainError("field coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def m(self) -> int:
        return self.coeffs.size

    @classmethod
    def zero(cls, m: int) -> "SpectralField":
        return cls(np.zeros(m))

    @classmethod
    def basis(cls, k: int, m: int | None = None) -> "SpectralField":
        """The unit coefficient vector of e_k, embedded in m modes."""
        if k < 1:
            raise DomainError(f"mode index must be >= 1, got {k}")
        m = k if m is None else m
        if m < k:
            raise DomainError(f"m={m} cannot hold mode {k}")
        c = np.zeros(m)
        c[k - 1] = 1.0
        return cls(c)

    @classmethod
    def from_pairs(cls, pairs, m: int | None = None) -> "SpectralField":
        """Build from a sparse list of (mode, coefficient) pairs."""
        pairs = list(pairs)
        if not pairs:
            return cls.zero(m if m else 1)
        top = max(int(k) for k, _ in pairs)
        m = top if m is None else m
        if m < top:
            raise DomainError(f"m={m} cannot hold mode {top}")
        c = np.zeros(m)
        for k, v in pairs:
            k = int(k)
            if k < 1:
                raise DomainError(f"mode index must be >= 1, got {k}")
            c[k - 1] += float(v)
        return cls(c)

    def pad_to(self, m: int) -> "SpectralField":
        """Same function viewed with m modes; truncation drops high modes."""
        if m == self.m:
            return self
        c = np.zeros(m)
        keep = min(m, self.m)
        c[:keep] = self.coeffs[:keep]
        return SpectralField(c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        m = max(self.m, other.m)
        return SpectralField(self.pad_to(m).coeffs + other.pad_to(m).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        m = max(self.m, other.m)
        return SpectralField(self.pad_to(m).coeffs - other.pad_to(m).coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(m={self.m}, coeffs={self.coeffs!r})"


# ---------------------------------------------------------------------------
# basis and linear operators

def eigenvalues(m: int) -> np.ndarray:
    """lambda_k = -(k*pi)^2 for k = 1..m."""
    k = np.arange(1, m + 1, dtype=np.float64)
    return -((k * np.pi) ** 2)


def basis_eval(k: int, xi) -> np.ndarray | float:
    """e_k(xi) = sqrt(2)*sin(k*pi*xi) for xi in [0,1]."""
    if k < 1 or int(k) != k:
        raise DomainError(f"mode index must be a positive integer, got {k}")
    xi_arr = np.asarray(xi, dtype=np.float64)
    if np.any(xi_arr < 0.0) or np.any(xi_arr > 1.0):
        raise DomainError("xi must lie in [0,1]")
    out = SQRT2 * np.sin(k * np.pi * xi_arr)
    return float(out) if np.isscalar(xi) or out.ndim == 0 else out


def apply_A(x: SpectralField) -> SpectralField:
    """Second spatial derivative: mode k scaled by -(k*pi)^2."""
    return SpectralField(eigenvalues(x.m) * x.coeffs)


def heat_semigroup(t: float, x: SpectralField) -> SpectralField:
    """e^{tA} x: mode k multiplied by exp(lambda_k t).  Contracts every L^p."""
    if t < 0:
        raise DomainError(f"heat semigroup needs t >= 0, got {t}")
    return SpectralField(np.exp(eigenvalues(x.m) * t) * x.coeffs)


def inner_product(x: SpectralField, y: SpectralField) -> float:
    """L^2 inner product; by Parseval the coefficient dot product."""
    n = min(x.m, y.m)
    return float(np.dot(x.coeffs[:n], y.coeffs[:n]))


# ---------------------------------------------------------------------------
# synthesis and norms

@lru_cache(maxsize=128)
def _synthesis_matrix(m: int, n_points: int) -> np.ndarray:
    """e_k(xi_j) on the Gauss-Legendre grid, shape (n_points, m)."""
    nodes = _gauss_legendre_01(n_points)[0]
    k = np.arange(1, m + 1, dtype=np.float64)
    mat = SQRT2 * np.sin(np.pi * np.outer(nodes, k))
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=128)
def _derivative_matrix(m: int, n_points: int) -> np.ndarray:
    """e_k'(xi_j) = sqrt(2)*k*pi*cos(k*pi*xi_j), shape (n_points, m)."""
    nodes = _gauss_legendre_01(n_points)[0]
    k = np.arange(1, m + 1, dtype=np.float64)
    mat = SQRT2 * np.pi * k * np.cos(np.pi * np.outer(nodes, k))
    mat.flags.writeable = False
    return mat


def synthesize(coeffs: np.ndarray, quad: Quadrature) -> np.ndarray:
    """Function values at the quadrature nodes; batched over leading axes."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return coeffs @ _synthesis_matrix(coeffs.shape[-1], quad.n_points).T


def lp_norm(x: SpectralField, p: float, quad: Quadrature | None = None) -> float:
    """|x|_p = (integral of |x|^p)^(1/p); p = inf uses the max over nodes.

    The sup norm is a lower bound (max over finitely many points); it
    converges from below under grid refinement.
    """
    if p != np.inf and p < 1:
        raise DomainError(f"lp_norm needs p >= 1 or inf, got {p}")
    quad = default_quadrature(x.m) if quad is None else quad
    vals = synthesize(x.coeffs, quad)
    if p == np.inf:
        # endpoints are exact zeros of every field, included for the contract
        return float(max(np.max(np.abs(vals)), 0.0))
    return float(np.sum(quad.weights * np.abs(vals) ** p) ** (1.0 / p))


def lp_norm_batch(states: np.ndarray, p: float, quad: Quadrature) -> np.ndarray:
    """|x|_p for a batch of coefficient rows, shape (..., m) -> (...)."""
    if p != np.inf and p < 1:
        raise DomainError(f"lp_norm needs p >= 1 or inf, got {p}")
    vals = synthesize(states, quad)
    if p == np.inf:
        return np.max(np.abs(vals), axis=-1)
    return np.sum(quad.weights * np.abs(vals) ** p, axis=-1) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Burgers nonlinearity

@lru_cache(maxsize=64)
def _drift_matrices(m: int, n_interior: int):
    """Synthesis/projection matrices for the pseudospectral drift.

    Interior grid xi_j = j/N, j = 1..N-1 with N = n_interior + 1.  The square
    of the synthesized field is a cosine series of degree 2m; projecting
    1/2 d/dxi of it onto e_k gives coefficients -a_k*k*pi/(2*sqrt2) where a_k
    is the k-th cosine coefficient, recovered by the discrete cosine sum
    a_k = (2/N) * sum_j sq_j cos(pi*k*j/N) (exact when N > 2m).
    """
    N = n_interior + 1
    j = np.arange(1, N, dtype=np.float64)
    k = np.arange(1, m + 1, dtype=np.float64)
    synth = SQRT2 * np.sin(np.pi * np.outer(j, k) / N)          # (N-1, m)
    proj = np.cos(np.pi * np.outer(j, k) / N)                   # (N-1, m)
    proj = proj * (-(2.0 / N) * k * np.pi / (2.0 * SQRT2))
    synth.flags.writeable = False
    proj.flags.writeable = False
    return synth, proj


def drift_coeffs(states: np.ndarray, m: int, n_interior: int | None = None) -> np.ndarray:
    """b_m coefficients for a batch of states, shape (..., >=m) -> (..., m)."""
    if m < 1:
        raise DomainError(f"truncation level must be positive, got {m}")
    if n_interior is None:
        n_interior = max(2 * m + 1, 64)
    elif n_interior < 2 * m + 1:
        raise DomainError(f"need at least 2m+1 interior points, got {n_interior}")
    synth, proj = _drift_matrices(m, n_interior)
    states = np.asarray(states, dtype=np.float64)
    vals = states[..., :m] @ synth.T
    np.square(vals, out=vals)
    return vals @ proj


def burgers_drift(x: SpectralField, m: int | None = None,
                  n_interior: int | None = None) -> SpectralField:
    """b_m(x) = P_m(1/2 d/dxi (P_m x)^2); satisfies <b_m(x), x> = 0."""
    m = x.m if m is None else m
    if m < 1:
        raise DomainError(f"truncation level must be positive, got {m}")
    return SpectralField(drift_coeffs(x.pad_to(m).coeffs, m, n_interior))
