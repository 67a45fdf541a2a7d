"""burgerlab: a desk-scale laboratory for the stochastic Burgers equation.

Simulates the spectral Galerkin truncation of the viscous Burgers equation
driven by space-time white noise, and verifies the semigroup structure around
it: Monte Carlo transition estimates against closed-form Ornstein-Uhlenbeck
oracles, finite-difference generator checks against the explicit Kolmogorov
operator on exponential test functions, Feynman-Kac reconstruction, and
particle-measure checks of the weak Fokker-Planck identity.
"""

from .cylinder import (ExpFunction, apply_K0, apply_L0, eval_function,
                       ou_exact_derivative, ou_exact_semigroup)
from .errors import ConfigError, DomainError, IntegrationError
from .estimators import (DerivativeEstimate, FdEstimate, FkReconstruction,
                         McEstimate, chapman_kolmogorov,
                         directional_derivative_crn, estimate_Pt,
                         estimate_feynman_kac, feynman_kac_reconstruction,
                         generator_fd, moment_estimate, v_weight)
from .measures import (Dirac, DiracMixture, GaussianModes, MeasurePath,
                       ParticleMeasure, WeakResidual, integrate, push_forward,
                       sample_initial_measure, v_integrability, weak_residual)
from .noise import (RngStream, derive_stream, ou_transition_sample,
                    qt_quadratic_form)
from .solver import (SimConfig, Trajectory, simulate,
                     simulate_deterministic_burgers, step)
from .spectral import (Quadrature, SpectralField, apply_A, basis_eval,
                       burgers_drift, default_quadrature, heat_semigroup,
                       inner_product, lp_norm)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "IntegrationError",
    "Quadrature", "SpectralField", "apply_A", "basis_eval", "burgers_drift",
    "default_quadrature", "heat_semigroup", "inner_product", "lp_norm",
    "RngStream", "derive_stream", "ou_transition_sample", "qt_quadratic_form",
    "SimConfig", "Trajectory", "simulate", "simulate_deterministic_burgers",
    "step",
    "ExpFunction", "apply_K0", "apply_L0", "eval_function",
    "ou_exact_derivative", "ou_exact_semigroup",
    "McEstimate", "FdEstimate", "DerivativeEstimate", "FkReconstruction",
    "estimate_Pt", "generator_fd", "chapman_kolmogorov",
    "estimate_feynman_kac", "feynman_kac_reconstruction",
    "directional_derivative_crn", "moment_estimate", "v_weight",
    "Dirac", "DiracMixture", "GaussianModes", "MeasurePath",
    "ParticleMeasure", "WeakResidual", "integrate", "push_forward",
    "sample_initial_measure", "v_integrability", "weak_residual",
    "__version__",
]
