"""Coulomb-gas screening solutions for multiple chordal SLE(kappa) and numerical
checks of the null-vector, Ward, commutation and capacity identities."""

from .coulomb import (DegenerateNormalizationWarning, PartitionEvaluation, ScreeningFunction, eval_J, eval_K,
                      log_gradient_psi, make_master_spec, scaling_exponent_about_u, scaling_exponent_d,
                      screening_integral)
from .errors import (ChargeConventionError, ContourGeometryError, ConvergenceError, DomainError, SingularInputError,
                     SLEError, StencilError, StepFailure, UnsupportedConfigurationError)
from .linkpatterns import LinkPattern, count_link_patterns, enumerate_link_patterns, parse_arcs
from .params import (INF, BoundaryConfig, KappaParams, d_closed_form, lambda_excited_closed, lambda_ground_closed,
                     make_kappa_params, parse_kappa, verify_charge_conventions)

__version__ = "0.1.0"
