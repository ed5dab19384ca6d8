"""Anisotropic Minkowski gauges, their Legendre transform, Finsler
Baouendi-Grushin operators and their fundamental solutions."""

from .exceptions import (AnisoGaugeError, BudgetWarning, ConvergenceError, DegeneratePointError,
                         DomainError, InconsistencyError, RegimeWarning)
from .fundsol import (Bump, FundamentalSolution, build, classical_limit_check, omega_constant,
                      sigma_constant, weak_form_test)
from .gauge import (ProductGauge, Theta0Settings, dilate, eikonal_residual, rho_gradient, theta,
                    theta0, theta0_variational)
from .minkowski import (CustomNorm, DualResolution, EuclideanNorm, PowerNorm, QuadraticNorm,
                        dual_gradient, dual_value, finsler_laplacian, norm_from_dict,
                        norm_gradient, norm_value, verify_duality_suite)
from .operators import (OperatorParams, RadialProfile, ScalarField, apply_Lp, energy_density, flux,
                        profile, radial_consistency_report, radial_field, radial_rhs)
from .quadrature import (BoxMinusBall, Estimate, GaugeBall, GaugeShell, QuadratureConfig,
                         integrate, shell_surface_estimate)

__version__ = "0.1.0"
