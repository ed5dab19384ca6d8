"""Fundamental solutions of ``-L_{a,p}`` with pole on the manifold ``{z = 0}``.

The solution is ``C rho^(-(Q-p)/(p-1))`` for ``p != Q`` and ``-C log rho``
for ``p = Q``, where ``rho`` is the dual gauge centered at ``(0, sigma0)``.
The constant is fixed by the weighted volume
``omega = int_{rho<1} (phi0(z)/rho)^(a p)`` through ``sigma = Q omega``.
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._fields import ScalarField
from ._validation import ORIGIN_RADIUS, check_points, check_positive, unwrap
from .exceptions import DomainError, InconsistencyError, RegimeWarning
from .gauge import ProductGauge, homogeneous_dimension
from .minkowski import EuclideanNorm
from .operators import LOG_BRANCH_TOL, OperatorParams, _flux
from .quadrature import (Estimate, GaugeBall, QuadratureConfig, excision_sequence,
                         integrate, richardson_weights, shell_surface_estimate)

__all__ = [
    "default_config", "omega_constant", "sigma_constant", "normalization_constant",
    "FundamentalSolution", "build", "Bump", "WeakFormResult", "weak_form_test",
    "classical_constant", "ClassicalLimitReport", "classical_limit_check", "power_exponent",
    "EPS_SCHEDULE",
]

EPS_SCHEDULE = (0.08, 0.04, 0.02)
_MAX_DIM = 6
SHELL_TARGET = 1e-3


def default_config(g, seed=0):
    """Adaptive cubature up to four dimensions, Monte Carlo beyond."""
    if g.dim <= 4:
        return QuadratureConfig(method="adaptive", budget=20_000_000, target_rel_error=1e-3, seed=seed)
    return QuadratureConfig(method="monte-carlo", budget=10_000_000, target_rel_error=1e-3, seed=seed)


def _child_seed(seed, tag):
    return int(np.random.SeedSequence([seed, tag]).generate_state(1)[0])


def _check_dim(g):
    if g.dim > _MAX_DIM:
        raise ValueError(f"constants are estimated for m + k <= {_MAX_DIM} only")


def omega_constant(g, params, cfg=None):
    """``int_{rho<1} (phi0(z)/rho)^(a p) dz dsigma``; the integrand lies in [0, 1]."""
    _check_dim(g)
    params.check_gauge(g)
    cfg = cfg or default_config(g)
    power = g.alpha * params.p
    est = integrate(lambda x: g.distortion(x, power), GaugeBall(1.0), g, cfg)
    est.details["quantity"] = "omega"
    return est


def sigma_constant(g, params, cfg=None, check=True):
    """``sigma = Q omega`` plus an independent thin-shell surface estimate.

    Raises
    ------
    InconsistencyError
        When the two routes differ by more than three combined errors.
    """
    cfg = cfg or default_config(g)
    om = omega_constant(g, params, cfg)
    Q = g.Q
    value, error = Q * om.value, Q * om.error
    # the three-width extrapolation leaves an O(delta^3) bias, so the shell
    # route is not asked for more than SHELL_TARGET relative accuracy
    shell_cfg = QuadratureConfig(cfg.method, cfg.budget, max(cfg.target_rel_error, SHELL_TARGET),
                                 _child_seed(cfg.seed, 1), cfg.strata)
    power = g.alpha * params.p
    sh = shell_surface_estimate(lambda x: g.distortion(x, power), g, shell_cfg)
    combined = math.hypot(error, sh.error)
    gap = abs(value - sh.value)
    if check and gap > 3 * combined:
        raise InconsistencyError(
            f"volume route gives sigma={value:.8g}, thin-shell route {sh.value:.8g}; "
            f"gap {gap:.3g} exceeds 3x combined error {combined:.3g}")
    return Estimate(value, error, om.method, om.evaluations + sh.evaluations, cfg.seed,
                    om.converged, {"omega": om, "shell": sh, "gap": gap, "combined_error": combined})


def normalization_constant(Q, p, sigma):
    """``(p-1)/(Q-p) sigma^(-1/(p-1))``, or ``sigma^(-1/(Q-1))`` when ``p = Q``."""
    if abs(p - Q) < LOG_BRANCH_TOL:
        return sigma ** (-1.0 / (Q - 1))
    return (p - 1) / (Q - p) * sigma ** (-1.0 / (p - 1))


def power_exponent(m, k, alpha, p):
    """``-(Q-p)/(p-1)``; exact for Fraction or integer inputs."""
    Q = homogeneous_dimension(m, k, alpha)
    return -(Q - p) / (p - 1) if isinstance(Q - p, float) else Fraction(-(Q - p), p - 1)


class FundamentalSolution(BaseEstimator):
    """Normalized fundamental solution of ``-L_{a,p}`` for a product gauge.

    ``fit`` computes the constants; it takes no data.

    Parameters
    ----------
    gauge : ProductGauge
    p : float
    pole_sigma : array-like of shape (k,), optional
        The pole is ``(0, pole_sigma)``.
    config : QuadratureConfig, optional
        Defaults to :func:`default_config`.
    check_consistency : bool
        Cross-check ``sigma`` against the thin-shell route during ``fit``.

    Attributes
    ----------
    omega_, sigma_ : Estimate
    constant_ : float
    constant_error_ : float
    branch_ : {"power", "log"}
    exponent_ : float
        Power of ``rho`` in the power branch (``nan`` for the log branch).
    """

    def __init__(self, gauge=None, p=2.0, pole_sigma=None, config=None, check_consistency=True):
        self.gauge = gauge
        self.p = p
        self.pole_sigma = pole_sigma
        self.config = config
        self.check_consistency = check_consistency

    def _pole(self):
        k = self.gauge.k
        if self.pole_sigma is None:
            return np.zeros(k)
        pole = np.asarray(self.pole_sigma, float).reshape(-1)
        if pole.shape != (k,) or not np.all(np.isfinite(pole)):
            raise ValueError(f"pole_sigma must be a finite vector of length {k}")
        return pole

    def fit(self, X=None, y=None):
        if not isinstance(self.gauge, ProductGauge):
            raise TypeError("gauge must be a ProductGauge")
        params = OperatorParams(self.gauge.alpha, self.p)
        self.params_ = params
        self.pole_ = self._pole()
        g, p = self.gauge, params.p
        Q = g.Q
        cfg = self.config or default_config(g)
        self.config_ = cfg
        self.sigma_ = sigma_constant(g, params, cfg, check=self.check_consistency)
        self.omega_ = self.sigma_.details["omega"]
        s, ds = self.sigma_.value, self.sigma_.error
        self.Q_ = Q
        if abs(p - Q) < LOG_BRANCH_TOL:
            self.branch_, self.exponent_ = "log", math.nan
            rel = ds / s / (Q - 1)
        else:
            self.branch_, self.exponent_ = "power", -(Q - p) / (p - 1)
            rel = ds / s / (p - 1)
            if Q < p:
                warnings.warn(f"Q = {Q:g} < p = {p:g}: the constant is negative and the "
                              "solution grows at infinity; results are formal",
                              RegimeWarning, stacklevel=2)
        self.constant_ = normalization_constant(Q, p, s)
        self.constant_error_ = abs(self.constant_) * rel
        return self

    # evaluation in coordinates centered at the pole
    def _centered(self, x):
        check_is_fitted(self, "constant_")
        arr, single = check_points(x, self.gauge.dim)
        y = arr.copy()
        y[:, self.gauge.m:] -= self.pole_
        if np.any(self.gauge.rho(y) < ORIGIN_RADIUS):
            raise DomainError("the fundamental solution is singular at its pole")
        return y, single

    def _value(self, y):
        r = self.gauge.rho(y)
        if self.branch_ == "log":
            return -self.constant_ * np.log(r)
        return self.constant_ * r**self.exponent_

    def _gradient(self, y):
        r = self.gauge.rho(y)
        if self.branch_ == "log":
            d = -self.constant_ / r
        else:
            d = self.constant_ * self.exponent_ * r ** (self.exponent_ - 1)
        return d[:, None] * self.gauge.rho_gradient(y)

    def evaluate(self, x):
        y, single = self._centered(x)
        return unwrap(self._value(y), single)

    def predict(self, X):
        return self.evaluate(X)

    def gradient(self, x):
        y, single = self._centered(x)
        return unwrap(self._gradient(y), single)

    def as_field(self):
        """The solution as a :class:`ScalarField` with analytic gradient."""
        return ScalarField(value=self.evaluate, gradient=self.gradient,
                           singular=lambda x: self.gauge.rho(self._shift(x)) < ORIGIN_RADIUS,
                           name="G")

    def _shift(self, x):
        y = np.array(x, dtype=float)
        y[:, self.gauge.m:] -= self.pole_
        return y

    def record(self):
        """JSON-ready summary of the constants."""
        check_is_fitted(self, "constant_")
        cfg = self.config_
        return {
            "gauge": self.gauge.to_dict(), "alpha": self.gauge.alpha, "p": self.params_.p,
            "Q": self.Q_, "branch": self.branch_,
            "exponent": None if self.branch_ == "log" else self.exponent_,
            "omega": self.omega_.value, "omega_err": self.omega_.error,
            "sigma": self.sigma_.value, "sigma_err": self.sigma_.error,
            "sigma_shell": self.sigma_.details["shell"].value,
            "sigma_shell_err": self.sigma_.details["shell"].error,
            "C": self.constant_, "C_err": self.constant_error_,
            "pole_sigma": self.pole_.tolist(),
            "method": cfg.method, "seed": cfg.seed, "budget": cfg.budget,
        }


def build(g, params, cfg=None, pole_sigma=None):
    """Fit a :class:`FundamentalSolution` for the gauge and operator parameters."""
    params.check_gauge(g)
    return FundamentalSolution(g, params.p, pole_sigma, cfg).fit()


# -- weak form -----------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    """``amplitude (1 - |x - center|^2 / radius^2)^4`` on the Euclidean ball, 0 outside."""

    center: tuple
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        check_positive(self.radius, "radius")
        check_positive(self.amplitude, "amplitude", strict=False)

    def value(self, x):
        s = np.sum((np.atleast_2d(x) - self.center) ** 2, axis=1) / self.radius**2
        return self.amplitude * np.clip(1 - s, 0, None) ** 4

    def gradient(self, x):
        d = np.atleast_2d(x) - np.asarray(self.center)
        s = np.sum(d**2, axis=1) / self.radius**2
        c = -8 * self.amplitude * np.clip(1 - s, 0, None) ** 3 / self.radius**2
        return c[:, None] * d

    def box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass
class WeakFormResult:
    """Extrapolated pairing of the flux of ``G`` with a test function."""

    value: float
    error: float
    target: float                 # phi at the pole
    eps: tuple
    partial: list                 # I(eps) for each eps
    partial_errors: list
    method: str
    evaluations: int
    details: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.value / self.target if self.target else math.nan

    def as_dict(self):
        return {"value": self.value, "error": self.error, "target": self.target,
                "ratio": self.ratio, "eps": list(self.eps), "partial": self.partial,
                "partial_errors": self.partial_errors, "method": self.method,
                "evaluations": self.evaluations}


def weak_test_config(seed=0):
    return QuadratureConfig(method="adaptive", budget=60_000_000, target_rel_error=1e-3, seed=seed)


def weak_form_test(G, phi, cfg=None, eps_schedule=EPS_SCHEDULE):
    """``int_{rho > eps} <flux(grad G), grad phi>`` extrapolated to ``eps -> 0``.

    For a fundamental solution of ``-L`` the limit equals ``phi`` at the pole.
    The extrapolation is a polynomial in ``eps`` through the whole schedule;
    its error estimate adds the change against the two finest radii (a
    linear model) to the quadrature errors.
    """
    check_is_fitted(G, "constant_")
    g, p = G.gauge, G.params_.p
    if G.Q_ < p and abs(p - G.Q_) >= LOG_BRANCH_TOL:
        raise DomainError(f"weak-form test refused for Q = {G.Q_:g} < p = {p:g}: "
                          "the constant is negative and the weak identity is not established there")
    cfg = cfg or weak_test_config()
    pole = np.concatenate([np.zeros(g.m), G.pole_])
    lo, hi = phi.box()

    def integrand(y):
        fl = _flux(g, p, y, G._gradient(y))
        return np.einsum("ij,ij->i", fl, phi.gradient(y + pole))

    ests = excision_sequence(integrand, g, np.asarray(lo) - pole, np.asarray(hi) - pole,
                             eps_schedule, cfg, scale=phi.amplitude)
    eps = np.asarray(eps_schedule, float)
    vals = np.array([e.value for e in ests])
    errs = np.array([e.error for e in ests])
    w = richardson_weights(eps)
    value = float(w @ vals)
    fine = np.argsort(eps)[:2]
    linear = float(richardson_weights(eps[fine]) @ vals[fine])
    error = float(np.abs(w) @ errs + abs(value - linear))
    return WeakFormResult(value, error, float(phi.value(pole)[0]), tuple(eps_schedule),
                          vals.tolist(), errs.tolist(), cfg.method, ests[0].evaluations,
                          {"linear_extrapolation": linear})


# -- classical limit -------------------------------------------------------------

def classical_constant(N, p):
    """Normalization of the p-Laplace fundamental solution in ``R^N``:
    ``(p-1)/(N-p) (N w_N)^(-1/(p-1))`` with ``w_N`` the unit-ball volume
    (``(N w_N)^(-1/(N-1))`` for ``p = N``, with the solution ``-c log|x|``)."""
    wn = math.pi ** (N / 2) / math.gamma(N / 2 + 1)
    if abs(p - N) < LOG_BRANCH_TOL:
        return (N * wn) ** (-1.0 / (N - 1))
    return (p - 1) / (N - p) * (N * wn) ** (-1.0 / (p - 1))


@dataclass
class ClassicalLimitReport:
    alpha: float
    p: float
    m: int
    k: int
    Q: float
    constant: float
    constant_error: float
    classical: float
    raw_ratio: float
    adjusted_ratio: float         # after the change of variables sigma -> 2 sigma
    exponent: float
    classical_exponent: float

    def as_dict(self):
        return dict(self.__dict__)


def classical_limit_check(p, m, k, cfg=None, alpha=1e-3):
    """Compare the normalization at small ``alpha`` with the Euclidean one.

    At ``alpha = 0`` the substitution ``sigma' = 2 sigma`` turns the
    operator into the p-Laplacian of ``R^(m+k)`` while the volume element
    picks up ``2^-k``; since the equation is (p-1)-homogeneous the constant
    becomes ``2^(k/(p-1))`` times the classical one. The report carries the
    ratio both before and after removing that factor.
    """
    g = ProductGauge(EuclideanNorm(m), EuclideanNorm(k), alpha)
    G = FundamentalSolution(g, p, config=cfg).fit()
    N = m + k
    cl = classical_constant(N, p)
    factor = 2.0 ** (k / (p - 1)) if abs(p - N) >= LOG_BRANCH_TOL else 2.0 ** (k / (N - 1))
    cexp = math.nan if abs(p - N) < LOG_BRANCH_TOL else -(N - p) / (p - 1)
    return ClassicalLimitReport(alpha, p, m, k, G.Q_, G.constant_, G.constant_error_, cl,
                                G.constant_ / cl, G.constant_ / (factor * cl),
                                G.exponent_, cexp)
