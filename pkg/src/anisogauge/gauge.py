"""Anisotropic product gauges on R^m x R^k and their anisotropic Legendre transform.

Points are flat arrays ``[z_1..z_m, sigma_1..sigma_k]``; a batch is an
``(n, m + k)`` array. The split index is ``gauge.m``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import ORIGIN_RADIUS, check_int, check_points, check_positive, unwrap
from .exceptions import ConvergenceError, DomainError
from .minkowski import (DualResolution, MinkowskiNorm, VariationalDualNorm, dual_norm,
                        half_square_gradient, norm_from_dict)

__all__ = [
    "ProductGauge", "Theta0Settings", "homogeneous_dimension",
    "theta", "theta0", "theta0_variational", "dilate", "rho_gradient", "eikonal_residual",
]


def homogeneous_dimension(m, k, alpha):
    """``m + (alpha + 1) k``; exact when ``alpha`` is a Fraction."""
    return m + (alpha + 1) * k


@dataclass(frozen=True, eq=False)
class ProductGauge:
    """The pair of layer norms ``(phi on R^m, psi on R^k)`` with exponent ``alpha``.

    ``theta`` is the gauge ``(phi(z)^(2a+2) + 4 (a+1)^2 psi(sigma)^2)^(1/(2a+2))``
    and ``rho`` is the same expression in the dual norms. Both are
    1-homogeneous under ``(z, sigma) -> (t z, t^(a+1) sigma)``.
    """

    phi: MinkowskiNorm
    psi: MinkowskiNorm
    alpha: float
    resolution: DualResolution = field(default_factory=DualResolution)

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_positive(self.alpha, "alpha"))
        object.__setattr__(self, "phi_dual", dual_norm(self.phi, self.resolution))
        object.__setattr__(self, "psi_dual", dual_norm(self.psi, self.resolution))

    @property
    def m(self):
        return self.phi.dim

    @property
    def k(self):
        return self.psi.dim

    @property
    def dim(self):
        return self.m + self.k

    @property
    def Q(self):
        return float(homogeneous_dimension(self.m, self.k, self.alpha))

    @classmethod
    def from_dict(cls, spec, resolution=None):
        if not isinstance(spec, dict) or not {"phi", "psi", "alpha"} <= spec.keys():
            raise ValueError("gauge description needs 'phi', 'psi' and 'alpha'")
        return cls(norm_from_dict(spec["phi"]), norm_from_dict(spec["psi"]),
                   spec["alpha"], resolution or DualResolution())

    def to_dict(self):
        return {"phi": self.phi.to_dict(), "psi": self.psi.to_dict(), "alpha": self.alpha}

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., : self.m], x[..., self.m:]

    def join(self, z, sigma):
        return np.concatenate([np.asarray(z, float), np.asarray(sigma, float)], axis=-1)

    # raw vectorized evaluations, no validation
    def _combine(self, a, b):
        e = 2.0 * (self.alpha + 1.0)
        return (a**e + 4.0 * (self.alpha + 1.0) ** 2 * b**2) ** (1.0 / e)

    def theta(self, x):
        z, s = self.split(x)
        return self._combine(self.phi.value(z), self.psi.value(s))

    def rho(self, x):
        z, s = self.split(x)
        return self._combine(self.phi_dual.value(z), self.psi_dual.value(s))

    def dilate(self, t, x):
        z, s = self.split(x)
        t = np.asarray(t, dtype=float)[..., None] if np.ndim(t) else float(t)
        return self.join(t * z, t ** (self.alpha + 1.0) * s)

    def rho_gradient(self, x):
        a = self.alpha
        z, s = self.split(x)
        r = self.rho(x)[..., None]
        pz = self.phi_dual.value(z)[..., None]
        gz = pz ** (2 * a) * r ** (-2 * a - 1) * half_square_gradient(self.phi_dual, z)
        gs = 4 * (a + 1) * r ** (-2 * a - 1) * half_square_gradient(self.psi_dual, s)
        return self.join(gz, gs)

    def distortion(self, x, power):
        """``(phi0(z) / rho)^power``, invariant under the dilations."""
        z, _ = self.split(x)
        return (self.phi_dual.value(z) / self.rho(x)) ** power


def theta(g, x):
    """Evaluate the anisotropic gauge; zero only at the origin."""
    arr, single = check_points(x, g.dim)
    return unwrap(g.theta(arr), single)


def theta0(g, x):
    """Closed-form anisotropic Legendre transform ``rho`` (the dual gauge)."""
    arr, single = check_points(x, g.dim)
    return unwrap(g.rho(arr), single)


def dilate(g, t, x):
    """Apply ``(z, sigma) -> (t z, t^(alpha+1) sigma)``."""
    check_positive(t, "t")
    arr, single = check_points(x, g.dim)
    return unwrap(g.dilate(t, arr), single)


def _check_nonzero(arr):
    if np.any(np.linalg.norm(arr, axis=1) < ORIGIN_RADIUS):
        raise DomainError("the dual gauge is not differentiable at the origin")


def rho_gradient(g, x):
    """Analytic gradient of ``rho``.

    On ``{z = 0}`` or ``{sigma = 0}`` the components of the vanished block
    are defined by continuous extension (their prefactors vanish there).
    """
    arr, single = check_points(x, g.dim)
    _check_nonzero(arr)
    return unwrap(g.rho_gradient(arr), single)


def eikonal_residual(g, x):
    """``phi(grad_z rho)^2 + phi0(z)^(2a)/4 psi(grad_s rho)^2 - (phi0(z)/rho)^(2a)``."""
    arr, single = check_points(x, g.dim)
    _check_nonzero(arr)
    a = g.alpha
    gz, gs = g.split(g.rho_gradient(arr))
    z, _ = g.split(arr)
    pz = g.phi_dual.value(z)
    lhs = g.phi.value(gz) ** 2 + pz ** (2 * a) / 4 * g.psi.value(gs) ** 2
    return unwrap(lhs - g.distortion(arr, 2 * a), single)


# -- variational route --------------------------------------------------------

@dataclass(frozen=True)
class Theta0Settings:
    """Multi-start ascent settings for :func:`theta0_variational` (per layer)."""

    starts: int = 16
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 0

    def __post_init__(self):
        check_int(self.starts, "starts", minimum=1)
        check_int(self.max_iter, "max_iter", minimum=1)
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def theta0_variational(g, x, settings=None, return_argmax=False):
    """Solve the constrained problem defining the anisotropic Legendre transform.

    Maximizes ``J = |<z, xi>|^(a+1) + 4 (a+1)^2 <sigma, tau>`` over the unit
    gauge sphere ``theta(xi, tau) = 1`` and returns ``J^(1/(a+1))``.

    The maximization alternates between the two layers. Writing
    ``phi(xi)^(2a+2) = t`` and ``2 (a+1) psi(tau) = sqrt(1 - t)``, for fixed
    ``t`` the problem splits into one linear maximization on each unit
    sphere, solved by projected gradient ascent on the primal norms only;
    then ``sqrt(t) A + sqrt(1 - t) B`` is maximized over ``t`` exactly. One
    sweep is a fixed point because the layer problems do not depend on
    ``t``. No closed-form dual norm is used, so the result independently
    certifies :func:`theta0`.

    Parameters
    ----------
    return_argmax : bool
        Also return the maximizing ``(xi, tau)`` stacked as one vector per
        point.
    """
    cfg = settings or Theta0Settings()
    arr, single = check_points(x, g.dim)
    _check_nonzero(arr)
    a1 = g.alpha + 1.0
    z, s = g.split(arr)
    res = DualResolution("variational", cfg.starts, cfg.tol, cfg.max_iter, cfg.seed)
    try:
        hz, xi_hat = VariationalDualNorm(g.phi, res).solve(z)
        hs, tau_hat = VariationalDualNorm(g.psi, res).solve(s)
    except ConvergenceError as exc:
        raise ConvergenceError(f"anisotropic Legendre ascent failed: {exc}",
                               best_value=exc.best_value, best_point=exc.best_point) from exc
    A = hz**a1
    B = 2 * a1 * hs
    t = A**2 / (A**2 + B**2)
    xi = t[:, None] ** (1 / (2 * a1)) * xi_hat
    tau = np.sqrt(1 - t)[:, None] / (2 * a1) * tau_hat
    J = (np.abs(np.einsum("ij,ij->i", z, xi)) ** a1
         + 4 * a1**2 * np.einsum("ij,ij->i", s, tau))
    value = np.maximum(J, 0.0) ** (1 / a1)
    if return_argmax:
        return unwrap(value, single), unwrap(g.join(xi, tau), single)
    return unwrap(value, single)


def random_search_theta0(g, x, samples=1_000_000, seed=0, chunk=200_000):
    """Brute-force lower bound for the anisotropic Legendre transform.

    Samples random directions, pushes them onto the unit gauge sphere with
    the dilations and keeps the best objective value. Serves as an oracle
    that shares no code with the ascent solver.
    """
    x = np.asarray(x, dtype=float)
    z, s = g.split(x)
    a = g.alpha
    rng = np.random.default_rng(seed)
    best = -np.inf
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        v = rng.standard_normal((m, g.dim))
        # random radial profile so both layers get explored at every split
        v[:, g.m:] *= rng.uniform(0.0, 3.0, (m, 1))
        v = g.dilate(1.0 / g.theta(v), v)
        xi, tau = g.split(v)
        val = np.abs(xi @ z) ** (a + 1) + 4 * (a + 1) ** 2 * (tau @ s)
        best = max(best, float(val.max()))
        done += m
    return max(best, 0.0) ** (1.0 / (a + 1))
