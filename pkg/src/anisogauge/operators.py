"""The quasilinear operators ``L_{a,p} u = div(E^((p-2)/2) A(grad u))``.

Here ``E = phi(grad_z u)^2 + phi0(z)^(2a)/4 psi(grad_s u)^2`` is the energy
density and ``A`` stacks ``phi grad phi`` of the z-gradient over
``phi0(z)^(2a)/4 psi grad psi`` of the sigma-gradient. The operator is
evaluated in divergence form by central differences of the flux.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _fd
from ._fields import ScalarField, as_field
from ._parallel import pmap
from ._validation import ORIGIN_RADIUS, check_int, check_points, check_positive, unwrap
from .exceptions import DegeneratePointError, DomainError
from .minkowski import half_square_gradient

__all__ = [
    "OperatorParams", "ScalarField", "RadialProfile", "profile", "candidate_profile",
    "radial_field", "energy_density", "flux", "apply_Lp", "radial_rhs",
    "sample_smooth_points", "RadialReport", "radial_consistency_report",
]

DEFAULT_H = 1e-4
LOG_BRANCH_TOL = 1e-9


@dataclass(frozen=True)
class OperatorParams:
    """The pair ``(alpha, p)``; ``alpha > 0`` and ``1 < p < inf``."""

    alpha: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_positive(self.alpha, "alpha"))
        p = check_positive(self.p, "p")
        if not p > 1:
            raise ValueError(f"p must exceed 1, got {p!r}")
        object.__setattr__(self, "p", p)

    def check_gauge(self, g):
        if not math.isclose(self.alpha, g.alpha, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"operator alpha={self.alpha} does not match gauge alpha={g.alpha}")


# -- radial profiles -----------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """A C^2 profile ``F`` on ``(0, inf)`` with its first two derivatives."""

    F: Callable
    dF: Callable
    d2F: Callable
    name: str = ""
    branch: Optional[str] = None

    def scaled(self, t):
        """The profile ``s -> F(t s)``."""
        return RadialProfile(lambda s: self.F(t * s), lambda s: t * self.dF(t * s),
                             lambda s: t * t * self.d2F(t * s), f"{self.name}(t*)")

    def combine(self, a, other, b):
        """The profile ``a F + b G``."""
        return RadialProfile(lambda s: a * self.F(s) + b * other.F(s),
                             lambda s: a * self.dF(s) + b * other.dF(s),
                             lambda s: a * self.d2F(s) + b * other.d2F(s),
                             f"{a}*{self.name}+{b}*{other.name}")


def _power(gamma):
    return RadialProfile(lambda s: s**gamma, lambda s: gamma * s ** (gamma - 1),
                         lambda s: gamma * (gamma - 1) * s ** (gamma - 2), f"power:{gamma:g}")


_LOG = RadialProfile(np.log, lambda s: 1.0 / s, lambda s: -1.0 / s**2, "log")


def profile(name):
    """Look up a profile: ``identity``, ``square``, ``cube``, ``log`` or ``power:<gamma>``."""
    fixed = {"identity": 1.0, "square": 2.0, "cube": 3.0}
    if name in fixed:
        return _power(fixed[name])
    if name == "log":
        return _LOG
    if isinstance(name, str) and name.startswith("power:"):
        try:
            gamma = float(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad exponent in profile name {name!r}") from None
        return _power(gamma)
    raise ValueError(f"unknown profile {name!r}; use identity, square, cube, log or power:<gamma>")


def candidate_profile(Q, p):
    """``t^(-(Q-p)/(p-1))``, or ``log t`` when ``p = Q``."""
    if abs(p - Q) < LOG_BRANCH_TOL:
        return RadialProfile(_LOG.F, _LOG.dF, _LOG.d2F, "log", branch="log")
    prof = _power(-(Q - p) / (p - 1))
    return RadialProfile(prof.F, prof.dF, prof.d2F, prof.name, branch="power")


def radial_field(g, prof):
    """``F(rho)`` with analytic gradient ``F'(rho) grad rho``."""
    return ScalarField(
        value=lambda x: prof.F(g.rho(x)),
        gradient=lambda x: prof.dF(g.rho(x))[:, None] * g.rho_gradient(x),
        singular=lambda x: g.rho(x) < ORIGIN_RADIUS,
        name=f"{prof.name}(rho)")


# -- energy, flux, operator ----------------------------------------------------

def _energy(g, x, grad):
    gz, gs = g.split(grad)
    z, _ = g.split(x)
    w = g.phi_dual.value(z) ** (2 * g.alpha) / 4
    return g.phi.value(gz) ** 2 + w * g.psi.value(gs) ** 2


def _flux(g, p, x, grad):
    gz, gs = g.split(grad)
    z, _ = g.split(x)
    w = g.phi_dual.value(z) ** (2 * g.alpha) / 4
    e = g.phi.value(gz) ** 2 + w * g.psi.value(gs) ** 2
    zero = e == 0
    if p < 2 and np.any(zero):
        raise DegeneratePointError("energy density vanishes and p < 2: the flux is singular")
    pref = np.where(zero, 0.0, np.where(zero, 1.0, e) ** ((p - 2) / 2))
    vec = g.join(half_square_gradient(g.phi, gz), w[:, None] * half_square_gradient(g.psi, gs))
    return pref[:, None] * vec


def energy_density(g, u, x):
    """``phi(grad_z u)^2 + phi0(z)^(2a)/4 psi(grad_s u)^2``."""
    u = as_field(u)
    arr, single = check_points(x, g.dim)
    u.check_smooth(arr)
    return unwrap(_energy(g, arr, u.grad(arr)), single)


def flux(g, params, u, x):
    """The vector field ``E^((p-2)/2) A(grad u)`` whose divergence is ``L u``."""
    params.check_gauge(g)
    u = as_field(u)
    arr, single = check_points(x, g.dim)
    u.check_smooth(arr)
    return unwrap(_flux(g, params.p, arr, u.grad(arr)), single)


def _check_off_axis(g, arr):
    z, _ = g.split(arr)
    if np.any(np.linalg.norm(z, axis=1) < ORIGIN_RADIUS):
        raise DomainError("the operator is only evaluated off the degenerate set {z = 0}")


def apply_Lp(g, params, u, x, h=DEFAULT_H, richardson=True):
    """``L_{a,p} u`` at ``x`` by central differences of the flux.

    Parameters
    ----------
    h : float
        Base step, scaled per coordinate by ``max(1, |x_i|)``.
    richardson : bool
        Combine steps ``h`` and ``h/2`` to cancel the O(h^2) term. Turn it
        off to observe the raw second-order convergence.
    """
    params.check_gauge(g)
    u = as_field(u)
    arr, single = check_points(x, g.dim)
    _check_off_axis(g, arr)
    u.check_smooth(arr)

    def field(pts):
        return _flux(g, params.p, pts, u.grad(pts))

    return unwrap(_fd.divergence(field, arr, float(h), richardson=richardson), single)


def _radial_rhs(g, p, prof, arr):
    r = g.rho(arr)
    d1, d2 = prof.dF(r), prof.d2F(r)
    Q = g.Q
    return ((p - 1) * np.abs(d1) ** (p - 2) * (d2 + (Q - 1) / (p - 1) * d1 / r)
            * g.distortion(arr, g.alpha * p))


def radial_rhs(g, params, prof, x):
    """Closed-form action on ``F(rho)``:
    ``(p-1)|F'|^(p-2) [F'' + (Q-1)/(p-1) F'/rho] (phi0(z)/rho)^(a p)``."""
    params.check_gauge(g)
    arr, single = check_points(x, g.dim)
    _check_off_axis(g, arr)
    return unwrap(_radial_rhs(g, params.p, prof, arr), single)


# -- reports --------------------------------------------------------------------

def sample_smooth_points(g, n, seed=0, rho_range=(0.5, 2.0), tube=1e-2):
    """Random points with ``rho`` uniform in ``rho_range``, every coordinate
    at least ``tube`` away from zero.

    Keeping all coordinates (not only the blocks) off zero also avoids the
    coordinate hyperplanes where power norms lose smoothness of higher order.
    """
    check_int(n, "n", minimum=1)
    rng = np.random.default_rng(seed)
    out = np.empty((0, g.dim))
    while out.shape[0] < n:
        v = rng.standard_normal((4 * n, g.dim))
        r = rng.uniform(*rho_range, size=4 * n)
        v = g.dilate(r / g.rho(v), v)
        v = v[np.all(np.abs(v) >= tube, axis=1)]
        out = np.vstack([out, v])
    return out[:n]


@dataclass
class RadialReport:
    """Agreement between the difference operator and the closed-form action."""

    max_deviation: float          # max |L u - rhs| / (1 + |rhs|)
    points: int
    h: float
    seed: int
    linearity_residual: Optional[float] = None   # p = 2 only

    def as_dict(self):
        return dict(self.__dict__)


def radial_consistency_report(g, params, prof, samples=20, seed=0, h=DEFAULT_H,
                              richardson=True, linearity=True):
    """Compare :func:`apply_Lp` on ``F(rho)`` with :func:`radial_rhs`.

    For ``p = 2`` the report also measures the linearity of the action:
    ``L((2 t^2 - log t)(rho))`` against ``2 L(rho^2) - L(log rho)``.
    """
    params.check_gauge(g)
    x = sample_smooth_points(g, samples, seed)
    chunks = np.array_split(x, min(samples, 8))

    def run(pts):
        lhs = apply_Lp(g, params, radial_field(g, prof), pts, h, richardson)
        rhs = _radial_rhs(g, params.p, prof, pts)
        return np.abs(lhs - rhs) / (1 + np.abs(rhs))

    dev = float(np.max(np.concatenate(pmap(run, chunks))))
    lin = None
    if linearity and params.p == 2:
        f1, f2 = profile("square"), profile("log")
        both = f1.combine(2.0, f2, -1.0)

        def op(pr):
            return apply_Lp(g, params, radial_field(g, pr), x, h, richardson)

        mixed = op(both)
        lin = float(np.max(np.abs(mixed - (2 * op(f1) - op(f2))) / (1 + np.abs(mixed))))
    return RadialReport(dev, samples, float(h), seed, lin)
