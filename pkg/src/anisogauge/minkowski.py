"""Minkowski norms on R^n, their dual norms and the classical identity suite.

All norm methods are vectorized over leading axes: ``value`` maps ``(..., n)``
to ``(...)`` and ``gradient`` maps ``(..., n)`` to ``(..., n)``. The module
level functions (``norm_value``, ``dual_value``, ...) validate their inputs and
accept either one vector or a batch of row vectors.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _fd
from ._fields import ScalarField, as_field
from ._optim import ascend
from ._validation import ORIGIN_RADIUS, check_away_from_origin, check_int, check_points, unwrap
from .exceptions import ConvergenceError, DegeneratePointError, DomainError

__all__ = [
    "MinkowskiNorm", "EuclideanNorm", "PowerNorm", "QuadraticNorm", "CustomNorm",
    "VariationalDualNorm", "DualResolution", "DualityReport",
    "norm_from_dict", "dual_norm", "half_square_gradient",
    "norm_value", "norm_gradient", "dual_value", "dual_gradient",
    "equivalence_constants", "verify_duality_suite", "finsler_laplacian",
]


class MinkowskiNorm:
    """Base class. Subclasses are immutable and must be even."""

    family = "abstract"
    dim: int

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError(f"{self.family} norm has no analytic Hessian")

    def closed_dual(self):
        """The dual norm in closed form, or ``None`` when unavailable."""
        return None

    def to_dict(self):
        raise TypeError(f"{self.family} norms are not JSON-serializable")

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class EuclideanNorm(MinkowskiNorm):
    dim: int
    family = "euclidean"

    def __post_init__(self):
        check_int(self.dim, "dim", minimum=1)

    def value(self, x):
        return np.linalg.norm(x, axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)[..., None, None]
        u = x[..., :, None] * x[..., None, :] / r**2
        return (np.eye(self.dim) - u) / r

    def closed_dual(self):
        return self

    def to_dict(self):
        return {"family": "euclidean", "dim": self.dim}


@dataclass(frozen=True)
class PowerNorm(MinkowskiNorm):
    """The l^q norm ``(sum |x_i|^q)^(1/q)`` for finite ``q > 1``."""

    dim: int
    q: float
    family = "power"

    def __post_init__(self):
        check_int(self.dim, "dim", minimum=1)
        q = self.q
        if isinstance(q, bool) or not isinstance(q, (int, float)) or not math.isfinite(q) or q <= 1:
            raise ValueError("q must exceed 1 and be finite")
        object.__setattr__(self, "q", float(q))

    def value(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        m = a.max(axis=-1)
        safe = np.where(m > 0, m, 1.0)
        s = np.sum((a / safe[..., None]) ** self.q, axis=-1)
        return np.where(m > 0, safe * s ** (1.0 / self.q), 0.0)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        n = self.value(x)[..., None]
        return np.sign(x) * (np.abs(x) / n) ** (self.q - 1.0)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = self.value(x)[..., None, None]
        g = self.gradient(x)
        with np.errstate(divide="ignore"):
            d = (np.abs(x) / n[..., 0]) ** (self.q - 2.0)
        diag = d[..., :, None] * np.eye(self.dim)
        return (self.q - 1.0) / n * (diag - g[..., :, None] * g[..., None, :])

    def closed_dual(self):
        return PowerNorm(self.dim, self.q / (self.q - 1.0))

    def to_dict(self):
        return {"family": "power", "q": self.q, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class QuadraticNorm(MinkowskiNorm):
    """``sqrt(<A x, x>)`` for a symmetric positive-definite matrix ``A``."""

    matrix: np.ndarray
    family = "quadratic"

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("matrix must be square")
        if not np.allclose(a, a.T, rtol=1e-12, atol=1e-14):
            raise ValueError("matrix must be symmetric")
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise ValueError("matrix must be positive definite") from None
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        q = np.einsum("...i,ij,...j->...", x, self.matrix, x)
        return np.sqrt(np.maximum(q, 0.0))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return (x @ self.matrix) / self.value(x)[..., None]

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = self.value(x)[..., None, None]
        ax = x @ self.matrix
        return (self.matrix - ax[..., :, None] * ax[..., None, :] / n**2) / n

    def closed_dual(self):
        return QuadraticNorm(np.linalg.inv(self.matrix))

    def to_dict(self):
        return {"family": "quadratic", "matrix": self.matrix.tolist()}

    def __eq__(self, other):
        return isinstance(other, QuadraticNorm) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True, eq=False)
class CustomNorm(MinkowskiNorm):
    """A caller-supplied norm.

    ``value_fn`` and ``gradient_fn`` must be vectorized over leading axes.
    ``dual`` optionally supplies the dual norm (itself a MinkowskiNorm).
    """

    dim: int
    value_fn: Callable
    gradient_fn: Callable
    dual: Optional[MinkowskiNorm] = None
    family = "custom"

    def __post_init__(self):
        check_int(self.dim, "dim", minimum=1)
        x = np.random.default_rng(0).standard_normal((16, self.dim))
        v, w = self.value_fn(x), self.value_fn(-x)
        if np.any(v <= 0):
            raise ValueError("custom norm must be positive away from the origin")
        if not np.allclose(v, w, rtol=1e-10):
            raise ValueError("custom norm must be even: N(-x) = N(x)")

    def value(self, x):
        return np.asarray(self.value_fn(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        return np.asarray(self.gradient_fn(np.asarray(x, dtype=float)), dtype=float)

    def closed_dual(self):
        return self.dual


def norm_from_dict(spec):
    """Build a norm from its JSON description."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError("norm description must be an object with a 'family' key")
    fam = spec["family"]
    if fam == "euclidean":
        return EuclideanNorm(spec["dim"])
    if fam == "power":
        return PowerNorm(spec["dim"], spec["q"])
    if fam == "quadratic":
        return QuadraticNorm(spec["matrix"])
    raise ValueError(f"unknown norm family {fam!r}")


def half_square_gradient(norm, v):
    """``N(v) grad N(v)``, i.e. the gradient of ``N^2/2``, extended by 0 at 0."""
    v = np.asarray(v, dtype=float)
    zero = np.linalg.norm(v, axis=-1) == 0
    safe = np.where(zero[..., None], 1.0, v)
    out = norm.value(safe)[..., None] * norm.gradient(safe)
    return np.where(zero[..., None], 0.0, out)


# -- dual norms --------------------------------------------------------------

@dataclass(frozen=True)
class DualResolution:
    """How dual norms are obtained.

    ``mode`` is ``"closed-form"``, ``"variational"`` or ``"auto"`` (closed
    form when the family has one). The remaining fields configure the
    multi-start projected gradient ascent used in variational mode.
    """

    mode: str = "auto"
    starts: int = 8
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("auto", "closed-form", "variational"):
            raise ValueError(f"unknown dual resolution mode {self.mode!r}")
        check_int(self.starts, "starts", minimum=1)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        check_int(self.max_iter, "max_iter", minimum=1)


def _start_directions(x, starts, rng):
    """Sign-flip orbit of each row followed by random directions."""
    rows, n = x.shape
    dirs = [x]
    for i in range(min(n, starts - 1)):
        flipped = x.copy()
        flipped[:, i] = -flipped[:, i]
        dirs.append(flipped)
    while len(dirs) < starts:
        dirs.append(rng.standard_normal((rows, n)))
    return np.stack(dirs[:starts], axis=1)  # (rows, starts, n)


@dataclass(frozen=True, eq=False)
class VariationalDualNorm(MinkowskiNorm):
    """``N0(x) = sup_{N(xi)=1} <x, xi>`` computed numerically.

    The maximizer is also the gradient of the dual norm at ``x``.
    """

    primal: MinkowskiNorm
    resolution: DualResolution = field(default_factory=lambda: DualResolution(mode="variational"))
    family = "variational-dual"

    @property
    def dim(self):
        return self.primal.dim

    def closed_dual(self):
        return self.primal

    def solve(self, x):
        """Return ``(values, maximizers)`` for a batch ``x`` of shape (r, n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rows, n = x.shape
        res = self.resolution
        values = np.zeros(rows)
        argmax = np.zeros((rows, n))
        nz = np.linalg.norm(x, axis=1) > 0
        if not np.any(nz):
            return values, argmax
        xs = x[nz]
        rng = np.random.default_rng(res.seed)
        seeds = _start_directions(xs, res.starts, rng)
        target = np.repeat(xs, res.starts, axis=0)
        primal = self.primal

        def objective(xi, rows):
            t = target[rows]
            return np.einsum("ij,ij->i", t, xi), t, primal.gradient(xi)

        def retract(xi):
            return xi / primal.value(xi)[:, None]

        out = ascend(objective, retract, seeds.reshape(-1, n), tol=res.tol, max_iter=res.max_iter)
        val = out.value.reshape(-1, res.starts)
        conv = out.converged.reshape(-1, res.starts)
        r = np.arange(val.shape[0])
        # local maxima are global here, so any converged start will do; the
        # best converged one is preferred over stalled starts that tie to roundoff
        best = np.argmax(np.where(conv, val, -np.inf), axis=1)
        ok = conv.any(axis=1)
        if not np.all(ok):
            bad = np.flatnonzero(~ok)[0]
            j = np.argmax(val[bad])
            raise ConvergenceError(
                f"variational dual did not converge after {res.max_iter} iterations",
                best_value=float(val[bad, j]), best_point=out.x.reshape(-1, res.starts, n)[bad, j])
        best_val = val[r, best]
        best_xi = out.x.reshape(-1, res.starts, n)[r, best]
        values[nz] = best_val
        argmax[nz] = best_xi
        return values, argmax

    def value(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return self.solve(flat)[0].reshape(x.shape[:-1])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return self.solve(flat)[1].reshape(x.shape)


def dual_norm(norm, resolution=None):
    """The dual norm of ``norm`` as a MinkowskiNorm object."""
    res = resolution or DualResolution()
    if res.mode != "variational":
        closed = norm.closed_dual()
        if closed is not None:
            return closed
        if res.mode == "closed-form":
            raise ValueError(f"{norm.family} norm has no closed-form dual")
    return VariationalDualNorm(norm, DualResolution("variational", res.starts, res.tol, res.max_iter, res.seed))


# -- validated point operations ---------------------------------------------

def norm_value(norm, x):
    """Evaluate ``N(x)``; zero exactly at the origin."""
    arr, single = check_points(x, norm.dim)
    return unwrap(norm.value(arr), single)


def norm_gradient(norm, x):
    """Analytic gradient of ``N`` away from the origin."""
    arr, single = check_points(x, norm.dim)
    check_away_from_origin(arr)
    return unwrap(norm.gradient(arr), single)


def dual_value(norm, x, resolution=None):
    """Evaluate the dual norm ``N0(x) = sup_{N(xi)=1} <x, xi>``."""
    arr, single = check_points(x, norm.dim)
    return unwrap(dual_norm(norm, resolution).value(arr), single)


def dual_gradient(norm, x, resolution=None):
    arr, single = check_points(x, norm.dim)
    check_away_from_origin(arr)
    return unwrap(dual_norm(norm, resolution).gradient(arr), single)


def equivalence_constants(norm, n_dirs=10_000, seed=0):
    """Sampled constants ``(lo, hi)`` with ``lo |x| <= N(x) <= hi |x|``.

    These are estimates from ``n_dirs`` random unit directions, so ``lo`` may
    slightly overestimate and ``hi`` slightly underestimate the true bounds.
    """
    u = np.random.default_rng(seed).standard_normal((n_dirs, norm.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = norm.value(u)
    return float(v.min()), float(v.max())


# -- identity suite -----------------------------------------------------------

@dataclass
class DualityReport:
    """Maximum residuals of the classical norm/dual-norm identities.

    All residuals are relative: divided by ``|x|``, ``N(x)`` or
    ``N(x) N0(y)`` as appropriate, so they are scale-free.
    """

    family: str
    samples: int
    seed: int
    unit_gradient: float      # |N(grad N0(x)) - 1| and |N0(grad N(x)) - 1|
    inverse_gradient: float   # |N0(x) grad N(grad N0(x)) - x| and its mirror
    euler: float              # |<grad N(x), x> - N(x)| for N and N0
    cauchy_schwarz: float     # positive part of |<x,y>| - N(x) N0(y)
    double_dual: Optional[float] = None
    homogeneity: float = 0.0

    def as_dict(self):
        return dict(self.__dict__)


def _rows_away_from_origin(rng, count, dim):
    x = rng.standard_normal((count, dim))
    small = np.linalg.norm(x, axis=1) < 1e-3
    x[small] += 1.0
    return x


def verify_duality_suite(norm, sample_count=100, seed=0, resolution=None, double_dual=True):
    """Check the classical identities on random nonzero samples."""
    check_int(sample_count, "sample_count", minimum=1)
    rng = np.random.default_rng(seed)
    dual = dual_norm(norm, resolution)
    x = _rows_away_from_origin(rng, sample_count, norm.dim)
    y = _rows_away_from_origin(rng, sample_count, norm.dim)
    rx = np.linalg.norm(x, axis=1)

    n_x, d_x = norm.value(x), dual.value(x)
    gn, gd = norm.gradient(x), dual.gradient(x)
    unit = max(np.max(np.abs(norm.value(gd) - 1.0)), np.max(np.abs(dual.value(gn) - 1.0)))

    inv1 = d_x[:, None] * norm.gradient(gd) - x
    inv2 = n_x[:, None] * dual.gradient(gn) - x
    inverse = max(np.max(np.linalg.norm(inv1, axis=1) / rx), np.max(np.linalg.norm(inv2, axis=1) / rx))

    euler = max(np.max(np.abs(np.einsum("ij,ij->i", gn, x) - n_x) / n_x),
                np.max(np.abs(np.einsum("ij,ij->i", gd, x) - d_x) / d_x))

    # random pairs plus the equality case x = grad N0(y)
    bound = norm.value(x) * dual.value(y)
    cs = np.max((np.abs(np.einsum("ij,ij->i", x, y)) - bound) / bound)
    tight_x = dual.gradient(y)
    bound_t = norm.value(tight_x) * dual.value(y)
    cs = max(cs, np.max((np.abs(np.einsum("ij,ij->i", tight_x, y)) - bound_t) / bound_t))

    lam = rng.uniform(0.1, 10.0, sample_count) * rng.choice([-1.0, 1.0], sample_count)
    homog = np.max(np.abs(norm.value(lam[:, None] * x) - np.abs(lam) * n_x) / (np.abs(lam) * n_x))

    dd = None
    if double_dual:
        base = resolution or DualResolution()
        vres = DualResolution("variational", base.starts, min(base.tol, 1e-8), base.max_iter, base.seed)
        dd_norm = VariationalDualNorm(dual, vres)
        dd = float(np.max(np.abs(dd_norm.value(x) - n_x) / n_x))

    return DualityReport(
        family=norm.family, samples=sample_count, seed=seed,
        unit_gradient=float(unit), inverse_gradient=float(inverse), euler=float(euler),
        cauchy_schwarz=float(max(cs, 0.0)), double_dual=dd, homogeneity=float(homog))


# -- Finsler Laplacian --------------------------------------------------------

def finsler_laplacian(norm, u, x, h=None, richardson=True):
    """``div(N(grad u) grad N(grad u))`` by central differences of the flux.

    Inner gradients of ``u`` are analytic when the field provides them.
    ``h`` is the base step, scaled per coordinate by ``max(1, |x_i|)``;
    the default is the cube root of machine epsilon.
    """
    u = as_field(u)
    arr, single = check_points(x, norm.dim)
    u.check_smooth(arr)
    g = u.grad(arr)
    if np.any(np.linalg.norm(g, axis=1) < ORIGIN_RADIUS):
        raise DegeneratePointError("grad u vanishes; the Finsler flux is not differentiable there")

    def flux(pts):
        return half_square_gradient(norm, u.grad(pts))

    base = _fd.EPS_CBRT if h is None else float(h)
    return unwrap(_fd.divergence(flux, arr, base, richardson=richardson), single)


def dual_square_field(norm, resolution=None):
    """The field ``N0(x)^2 / 2`` with its analytic gradient ``N0 grad N0``."""
    dual = dual_norm(norm, resolution)
    return ScalarField(value=lambda x: 0.5 * dual.value(x) ** 2,
                       gradient=lambda x: half_square_gradient(dual, x),
                       name="N0^2/2")


def dual_radial_field(norm, k, dk, resolution=None, name="k(N0)"):
    """The field ``k(N0(x))`` with gradient ``k'(N0) grad N0``."""
    dual = dual_norm(norm, resolution)

    def grad(x):
        r = dual.value(x)
        if np.any(r < ORIGIN_RADIUS):
            raise DomainError("k(N0) is not differentiable at the origin")
        return dk(r)[:, None] * dual.gradient(x)

    return ScalarField(value=lambda x: k(dual.value(x)), gradient=grad, name=name)
