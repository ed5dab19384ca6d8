"""Integration over gauge balls, gauge shells and excised boxes.

Two families of methods are offered:

* sampling (``monte-carlo``, ``quasi-monte-carlo``): uniform points in an
  exact bounding box of the gauge ball, kept or dropped by membership;
* layer-polar cubature (``tensor-gauss``, ``adaptive``): every point is
  written as ``delta_t(w)`` with ``w`` on the unit dual-gauge sphere, so that
  ``dx = t^(Q-1) dt dmu(w)``. The sphere measure ``mu`` is discretized by
  product rules in polar coordinates of each layer.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc

from ._parallel import pmap
from ._validation import check_int
from .exceptions import BudgetWarning

__all__ = [
    "QuadratureConfig", "GaugeBall", "GaugeShell", "BoxMinusBall", "Estimate",
    "bounding_box", "inner_box", "acceptance_lower_bound", "layer_polar_rule", "sphere_rule",
    "integrate", "excision_sequence", "shell_surface_estimate", "richardson_weights",
    "richardson_extrapolate",
]

METHODS = ("tensor-gauss", "adaptive", "monte-carlo", "quasi-monte-carlo")
_CHUNK = 1_000_000
_MAX_TENSOR_DIM = 4
_FLOOR = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureConfig:
    """How to integrate, and how hard to try.

    Parameters
    ----------
    method : {"tensor-gauss", "adaptive", "monte-carlo", "quasi-monte-carlo"}
    budget : int
        Maximum number of integrand evaluations (at least 1000).
    target_rel_error : float
        In ``(0, 0.1]``. Only the adaptive method stops early on it; the
        others report whether they met it.
    seed : int
        Root of all random streams.
    strata : int
        Number of independent random streams the sample budget is split
        across (each gets a child of ``SeedSequence(seed)``).
    """

    method: str = "monte-carlo"
    budget: int = 10_000_000
    target_rel_error: float = 1e-3
    seed: int = 0
    strata: int = 8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown quadrature method {self.method!r}; choose from {METHODS}")
        check_int(self.budget, "budget", minimum=1000)
        check_int(self.seed, "seed", minimum=0)
        check_int(self.strata, "strata", minimum=1)
        if not 0 < self.target_rel_error <= 0.1:
            raise ValueError("target_rel_error must lie in (0, 0.1]")

    @property
    def sampling(self):
        return self.method in ("monte-carlo", "quasi-monte-carlo")


@dataclass(frozen=True)
class GaugeBall:
    r: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class GaugeShell:
    r1: float
    r2: float

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("shell radii must satisfy 0 < r1 < r2")


@dataclass(frozen=True)
class BoxMinusBall:
    """The box ``[lo, hi]`` with the gauge ball ``{rho < eps}`` removed.

    The cubature route integrates over gauge shells and masks by the box, so
    it is accurate only for integrands that vanish continuously on the box
    boundary (true for the compactly supported test functions used here).
    """

    lo: tuple
    hi: tuple
    eps: float

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(lo >= hi):
            raise ValueError("box corners must be vectors with lo < hi")
        if not self.eps > 0:
            raise ValueError("excision radius must be positive")
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))


@dataclass
class Estimate:
    """A value with an error estimate and provenance."""

    value: float
    error: float
    method: str
    evaluations: int
    seed: int
    converged: bool
    details: dict = field(default_factory=dict)

    @property
    def rel_error(self):
        return self.error / abs(self.value) if self.value else math.inf

    def as_dict(self):
        return {"value": self.value, "error": self.error, "method": self.method,
                "evaluations": self.evaluations, "seed": self.seed,
                "converged": self.converged}


# -- boxes ---------------------------------------------------------------------

def _basis(n):
    return np.eye(n)


def bounding_box(g, r):
    """Half-widths of the smallest coordinate box containing ``{rho < r}``.

    The widths are the support functions of the dual unit balls, i.e. the
    primal norms of the basis vectors: ``|z_i| <= phi0(z) phi(e_i)``.
    """
    a1 = g.alpha + 1.0
    hz = r * g.phi.value(_basis(g.m))
    hs = r**a1 * g.psi.value(_basis(g.k)) / (2.0 * a1)
    return np.concatenate([hz, hs])


def inner_box(g, r):
    """Half-widths of a box guaranteed to lie inside ``{rho < r}``."""
    a1 = g.alpha + 1.0
    cz = r * 2.0 ** (-1.0 / (2 * a1)) / g.phi_dual.value(_basis(g.m)).sum()
    cs = r**a1 / (math.sqrt(2.0) * 2 * a1 * g.psi_dual.value(_basis(g.k)).sum())
    return np.concatenate([np.full(g.m, cz), np.full(g.k, cs)])


def acceptance_lower_bound(g, r=1.0):
    """Volume ratio of the inner box to the bounding box; a floor for the
    rejection-sampling acceptance rate."""
    return float(np.prod(inner_box(g, r) / bounding_box(g, r)))


def rho_upper_bound(g, lo, hi):
    """An upper bound for ``rho`` on the box ``[lo, hi]`` (triangle inequality)."""
    corner = np.maximum(np.abs(lo), np.abs(hi))
    cz, cs = g.split(corner)
    pz = float(cz @ g.phi_dual.value(_basis(g.m)))
    ps = float(cs @ g.psi_dual.value(_basis(g.k)))
    return float(g._combine(pz, ps))


# -- sampling -----------------------------------------------------------------

def _streams(cfg, n_total):
    """Split ``n_total`` samples into deterministic, independently seeded chunks.

    Quasi-Monte Carlo chunks are independently scrambled Sobol' replicates
    whose size is a power of two, so they may use slightly fewer points.
    """
    if cfg.method == "quasi-monte-carlo":
        n_chunks = max(cfg.strata, 2)
        sizes = [2 ** int(math.log2(max(n_total // n_chunks, 2)))] * n_chunks
    else:
        n_chunks = max(cfg.strata, math.ceil(n_total / _CHUNK))
        sizes = [n_total // n_chunks + (i < n_total % n_chunks) for i in range(n_chunks)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    return [(s, n) for s, n in zip(seeds, sizes) if n > 0]


def _box_samples(stream, lo, hi, qmc_mode):
    ss, n = stream
    d = lo.size
    if qmc_mode:
        u = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(ss)).random_base2(int(math.log2(n)))
    else:
        u = np.random.default_rng(ss).random((n, d))
    return lo + (hi - lo) * u


def _sample_moments(f_masked, lo, hi, cfg, n_total):
    """Sum and sum of squares of ``vol * f_masked`` over all streams.

    ``f_masked`` maps sample points to an ``(n, j)`` array; several integrals
    share the same random numbers.
    """
    vol = float(np.prod(hi - lo))
    qmc_mode = cfg.method == "quasi-monte-carlo"

    def run(stream):
        x = _box_samples(stream, lo, hi, qmc_mode)
        y = vol * f_masked(x)
        return y.sum(axis=0), (y * y).sum(axis=0), y.shape[0], np.asarray(y.mean(axis=0))

    parts = pmap(run, _streams(cfg, n_total))
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    means = np.array([p[3] for p in parts])
    return s1, s2, n, means


def _sampling_estimate(f_masked, lo, hi, cfg, extra=None):
    """Monte Carlo or randomized QMC estimate of one or more integrals."""
    s1, s2, n, means = _sample_moments(f_masked, lo, hi, cfg, cfg.budget)
    mean = s1 / n
    if cfg.method == "quasi-monte-carlo":
        # error from the spread of independently scrambled replicates
        r = means.shape[0]
        err = means.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.abs(mean)
    else:
        var = np.maximum(s2 / n - mean**2, 0.0)
        err = np.sqrt(var / (n - 1))
    return mean, np.maximum(err, _FLOOR * np.abs(mean)), n


# -- layer-polar cubature -----------------------------------------------------

def _circle(n):
    """Trapezoid rule in ``u`` after ``theta = u - sin(4u)/4``.

    The substitution flattens the angle near the coordinate axes, where power
    norms and their duals lose smoothness; this restores fast convergence
    for them and stays spectral for smooth integrands.
    """
    u = 2 * np.pi * np.arange(n) / n
    ang = u - np.sin(4 * u) / 4
    return np.column_stack([np.cos(ang), np.sin(ang)]), (1 - np.cos(4 * u)) * 2 * np.pi / n


def sphere_rule(n, level):
    """Points and weights on the Euclidean unit sphere of ``R^n`` (``n <= 3``).

    The weights sum to the sphere's surface measure (2 for ``n = 1``).
    """
    base = 16 * 2**level
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        return _circle(base)
    if n == 3:
        c, wc = leggauss(base // 2)
        pts, wa = _circle(base)
        s = np.sqrt(1 - c**2)
        p = np.concatenate([np.outer(s, pts[:, 0])[..., None], np.outer(s, pts[:, 1])[..., None],
                            np.broadcast_to(c[:, None, None], (c.size, pts.shape[0], 1))], axis=2)
        return p.reshape(-1, 3), np.outer(wc, wa).ravel()
    raise ValueError("sphere rules are provided for dimensions 1 to 3 only")


def layer_polar_rule(g, level):
    """Nodes on ``{rho = 1}`` and weights ``mu_i`` with
    ``int f dx = int_0^inf t^(Q-1) sum_i mu_i f(delta_t w_i) dt``.

    Each node is ``(s theta / phi0(theta), u eta / psi0(eta))`` with
    ``s = sin(psi)`` and ``u = sqrt(1 - s^(2a+2)) / (2 (a+1))``.
    """
    if g.dim > _MAX_TENSOR_DIM:
        raise ValueError(
            f"cubature is limited to m + k <= {_MAX_TENSOR_DIM}; use a sampling method")
    a1 = g.alpha + 1.0
    th, wth = sphere_rule(g.m, level)
    et, wet = sphere_rule(g.k, level)
    x, wx = leggauss(16 * 2**level)
    psi = (x + 1) * np.pi / 4
    wpsi = wx * np.pi / 4
    s = np.sin(psi)
    # 1 - s^(2a+2) without cancellation near psi = pi/2
    rem = -np.expm1(a1 * np.log1p(-np.cos(psi) ** 2))
    u = np.sqrt(rem) / (2 * a1)
    radial = s ** (g.m - 1) * u ** (g.k - 1) * np.cos(psi) / (2 * np.sqrt(rem)) * wpsi
    a = g.phi_dual.value(th)
    b = g.psi_dual.value(et)
    zt = th / a[:, None]
    st = et / b[:, None]
    wz = wth * a ** (-g.m)
    ws = wet * b ** (-g.k)
    nz, ns, npsi = zt.shape[0], st.shape[0], psi.size
    z = (s[:, None, None, None] * zt[None, :, None, :])
    z = np.broadcast_to(z, (npsi, nz, ns, g.m))
    sg = np.broadcast_to((u[:, None, None, None] * st[None, None, :, :]), (npsi, nz, ns, g.k))
    nodes = np.concatenate([z, sg], axis=3).reshape(-1, g.dim)
    weights = (radial[:, None, None] * wz[None, :, None] * ws[None, None, :]).ravel()
    return nodes, weights


def _radial_rule(breaks, panels, order=8):
    """Composite Gauss nodes on ``[breaks[0], breaks[-1]]`` with every break a
    panel boundary; returns nodes, weights and the interval index of each node."""
    x, w = leggauss(order)
    nodes, weights, where = [], [], []
    for j, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        edges = np.linspace(a, b, panels + 1)
        for lo_, hi_ in zip(edges[:-1], edges[1:]):
            half = (hi_ - lo_) / 2
            nodes.append(lo_ + half * (x + 1))
            weights.append(half * w)
            where.append(np.full(order, j))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(where)


def _polar_sums(f, g, level, breaks, panels, mask=None):
    """Integrals of ``f`` over the gauge shells between consecutive ``breaks``."""
    nodes, mu = layer_polar_rule(g, level)
    t, wt, where = _radial_rule(np.asarray(breaks, float), panels)
    tw = wt * t ** (g.Q - 1.0)
    n_int = len(breaks) - 1
    per = max(1, _CHUNK // nodes.shape[0])

    def run(sl):
        pts = g.dilate(np.repeat(t[sl], nodes.shape[0]), np.tile(nodes, (t[sl].size, 1)))
        val = f(pts)
        if mask is not None:
            val = np.where(mask(pts), val, 0.0)
        val = val.reshape(t[sl].size, -1) @ mu
        return np.bincount(where[sl], weights=tw[sl] * val, minlength=n_int)

    slices = [slice(i, i + per) for i in range(0, t.size, per)]
    sums = np.sum(pmap(run, slices), axis=0)
    return sums, nodes.shape[0] * t.size


def _polar_refine(f, g, cfg, breaks, mask=None, base_panels=2, scale=None):
    """Layer-polar integrals over shells, refined by doubling the resolution.

    ``tensor-gauss`` runs to the finest level that fits the budget;
    ``adaptive`` also stops as soon as the change between levels meets the
    relative target. The error is the change between the last two levels.
    ``scale`` replaces the computed total as the reference magnitude of the
    relative target (needed when the true value may be zero).
    """
    used, prev, level, history = 0, None, 0, []
    while True:
        vals, n = _polar_sums(f, g, level, breaks, base_panels * 2**level, mask)
        used += n
        history.append(vals)
        if prev is not None:
            err = np.abs(vals - prev)
            ref = np.abs(vals).sum() if scale is None else scale
            met = bool(err.sum() <= cfg.target_rel_error * max(ref, np.finfo(float).tiny))
            nxt = 8 * n
            if (cfg.method == "adaptive" and met) or used + nxt > cfg.budget or level >= 6:
                err = np.maximum(err, _FLOOR * np.abs(vals))
                return vals, err, used, met, level
        elif used + 8 * n > cfg.budget:
            # no room for a second level: report the level alone, unverified
            return vals, np.abs(vals), used, False, level
        prev = vals
        level += 1


# -- public entry points ------------------------------------------------------

def _warn_budget(est, cfg):
    if not est.converged and est.value:
        warnings.warn(
            f"{est.method} estimate reached relative error {est.rel_error:.2e}, "
            f"target {cfg.target_rel_error:.2e}, after {est.evaluations} evaluations",
            BudgetWarning, stacklevel=3)


def integrate(f, region, g, cfg):
    """Integrate ``f`` over a region of ``R^(m+k)``.

    Parameters
    ----------
    f : callable
        Vectorized, ``(n, m + k) -> (n,)``, bounded on the region.
    region : GaugeBall, GaugeShell or BoxMinusBall
    g : ProductGauge
    cfg : QuadratureConfig

    Returns
    -------
    Estimate
        For sampling methods the error is one standard error; for cubature it
        is the change between the last two refinement levels.
    """
    if isinstance(region, BoxMinusBall):
        return excision_sequence(f, g, region.lo, region.hi, [region.eps], cfg)[0]
    if isinstance(region, GaugeBall):
        r1, r2 = 0.0, region.r
    elif isinstance(region, GaugeShell):
        r1, r2 = region.r1, region.r2
    else:
        raise TypeError(f"unsupported region {region!r}")
    if cfg.sampling:
        h = bounding_box(g, r2)

        def masked(x):
            rho = g.rho(x)
            keep = (rho < r2) & (rho >= r1)
            out = np.zeros(x.shape[0])
            if keep.any():
                out[keep] = f(x[keep])
            return out[:, None]

        mean, err, n = _sampling_estimate(masked, -h, h, cfg)
        value, error = float(mean[0]), float(err[0])
        met = error <= cfg.target_rel_error * abs(value)
    else:
        breaks = [r1, r2] if r1 > 0 else [0.0, r2]
        vals, errs, n, met, level = _polar_refine(f, g, cfg, breaks)
        value, error = float(vals[0]), float(errs[0])
    est = Estimate(value, error, cfg.method, n, cfg.seed, bool(met))
    _warn_budget(est, cfg)
    return est


def excision_sequence(f, g, lo, hi, eps_list, cfg, scale=None):
    """Integrals of ``f`` over ``[lo, hi] minus {rho < eps}`` for several ``eps``.

    All integrals share one set of nodes (or random numbers), so their
    differences are far more accurate than the individual errors suggest.
    ``scale``, if given, is the magnitude the relative target refers to.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    eps = np.asarray(eps_list, float)
    if lo.shape != (g.dim,) or hi.shape != (g.dim,):
        raise ValueError("dimension mismatch between box and gauge")
    if np.any(eps <= 0):
        raise ValueError("excision radii must be positive")

    def inside(x):
        return np.all((x >= lo) & (x <= hi), axis=1)

    if cfg.sampling:
        def masked(x):
            rho = g.rho(x)
            keep = rho >= eps.min()
            out = np.zeros((x.shape[0], eps.size))
            if keep.any():
                val = f(x[keep])
                out[keep] = np.where(rho[keep, None] >= eps[None, :], val[:, None], 0.0)
            return out

        mean, err, n = _sampling_estimate(masked, lo, hi, cfg)
        mets = err <= cfg.target_rel_error * (np.abs(mean) if scale is None else scale)
        out = [Estimate(float(v), float(e), cfg.method, n, cfg.seed, bool(mt))
               for v, e, mt in zip(mean, err, mets)]
    else:
        order = np.argsort(eps)
        top = rho_upper_bound(g, lo, hi)
        breaks = np.concatenate([eps[order], [max(top, eps.max() * (1 + 1e-12))]])
        vals, errs, n, met, level = _polar_refine(f, g, cfg, breaks, mask=inside, scale=scale)
        # integral from eps_j outward = tail sum of the shell integrals
        tails = np.cumsum(vals[::-1])[::-1]
        terr = np.cumsum(errs[::-1])[::-1]
        out = [None] * eps.size
        for rank, j in enumerate(order):
            out[j] = Estimate(float(tails[rank]), float(terr[rank]), cfg.method, n, cfg.seed,
                              bool(met), {"level": level})
    for est in out:
        _warn_budget(est, cfg)
    return out


def richardson_weights(h):
    """Weights ``w`` with ``sum w_j P(h_j) = P(0)`` for polynomials of degree
    ``len(h) - 1``; extrapolates a sequence to ``h -> 0``."""
    h = np.asarray(h, float)
    w = np.ones(h.size)
    for j in range(h.size):
        for i in range(h.size):
            if i != j:
                w[j] *= (0.0 - h[i]) / (h[j] - h[i])
    return w


def richardson_extrapolate(h, values):
    return float(richardson_weights(h) @ np.asarray(values, float))


def _monotone(values):
    d = np.diff(values)
    return bool(np.all(d >= 0) or np.all(d <= 0))


def shell_surface_estimate(f, g, cfg, delta_schedule=(0.02, 0.01, 0.005)):
    """Surface functional ``int_{rho=1} f dH / |grad rho|`` from thin shells.

    Computes ``s(d) = (1/d) int_{1<rho<1+d} f`` for each ``d`` in the schedule
    and extrapolates to ``d -> 0`` with a polynomial through all points.
    ``f`` should be invariant under the dilations.

    The returned details contain the individual shell values and a
    ``monotone`` flag; a non-monotone sequence triggers a BudgetWarning since
    it means the shells are not resolved.
    """
    d = np.asarray(delta_schedule, float)
    if d.size < 2 or np.any(d <= 0):
        raise ValueError("delta schedule needs at least two positive widths")
    w = richardson_weights(d)
    if cfg.sampling:
        h = bounding_box(g, 1.0 + d.max())

        def masked(x):
            rho = g.rho(x)
            keep = (rho > 1.0) & (rho < 1.0 + d.max())
            out = np.zeros((x.shape[0], d.size + 1))
            if keep.any():
                val = f(x[keep])
                sh = np.where(rho[keep, None] < 1.0 + d[None, :], val[:, None], 0.0) / d
                # last column: the extrapolated combination, sample by sample
                out[keep] = np.column_stack([sh, sh @ w])
            return out

        mean, err, n = _sampling_estimate(masked, -h, h, cfg)
        shells, value, error = mean[:-1], float(mean[-1]), float(err[-1])
    else:
        breaks = np.concatenate([[1.0], 1.0 + np.sort(d)])
        vals, errs, n, _, _ = _polar_refine(f, g, cfg, breaks)
        cum, cerr = np.cumsum(vals), np.cumsum(errs)
        rank = np.argsort(np.argsort(d))
        shells = cum[rank] / d
        value = float(w @ shells)
        # extrapolation error: compare with the two-point (linear) model
        fine = np.argsort(d)[:2]
        lower = richardson_extrapolate(d[fine], shells[fine])
        error = float(np.sqrt(np.sum((w * cerr[rank] / d) ** 2)) + abs(value - lower))
    mono = _monotone(shells[np.argsort(d)])
    met = error <= cfg.target_rel_error * abs(value)
    est = Estimate(value, max(error, _FLOOR * abs(value)), cfg.method, n, cfg.seed, bool(met),
                   {"deltas": d.tolist(), "shells": list(map(float, shells)), "monotone": mono})
    if not mono:
        warnings.warn("thin-shell sequence is not monotone in the shell width",
                      BudgetWarning, stacklevel=2)
    _warn_budget(est, cfg)
    return est
