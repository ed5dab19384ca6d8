"""The acceptance battery: nine numeric criteria with thresholds and time limits.

Each criterion returns a :class:`CriterionResult` whose ``measured`` value is
compared against ``threshold`` (smaller is better unless ``higher_is_better``).
A criterion also fails when it overruns its time limit.
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import BudgetWarning
from .fundsol import (Bump, FundamentalSolution, default_config, power_exponent,
                      sigma_constant, weak_form_test, weak_test_config)
from .gauge import ProductGauge, eikonal_residual, homogeneous_dimension, theta0, theta0_variational
from .minkowski import (EuclideanNorm, PowerNorm, QuadraticNorm, dual_norm, dual_radial_field,
                        dual_square_field, finsler_laplacian, verify_duality_suite)
from .operators import (OperatorParams, apply_Lp, candidate_profile, profile, radial_field,
                        radial_rhs, sample_smooth_points)
from .quadrature import GaugeBall, QuadratureConfig, integrate

__all__ = ["CriterionResult", "CRITERIA", "GROUPS", "resolve", "run_criteria"]

ELLIPSOID_VOLUME = 4 * math.pi / 3 / 2


@dataclass
class CriterionResult:
    id: int
    name: str
    measured: float
    threshold: float
    passed: bool
    runtime: float
    time_limit: float
    higher_is_better: bool = False
    details: dict = field(default_factory=dict)

    def line(self):
        cmp = ">=" if self.higher_is_better else "<="
        verdict = "PASS" if self.passed else "FAIL"
        return (f"[{verdict}] criterion {self.id} {self.name}: measured {self.measured:.3e} "
                f"{cmp} {self.threshold:.3e}; {self.runtime:.1f}s of {self.time_limit:.0f}s")

    def row(self):
        return {"id": self.id, "name": self.name, "measured": self.measured,
                "threshold": self.threshold, "passed": self.passed,
                "runtime": round(self.runtime, 3), "time_limit": self.time_limit}


def norm_families():
    return {
        "euclidean(2)": EuclideanNorm(2),
        "euclidean(3)": EuclideanNorm(3),
        "power-4(2)": PowerNorm(2, 4.0),
        "power-3(3)": PowerNorm(3, 3.0),
        "quadratic diag(4,1)": QuadraticNorm(np.diag([4.0, 1.0])),
    }


def gauge_families():
    return {
        "euclidean/euclidean a=1": ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0),
        "power-4/euclidean a=0.5": ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5),
        "quadratic/power-4 a=2": ProductGauge(QuadraticNorm(np.diag([4.0, 1.0])), PowerNorm(2, 4.0), 2.0),
    }


def _operator_gauges(alpha):
    return {
        "euclidean/euclidean": ProductGauge(EuclideanNorm(2), EuclideanNorm(1), alpha),
        "power-4/euclidean": ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), alpha),
        "quadratic/power-4": ProductGauge(QuadraticNorm(np.diag([4.0, 1.0])), PowerNorm(1, 4.0), alpha),
    }


def _result(cid, name, measured, threshold, limit, start, higher=False, **details):
    runtime = time.perf_counter() - start
    ok = measured >= threshold if higher else measured <= threshold
    return CriterionResult(cid, name, float(measured), threshold, bool(ok and runtime <= limit),
                           runtime, limit, higher, details)


def criterion_duality(seed=0):
    """Gradient duality, inverse-gradient, Euler and Cauchy-Schwarz residuals."""
    start = time.perf_counter()
    worst = {}
    for name, norm in norm_families().items():
        rep = verify_duality_suite(norm, sample_count=100, seed=seed, double_dual=False)
        worst[name] = max(rep.unit_gradient, rep.inverse_gradient, rep.euler, rep.cauchy_schwarz)
    return _result(1, "norm duality identities", max(worst.values()), 1e-9, 5.0, start, per_family=worst)


CRIT2_H = 1e-3


def criterion_finsler_laplacian(seed=0):
    """``Delta_N(N0^2/2) = n`` and the radial formula for ``t^3`` and ``log t``."""
    start = time.perf_counter()
    h = CRIT2_H
    rng = np.random.default_rng(seed)
    worst = {}
    for name, norm in norm_families().items():
        n = norm.dim
        x = rng.uniform(0.3, 1.5, (20, n)) * rng.choice([-1.0, 1.0], (20, n))
        dual = dual_norm(norm)
        r = dual.value(x)
        errs = [np.abs(finsler_laplacian(norm, dual_square_field(norm), x, h) - n)]
        for k, dk, d2k in [(lambda t: t**3, lambda t: 3 * t**2, lambda t: 6 * t),
                           (np.log, lambda t: 1 / t, lambda t: -1 / t**2)]:
            want = d2k(r) + (n - 1) * dk(r) / r
            got = finsler_laplacian(norm, dual_radial_field(norm, k, dk), x, h)
            errs.append(np.abs(got - want) / (1 + np.abs(want)))
        worst[name] = float(np.max(np.concatenate(errs)))
    return _result(2, "Finsler Laplacian identities", max(worst.values()), 10 * h**2, 10.0, start,
                   per_family=worst, h=h)


def criterion_legendre_certificate(seed=0):
    """Variational versus closed-form anisotropic Legendre transform."""
    start = time.perf_counter()
    worst = {}
    for name, g in gauge_families().items():
        x = np.random.default_rng(seed).standard_normal((100, g.dim))
        ref = theta0(g, x)
        worst[name] = float(np.max(np.abs(theta0_variational(g, x) - ref) / ref))
    return _result(3, "Legendre transform certificate", max(worst.values()), 1e-4, 60.0, start,
                   per_family=worst)


def criterion_eikonal(seed=0):
    start = time.perf_counter()
    worst = {}
    for name, g in gauge_families().items():
        x = sample_smooth_points(g, 200, seed, rho_range=(0.1, 10.0), tube=1e-3)
        worst[name] = float(np.max(np.abs(eikonal_residual(g, x))))
    return _result(4, "eikonal identity", max(worst.values()), 1e-9, 5.0, start, per_family=worst)


RADIAL_CASES = ((0.5, 2.0), (1.0, 2.0), (1.0, 3.0), (2.0, 1.5))


def criterion_radial_action(seed=0):
    """Second-order convergence to the closed-form action and small
    residuals for the candidate solutions.

    The measured value is ``max(residual / 1e-4, 3.5 / min_ratio)``, so it
    passes exactly when both parts do.
    """
    start = time.perf_counter()
    ratios, cand = {}, {}
    for a, p in RADIAL_CASES:
        params = OperatorParams(a, p)
        for name, g in _operator_gauges(a).items():
            x = sample_smooth_points(g, 20, seed)
            key = f"{name} a={a:g} p={p:g}"
            cp = candidate_profile(g.Q, p)
            worst_ratio = math.inf
            for pr in (profile("identity"), profile("square"), profile("log"), cp):
                rhs = radial_rhs(g, params, pr, x)
                e = [np.max(np.abs(apply_Lp(g, params, radial_field(g, pr), x, h, richardson=False)
                                   - rhs)) for h in (2e-3, 1e-3)]
                worst_ratio = min(worst_ratio, e[0] / e[1])
            ratios[key] = float(worst_ratio)
            cand[key] = float(np.max(np.abs(apply_Lp(g, params, radial_field(g, cp), x, 1e-4))))
    min_ratio = min(ratios.values())
    max_cand = max(cand.values())
    measured = max(max_cand / 1e-4, 3.5 / min_ratio)
    return _result(5, "radial action and candidate solutions", measured, 1.0, 120.0, start,
                   min_ratio=min_ratio, max_candidate_residual=max_cand, ratios=ratios,
                   candidate=cand)


def criterion_constants(seed=0, budget=10_000_000):
    """``sigma = Q omega`` by two routes and the small-alpha ellipsoid volume.

    Measured value: the larger of ``gap / (3 combined error)`` and
    ``|V - V_ellipsoid| / (3 SE)``.
    """
    start = time.perf_counter()
    cfg = QuadratureConfig("monte-carlo", budget, 1e-3, seed)
    g = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        sig = sigma_constant(g, OperatorParams(1.0, 2.0), cfg, check=False)
        g0 = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1e-6)
        vol = integrate(lambda x: np.ones(x.shape[0]), GaugeBall(1.0), g0, cfg)
    coarea = sig.details["gap"] / (3 * sig.details["combined_error"])
    volume = abs(vol.value - ELLIPSOID_VOLUME) / (3 * vol.error)
    return _result(6, "normalization constants", max(coarea, volume), 1.0, 300.0, start,
                   sigma_volume=sig.value, sigma_volume_err=sig.error,
                   sigma_shell=sig.details["shell"].value, sigma_shell_err=sig.details["shell"].error,
                   volume=vol.value, volume_err=vol.error)


EUCLIDEAN_BUMPS = (
    Bump((0.0, 0.0, 0.0), 0.8, 1.0),
    Bump((0.0, 0.0, 0.1), 0.6, 2.0),
    Bump((0.0, 0.0, -0.15), 1.0, 0.5),
)
OFF_SUPPORT_BUMP = Bump((1.5, 0.0, 0.0), 0.5, 1.0)


def _quiet_weak(G, bump, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        return weak_form_test(G, bump, weak_test_config(seed))


def criterion_weak_form(seed=0):
    """Weak-form delta property. Measured: worst deviation over its tolerance."""
    start = time.perf_counter()
    ge = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0)
    G = FundamentalSolution(ge, 2.0, config=default_config(ge, seed)).fit()
    dev = {}
    for i, b in enumerate(EUCLIDEAN_BUMPS):
        dev[f"euclidean bump {i}"] = abs(_quiet_weak(G, b, seed).ratio - 1) / 0.02
    off = _quiet_weak(G, OFF_SUPPORT_BUMP, seed)
    dev["euclidean off-support"] = abs(off.value) / (0.02 * OFF_SUPPORT_BUMP.amplitude)
    gp = ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5)
    Gp = FundamentalSolution(gp, 2.0, config=default_config(gp, seed)).fit()
    dev["power-4/euclidean bump"] = abs(_quiet_weak(Gp, EUCLIDEAN_BUMPS[0], seed).ratio - 1) / 0.05
    return _result(7, "weak-form delta property", max(dev.values()), 1.0, 1200.0, start,
                   relative_to_tolerance=dev)


def criterion_exponents(seed=0):
    """Exact arithmetic: count of failed exponent identities."""
    start = time.perf_counter()
    failures = []
    if homogeneous_dimension(2, 1, Fraction(3)) != 6:
        failures.append("Q(2,1,3) != 6")
    for m, k in [(1, 1), (2, 1), (2, 2), (3, 1)]:
        N = m + k
        for p in [Fraction(3, 2), Fraction(2), Fraction(3)]:
            classical = Fraction(-(N - p), p - 1)
            if power_exponent(m, k, Fraction(0), p) != classical:
                failures.append(f"alpha=0 m={m} k={k} p={p}")
            for j in (1, 2, 3, 6):
                a = Fraction(1, 10**j)
                # the gap to the classical exponent is exactly -k alpha / (p-1)
                if power_exponent(m, k, a, p) - classical != -k * a / (p - 1):
                    failures.append(f"alpha={a} m={m} k={k} p={p}")
            if power_exponent(m, k, Fraction(1), p) != Fraction(-(m + 2 * k - p), p - 1):
                failures.append(f"alpha=1 m={m} k={k} p={p}")
    return _result(8, "exact exponent identities", len(failures), 0, 5.0, start, failures=failures)


def criterion_pole_translation(seed=0):
    start = time.perf_counter()
    g = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0)
    G = FundamentalSolution(g, 2.0, pole_sigma=(0.3,), config=default_config(g, seed)).fit()
    dev = {}
    for b in (Bump((0.0, 0.0, 0.3), 0.8, 1.0), Bump((0.0, 0.0, 0.4), 0.6, 1.5)):
        dev[str(b.center)] = abs(_quiet_weak(G, b, seed).ratio - 1) / 0.02
    return _result(9, "translated pole", max(dev.values()), 1.0, 600.0, start,
                   relative_to_tolerance=dev)


CRITERIA = {
    1: ("duality", criterion_duality),
    2: ("finsler-laplacian", criterion_finsler_laplacian),
    3: ("legendre-certificate", criterion_legendre_certificate),
    4: ("eikonal", criterion_eikonal),
    5: ("radial-action", criterion_radial_action),
    6: ("constants", criterion_constants),
    7: ("weak-form", criterion_weak_form),
    8: ("exponents", criterion_exponents),
    9: ("pole-translation", criterion_pole_translation),
}
GROUPS = {"all": list(CRITERIA), "norms": [1, 2], "gauge": [3, 4], "operators": [5],
          "fundsol": [6, 7, 8, 9]}


def resolve(selection):
    """Turn names, numbers or group names into criterion ids.

    Raises
    ------
    ValueError
        For an unknown entry.
    """
    if not selection:
        return list(CRITERIA)
    by_name = {name: cid for cid, (name, _) in CRITERIA.items()}
    ids = []
    for item in selection:
        item = str(item).strip()
        if item in GROUPS:
            ids.extend(GROUPS[item])
        elif item in by_name:
            ids.append(by_name[item])
        elif item.isdigit() and int(item) in CRITERIA:
            ids.append(int(item))
        else:
            raise ValueError(f"unknown criterion {item!r}; known: {sorted(by_name)} "
                             f"or groups {sorted(GROUPS)}")
    return sorted(set(ids))


def run_criteria(selection=None, seed=0):
    return [CRITERIA[cid][1](seed=seed) for cid in resolve(selection)]
