import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate as spi
from sklearn.base import clone

import anisogauge.fundsol as fs
from anisogauge.exceptions import DomainError, InconsistencyError, RegimeWarning
from anisogauge.fundsol import (Bump, FundamentalSolution, build, classical_constant,
                                classical_limit_check, normalization_constant, omega_constant,
                                power_exponent, weak_form_test)
from anisogauge.gauge import ProductGauge
from anisogauge.minkowski import EuclideanNorm, PowerNorm
from anisogauge.operators import OperatorParams, apply_Lp, sample_smooth_points
from anisogauge.quadrature import Estimate, QuadratureConfig

EUC = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0)


def cylindrical_omega(power):
    """int over {r^4 + 16 s^2 < 1} of (r / rho)^power, rho = (r^4 + 16 s^2)^(1/4)."""
    # s = v sqrt(1 - r^4) / 4 maps each sigma-interval onto [-1, 1]
    def f(v, r):
        h = math.sqrt(1 - r**4) / 4
        s = v * h
        return 2 * math.pi * r * h * (r / (r**4 + 16 * s * s) ** 0.25) ** power
    val, _ = spi.dblquad(f, 0, 1, -1, 1, epsabs=1e-13, epsrel=1e-11)
    return val


@pytest.fixture(scope="module")
def G2():
    return FundamentalSolution(EUC, 2.0).fit()


@pytest.fixture(scope="module")
def G3():
    return FundamentalSolution(ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5), 3.0).fit()


def test_omega_against_independent_quadrature():
    assert cylindrical_omega(2) == pytest.approx(math.pi / 4, rel=1e-9)
    est = omega_constant(EUC, OperatorParams(1.0, 2.0))
    assert est.value == pytest.approx(math.pi / 4, rel=1e-6)


def test_heisenberg_type_constant(G2):
    # sigma = Q omega = pi and C = sigma^-1 / (Q - 2)
    assert G2.sigma_.value == pytest.approx(math.pi, rel=1e-6)
    assert G2.constant_ == pytest.approx(1 / (2 * math.pi), rel=1e-6)
    assert G2.branch_ == "power" and G2.exponent_ == -2.0
    assert G2.sigma_.details["gap"] <= 3 * G2.sigma_.details["combined_error"]


def test_log_branch_constant():
    G = FundamentalSolution(EUC, 4.0).fit()
    # |z|^2 = rho^2 cos(t), 4 sigma = rho^2 sin(t): omega = pi/8 int cos^2 = pi^2/16
    sigma = 4 * math.pi**2 / 16
    assert G.branch_ == "log"
    assert G.constant_ == pytest.approx(sigma ** (-1 / 3), rel=1e-5)
    x = np.array([[0.3, 0.2, 0.1]])
    assert G.evaluate(x)[0] == pytest.approx(-G.constant_ * math.log(EUC.rho(x)[0]))
    assert G.record()["exponent"] is None


def test_exact_exponents():
    assert power_exponent(2, 1, Fraction(1), Fraction(3)) == Fraction(-1, 2)
    assert power_exponent(2, 1, Fraction(1, 2), 2) == Fraction(-3, 2)
    assert power_exponent(2, 1, 1.0, 2.0) == -2.0
    assert normalization_constant(4.0, 2.0, math.pi) == pytest.approx(1 / (2 * math.pi))


def test_dilation_covariance(G3):
    x = sample_smooth_points(G3.gauge, 20, seed=1)
    for t in (0.3, 4.0):
        np.testing.assert_allclose(G3.evaluate(G3.gauge.dilate(t, x)), t**G3.exponent_ * G3.evaluate(x),
                                   rtol=1e-12)


def test_positive_and_decaying(G3):
    x = sample_smooth_points(G3.gauge, 50, seed=2)
    v = G3.evaluate(x)
    assert np.all(v > 0)
    assert np.all(G3.evaluate(G3.gauge.dilate(2.0, x)) < v)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_off_pole_residual(p):
    G = FundamentalSolution(EUC, p).fit()
    x = sample_smooth_points(EUC, 20, seed=3, tube=0.2)
    res = apply_Lp(EUC, G.params_, G.as_field(), x, h=1e-3)
    assert np.max(np.abs(res)) < 1e-7


def test_gradient_matches_differences(G3):
    x = sample_smooth_points(G3.gauge, 10, seed=4, tube=0.2)
    h = 1e-6
    fd = np.stack([(G3.evaluate(x + h * e) - G3.evaluate(x - h * e)) / (2 * h)
                   for e in np.eye(3)], 1)
    np.testing.assert_allclose(G3.gradient(x), fd, rtol=1e-6, atol=1e-8)


def test_pole_translation(G2):
    Gs = FundamentalSolution(EUC, 2.0, pole_sigma=[0.3]).fit()
    x = np.random.default_rng(5).uniform(-1, 1, (20, 3))
    shifted = x + [0, 0, 0.3]
    np.testing.assert_allclose(Gs.evaluate(shifted), G2.evaluate(x), rtol=1e-14)
    np.testing.assert_allclose(Gs.gradient(shifted), G2.gradient(x), rtol=1e-14)
    with pytest.raises(DomainError):
        Gs.evaluate([0, 0, 0.3])


def test_weak_form_recovers_bump_at_pole(G2):
    res = weak_form_test(G2, Bump((0, 0, 0), 0.8))
    assert res.target == 1.0
    assert abs(res.ratio - 1) < 1e-2
    assert abs(res.value - res.target) < max(3 * res.error, 1e-3)


def test_weak_form_with_shifted_pole():
    Gs = FundamentalSolution(EUC, 2.0, pole_sigma=[0.3]).fit()
    bump = Bump((0, 0, 0.4), 0.6, 1.5)
    res = weak_form_test(Gs, bump)
    assert res.target == pytest.approx(float(bump.value([0, 0, 0.3])[0]))
    assert abs(res.ratio - 1) < 1e-2


@pytest.mark.parametrize("gauge, p", [
    (EUC, 1.5),
    (EUC, 3.0),
    (EUC, 4.0),  # p = Q, log branch
    (ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5), 2.0),
    (ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5), 3.5),  # p = Q
], ids=["euc-1.5", "euc-3", "euc-log", "p4-2", "p4-log"])
def test_weak_form_across_p(gauge, p):
    G = FundamentalSolution(gauge, p).fit()
    res = weak_form_test(G, Bump((0, 0, 0.1), 0.6, 2.0))
    assert abs(res.ratio - 1) < 1e-2


def test_weak_form_vanishes_off_support(G2):
    res = weak_form_test(G2, Bump((1.5, 0, 0), 0.5))
    assert res.target == 0.0
    assert abs(res.value) < 1e-3


def test_classical_limit():
    rep = classical_limit_check(2.0, 2, 1)
    assert rep.adjusted_ratio == pytest.approx(1.0, abs=1e-2)
    assert rep.raw_ratio == pytest.approx(2.0, rel=1e-2)
    assert classical_constant(3, 2.0) == pytest.approx(1 / (4 * math.pi))


def test_regime_warning_and_refusal():
    g = ProductGauge(EuclideanNorm(1), EuclideanNorm(1), 0.5)
    with pytest.warns(RegimeWarning):
        G = FundamentalSolution(g, 3.0).fit()
    assert G.constant_ < 0
    with pytest.raises(DomainError):
        weak_form_test(G, Bump((0, 0), 0.5))


def test_inconsistent_routes_raise(monkeypatch):
    def biased(f, g, cfg, delta_schedule=(0.02, 0.01, 0.005)):
        return Estimate(1.5 * math.pi, 1e-4, cfg.method, 1, cfg.seed, True)

    monkeypatch.setattr(fs, "shell_surface_estimate", biased)
    with pytest.raises(InconsistencyError):
        FundamentalSolution(EUC, 2.0).fit()
    assert FundamentalSolution(EUC, 2.0, check_consistency=False).fit().constant_ > 0


def test_sklearn_conventions(G2):
    params = G2.get_params()
    assert set(params) == {"gauge", "p", "pole_sigma", "config", "check_consistency"}
    fresh = clone(G2)
    assert not hasattr(fresh, "constant_")
    fresh.set_params(p=3.0)
    assert fresh.fit().exponent_ == -0.5
    np.testing.assert_array_equal(G2.predict([[0.5, 0.5, 0.5]]), G2.evaluate([[0.5, 0.5, 0.5]]))


def test_unfitted_and_bad_inputs():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        FundamentalSolution(EUC).evaluate([1, 1, 1])
    with pytest.raises(TypeError):
        FundamentalSolution("heisenberg").fit()
    with pytest.raises(ValueError):
        FundamentalSolution(EUC, 1.0).fit()
    with pytest.raises(ValueError):
        FundamentalSolution(EUC, pole_sigma=[0.1, 0.2]).fit()
    with pytest.raises(ValueError):
        build(EUC, OperatorParams(2.0, 2.0))


def test_record_is_json(G2):
    rec = json.loads(json.dumps(G2.record()))
    assert rec["C"] == pytest.approx(1 / (2 * math.pi), rel=1e-6)
    assert rec["Q"] == 4.0


def test_monte_carlo_constant_agrees():
    cfg = QuadratureConfig(budget=2_000_000, seed=9, target_rel_error=0.05)
    G = FundamentalSolution(EUC, 2.0, config=cfg).fit()
    assert abs(G.constant_ - 1 / (2 * math.pi)) < 4 * G.constant_error_
