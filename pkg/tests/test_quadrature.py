import math
import warnings

import numpy as np
import pytest

from anisogauge.exceptions import BudgetWarning
from anisogauge.gauge import ProductGauge
from anisogauge.minkowski import EuclideanNorm, PowerNorm, QuadraticNorm
from anisogauge.quadrature import (BoxMinusBall, GaugeBall, GaugeShell, QuadratureConfig,
                                   acceptance_lower_bound, bounding_box, excision_sequence,
                                   integrate, inner_box, layer_polar_rule, richardson_extrapolate,
                                   richardson_weights, shell_surface_estimate, sphere_rule)

EUC = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1.0)
P4 = ProductGauge(PowerNorm(2, 4.0), EuclideanNorm(1), 0.5)
QP = ProductGauge(QuadraticNorm(np.diag([4.0, 1.0])), PowerNorm(2, 4.0), 2.0)
# {|z|^4 + 16 sigma^2 < 1}: pi * int_0^1 r sqrt(1 - r^4) dr = pi^2 / 8
EUC_BALL = math.pi**2 / 8


def one(x):
    return np.ones(x.shape[0])


def test_tensor_rule_recovers_ellipsoid_in_the_limit():
    # alpha -> 0 gives |z|^2 + 4 sigma^2 < 1, semi-axes (1, 1, 1/2)
    g = ProductGauge(EuclideanNorm(2), EuclideanNorm(1), 1e-6)
    est = integrate(one, GaugeBall(), g, QuadratureConfig("tensor-gauss", budget=2_000_000))
    assert est.value == pytest.approx(2 * math.pi / 3, rel=1e-5)


@pytest.mark.parametrize("method", ["tensor-gauss", "adaptive"])
def test_cubature_volume_of_euclidean_gauge_ball(method):
    est = integrate(one, GaugeBall(), EUC, QuadratureConfig(method, budget=2_000_000, target_rel_error=1e-6))
    assert est.value == pytest.approx(EUC_BALL, rel=1e-8)


@pytest.mark.parametrize("method", ["monte-carlo", "quasi-monte-carlo"])
def test_sampling_volume_within_error_bars(method):
    est = integrate(one, GaugeBall(), EUC, QuadratureConfig(method, budget=400_000, seed=3,
                                                            target_rel_error=0.1))
    assert abs(est.value - EUC_BALL) < 4 * est.error
    assert est.evaluations <= 400_000


def test_sphere_rules_integrate_area():
    assert sphere_rule(1, 0)[1].sum() == 2
    assert sphere_rule(2, 0)[1].sum() == pytest.approx(2 * math.pi)
    pts, w = sphere_rule(3, 1)
    assert w.sum() == pytest.approx(4 * math.pi)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)
    # second moment of x_3 on S^2 is 4 pi / 3
    assert w @ pts[:, 2] ** 2 == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("g", [EUC, P4, QP], ids=["euc", "p4", "qp"])
def test_layer_polar_nodes_lie_on_unit_sphere(g):
    nodes, w = layer_polar_rule(g, 0)
    np.testing.assert_allclose(g.rho(nodes), 1.0, rtol=1e-12)
    # sum of weights is Q times the ball volume
    fine = layer_polar_rule(g, 3)[1].sum()
    assert w.sum() / g.Q == pytest.approx(integrate(one, GaugeBall(), g, QuadratureConfig("adaptive")).value,
                                          rel=1e-2)
    assert layer_polar_rule(g, 2)[1].sum() == pytest.approx(fine, rel=1e-6)


def test_volume_scales_with_homogeneous_dimension():
    cfg = QuadratureConfig("adaptive", target_rel_error=1e-6)
    v1 = integrate(one, GaugeBall(1.0), P4, cfg).value
    v2 = integrate(one, GaugeBall(1.7), P4, cfg).value
    assert v2 / v1 == pytest.approx(1.7**P4.Q, rel=1e-8)


def test_shell_is_difference_of_balls():
    cfg = QuadratureConfig("adaptive", target_rel_error=1e-6)
    shell = integrate(one, GaugeShell(0.5, 1.0), EUC, cfg).value
    assert shell == pytest.approx(EUC_BALL * (1 - 0.5**EUC.Q), rel=1e-8)


def test_linearity():
    # a fixed tensor level, so all three integrals share their nodes
    cfg = QuadratureConfig("tensor-gauss", budget=2_000_000, target_rel_error=0.1)

    def f(x):
        return np.cos(x[:, 0]) + x[:, 2] ** 2

    def g2(x):
        return np.exp(-x[:, 1] ** 2)

    a = integrate(f, GaugeBall(), QP, cfg).value
    b = integrate(g2, GaugeBall(), QP, cfg).value
    ab = integrate(lambda x: 2 * f(x) - 3 * g2(x), GaugeBall(), QP, cfg).value
    assert ab == pytest.approx(2 * a - 3 * b, rel=1e-10)


def test_monte_carlo_is_unbiased_over_seeds():
    vals, errs = [], []
    for seed in range(30):
        est = integrate(one, GaugeBall(), P4, QuadratureConfig(budget=20_000, seed=seed, target_rel_error=0.1))
        vals.append(est.value)
        errs.append(est.error)
    ref = integrate(one, GaugeBall(), P4, QuadratureConfig("adaptive", target_rel_error=1e-6)).value
    z = (np.mean(vals) - ref) / (np.mean(errs) / math.sqrt(30))
    assert abs(z) < 4
    # reported errors match the observed spread
    assert np.std(vals, ddof=1) / np.mean(errs) == pytest.approx(1.0, rel=0.35)


def test_determinism_across_thread_counts(monkeypatch):
    cfg = QuadratureConfig(budget=50_000, seed=11, target_rel_error=0.1)
    monkeypatch.setenv("ANISOGAUGE_THREADS", "1")
    a = integrate(one, GaugeBall(), QP, cfg)
    monkeypatch.setenv("ANISOGAUGE_THREADS", "4")
    b = integrate(one, GaugeBall(), QP, cfg)
    assert a.value == b.value and a.error == b.error
    c = integrate(one, GaugeBall(), QP, QuadratureConfig(budget=50_000, seed=12, target_rel_error=0.1))
    assert c.value != a.value


def test_bad_thread_variable(monkeypatch):
    monkeypatch.setenv("ANISOGAUGE_THREADS", "zero")
    with pytest.raises(ValueError, match="ANISOGAUGE_THREADS"):
        integrate(one, GaugeBall(), EUC, QuadratureConfig(budget=1000, target_rel_error=0.1))


@pytest.mark.parametrize("g", [EUC, P4, QP], ids=["euc", "p4", "qp"])
def test_boxes_bracket_the_ball(g):
    rng = np.random.default_rng(0)
    h = bounding_box(g, 1.0)
    x = rng.uniform(-h, h, (200_000, g.dim))
    inside = g.rho(x) < 1
    # the bounding box is tight: the ball reaches within 1% of every face
    assert np.all(np.max(np.abs(x[inside]), axis=0) > 0.97 * h)
    assert inside.mean() >= acceptance_lower_bound(g)
    small = rng.uniform(-inner_box(g, 1.0), inner_box(g, 1.0), (10_000, g.dim))
    assert np.all(g.rho(small) < 1)


def test_euclidean_acceptance_floor():
    assert acceptance_lower_bound(EUC) == pytest.approx(0.125)


def test_shell_surface_is_Q_times_volume():
    est = shell_surface_estimate(one, EUC, QuadratureConfig("adaptive", target_rel_error=1e-4))
    assert est.value == pytest.approx(EUC.Q * EUC_BALL, rel=1e-4)
    assert est.details["monotone"]


def test_shell_surface_sampling_route():
    est = shell_surface_estimate(one, EUC, QuadratureConfig(budget=2_000_000, target_rel_error=0.1))
    assert abs(est.value - EUC.Q * EUC_BALL) < 4 * est.error


def test_richardson_weights():
    np.testing.assert_allclose(richardson_weights([0.08, 0.04, 0.02]), [1 / 3, -2, 8 / 3])
    h = [0.3, 0.2, 0.1]
    assert richardson_extrapolate(h, [2 + 5 * t - t**2 for t in h]) == pytest.approx(2.0)


def test_excision_sequence_against_ball_volume():
    lo, hi = (-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)
    eps = [0.4, 0.2]
    cfg = QuadratureConfig(budget=1_000_000, seed=5, target_rel_error=0.1)
    out = excision_sequence(one, EUC, lo, hi, eps, cfg)
    for e, est in zip(eps, out):
        assert abs(est.value - (8 - e**EUC.Q * EUC_BALL)) < 4 * est.error


def test_excision_cubature_matches_sampling_on_a_bump():
    def bump(x):
        r2 = np.sum(x**2, 1)
        return np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-300)), 0.0)

    lo, hi = (-1.0,) * 3, (1.0,) * 3
    cub = integrate(bump, BoxMinusBall(lo, hi, 0.1), EUC, QuadratureConfig("adaptive", target_rel_error=1e-5))
    mc = integrate(bump, BoxMinusBall(lo, hi, 0.1), EUC,
                   QuadratureConfig(budget=2_000_000, seed=1, target_rel_error=0.1))
    assert abs(cub.value - mc.value) < 4 * mc.error
    assert cub.error < 1e-4 * cub.value


def test_budget_warning():
    with pytest.warns(BudgetWarning):
        integrate(one, GaugeBall(), EUC, QuadratureConfig(budget=1000, target_rel_error=1e-3))


def test_no_warning_when_converged():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(one, GaugeBall(), EUC, QuadratureConfig("adaptive", target_rel_error=1e-6))


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(method="simpson")
    with pytest.raises(ValueError):
        QuadratureConfig(budget=10)
    with pytest.raises(ValueError):
        QuadratureConfig(target_rel_error=0.5)
    with pytest.raises(ValueError):
        GaugeShell(1.0, 0.5)
    with pytest.raises(ValueError):
        BoxMinusBall((0, 0), (1, -1), 0.1)
    with pytest.raises(TypeError):
        integrate(one, "ball", EUC, QuadratureConfig())


def test_cubature_refuses_high_dimension():
    g = ProductGauge(EuclideanNorm(3), EuclideanNorm(2), 1.0)
    with pytest.raises(ValueError, match="sampling method"):
        integrate(one, GaugeBall(), g, QuadratureConfig("tensor-gauss"))
