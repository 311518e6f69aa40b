import math

import numpy as np
import pytest

import lsnn.loss as loss_mod
from lsnn.benchmarks import builtin_problem
from lsnn.geometry import ConfigurationError, build_mesh
from lsnn.loss import (LossConfig, LossPlan, NumericError, continuous_loss, discrete_loss,
                       fd_directional_derivative, loss_gradient)
from lsnn.network import Architecture, Parameters, construct_lemma32, forward
from lsnn.verify import kink_free_mesh, random_params


def _setup(pid, h=0.01):
    problem = builtin_problem(pid)
    mesh = build_mesh(problem.domain, h, problem.beta)
    return problem, mesh, LossConfig.for_problem(problem, h)


def _constant_net(value):
    return Parameters.from_layers([[[1.0, 0.0]], [[0.0]]], [[0.0], [-value]])


def test_zero_network_on_vline():
    problem, mesh, cfg = _setup("vline")
    val = discrete_loss(_constant_net(0.0), mesh, problem, cfg)
    assert val.interior == 0.0
    assert abs(val.boundary - (2 - math.pi / 3)) <= 0.01
    assert val.total == val.interior + val.boundary


def test_ramp_has_zero_interior_residual_on_vline():
    problem, mesh, cfg = _setup("vline")
    eps = 0.05
    p = construct_lemma32((1.0, 0.0), math.pi / 3, 0.0, 1.0, eps)
    val = discrete_loss(p, mesh, problem, cfg)
    assert val.interior == 0.0
    # boundary mismatch lives on (pi/3 - eps, pi/3 + eps): at most its length
    assert 0 < val.boundary <= 2 * eps


def test_homogeneous_loss_of_constant_one():
    problem, mesh, cfg = _setup("vline")
    plan = LossPlan(mesh, problem, cfg, homogeneous=True)
    assert math.sqrt(plan.value(_constant_net(1.0)).total) == pytest.approx(math.sqrt(2.0))


def test_boundary_weight_scales_boundary_term():
    problem, mesh, cfg = _setup("vline")
    p = _constant_net(0.3)
    v1 = discrete_loss(p, mesh, problem, cfg)
    v10 = discrete_loss(p, mesh, problem, LossConfig(cfg.rho, boundary_weight=10.0))
    assert v10.boundary == v1.boundary
    assert v10.total == pytest.approx(v10.interior + 10 * v1.boundary)


def test_rho_must_be_below_h():
    problem, mesh, _ = _setup("vline")
    with pytest.raises(ConfigurationError, match="rho"):
        LossPlan(mesh, problem, LossConfig(0.01))


def test_nan_parameters_raise_with_location():
    problem, mesh, cfg = _setup("vline")
    p = _constant_net(0.0)
    p.b(1)[0] = np.nan
    with pytest.raises(NumericError, match="cell 0"):
        discrete_loss(p, mesh, problem, cfg)


def test_fd_directional_derivative_of_linear_function():
    lin = lambda x: np.atleast_2d(x) @ np.array([2.0, 3.0])  # noqa: E731
    d = fd_directional_derivative(lin, np.array([[0.3, 0.4]]), np.array([0.6, 0.8]), 1e-3)
    assert d[0] == pytest.approx(2 * 0.6 + 3 * 0.8)


def test_residual_vectors_reproduce_loss():
    problem, mesh, cfg = _setup("twosector")
    p = random_params(np.random.default_rng(0), Architecture.parse("2-5-5-1"), problem.domain)
    plan = LossPlan(mesh, problem, cfg)
    r, e = plan.residuals(p)
    total = np.sum(mesh.cell_measures * r * r) + np.sum(plan.w_edges * e * e)
    assert plan.value(p).total == pytest.approx(total, rel=1e-12)


def test_speed_scaling_switch_only_matters_for_variable_speed():
    problem, mesh, cfg = _setup("vline")
    p = random_params(np.random.default_rng(1), Architecture.parse("2-4-1"), problem.domain)
    off = LossConfig(cfg.rho, scale_by_speed=False)
    assert discrete_loss(p, mesh, problem, cfg) == discrete_loss(p, mesh, problem, off)
    problem, mesh, cfg = _setup("rotational")
    off = LossConfig(cfg.rho, scale_by_speed=False)
    assert discrete_loss(p, mesh, problem, cfg) != discrete_loss(p, mesh, problem, off)


def test_gradient_along_random_direction():
    problem, mesh, cfg = _setup("vline", h=0.02)
    rng = np.random.default_rng(5)
    p = random_params(rng, Architecture.parse("2-4-1"), problem.domain)
    sub = kink_free_mesh(p, mesh, problem, cfg)
    g = loss_gradient(p, sub, problem, cfg)
    d = rng.normal(size=p.arch.n_params)
    plan = LossPlan(sub, problem, cfg)
    step = 1e-6
    up, dn = Parameters(p.arch, p.theta + step * d), Parameters(p.arch, p.theta - step * d)
    fd = (plan.value(up).total - plan.value(dn).total) / (2 * step)
    assert g @ d == pytest.approx(fd, rel=1e-5)


def test_chunked_and_threaded_evaluation_is_bit_identical(monkeypatch):
    problem, mesh, cfg = _setup("twosector")
    p = random_params(np.random.default_rng(2), Architecture.parse("2-6-6-1"), problem.domain)
    monkeypatch.setattr(loss_mod, "CHUNK_CELLS", 1500)
    serial = LossPlan(mesh, problem, cfg, workers=1)
    threaded = LossPlan(mesh, problem, cfg, workers=4)
    assert len(serial.chunks) > 1
    v1, g1 = serial.value_and_grad(p)
    v2, g2 = threaded.value_and_grad(p)
    assert v1 == v2
    assert np.array_equal(g1, g2)


def test_continuous_loss_converges_toward_fine_value():
    problem, mesh, cfg = _setup("vline")
    p = construct_lemma32((1.0, 0.0), math.pi / 3, 0.0, 1.0, 0.05)
    coarse = discrete_loss(p, mesh, problem, cfg).total
    fine = continuous_loss(p, problem, 0.002, cfg).total
    # boundary mismatch of the ramp: 2 * int_0^eps (t/2eps)^2 dt = eps/6
    exact = 0.05 / 6
    assert abs(fine - exact) < abs(coarse - exact) or abs(fine - exact) < 1e-6
    assert fine == pytest.approx(exact, rel=1e-3)


def test_loss_value_is_forward_consistent():
    problem, mesh, cfg = _setup("diagonal", h=0.05)
    p = random_params(np.random.default_rng(9), Architecture.parse("2-3-1"), problem.domain)
    plan = LossPlan(mesh, problem, cfg)
    xk = mesh.cell_centroids
    unit = np.array([1.0, 1.0]) / math.sqrt(2)
    vb = (forward(p, xk) - forward(p, xk - cfg.rho * unit)) / cfg.rho
    r = vb + forward(p, xk) - problem.f(xk)
    assert plan.value(p).interior == pytest.approx(float(np.sum(mesh.cell_measures * r * r)), rel=1e-12)
