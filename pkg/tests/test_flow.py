import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import InvertibilityError, WindowError
from app.schemas.run_config import NumericsConfig
from app.services.flow_service import Cocycle, EvolutionFamily, flow_service
from app.services.system_service import system_service


def _scalar(t):
    return -np.ones(np.shape(t) + (1, 1))


def test_rk4_fourth_order():
    errors = []
    for h in (0.1, 0.05):
        family = EvolutionFamily(_scalar, 1, h, 2.0)
        errors.append(abs(family.evolve_many(1.0, 0.0)[0, 0] - math.exp(-1.0)))
    assert errors[0] / errors[1] >= 8.0


def test_evolution_family_cocycle_law(numerics):
    sys = system_service.build_system("trichotomy_block")
    family = flow_service.evolution_family(sys, numerics)
    t, u, s = 3.3, -0.7, -4.12
    assert_allclose(family.evolve_many(t, u) @ family.evolve_many(u, s), family.evolve_many(t, s), atol=1e-10)


def test_evolution_family_matches_closed_form(numerics):
    sys = system_service.build_system("trichotomy_block")
    family = flow_service.evolution_family(sys, numerics)
    t, s = np.array([2.5, -1.0, 0.3]), np.array([-1.5, 1.0, 0.3])
    T = family.evolve_many(t, s)
    assert_allclose(T[:, 0, 0], np.cosh(s) / np.cosh(t), rtol=1e-7)
    assert_allclose(T[:, 1, 1], np.exp(-(t - s)), rtol=1e-7)
    assert_allclose(T[2], np.eye(2), atol=0.0)


@pytest.mark.parametrize("t", [-3.0, 0.5, 2.0])
def test_evolve_linear_rotation_decay(numerics, t):
    sys = system_service.build_system("rotation_decay_3d")
    family = flow_service.evolution_family(sys, numerics)
    T = flow_service.evolve_linear(family, t, 0.0)
    assert T[2, 2] == pytest.approx(1.0 / (1.0 + t ** 2), abs=1e-6)
    assert_allclose(T[:2, :2], [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], atol=1e-6)
    assert_allclose(flow_service.evolve_linear(family, t, t), np.eye(3), atol=0.0)


def test_window_is_enforced(numerics, scalar_tanh):
    family = flow_service.evolution_family(scalar_tanh, numerics)
    with pytest.raises(WindowError):
        family.evolve_many(numerics.t_max + 1.0, 0.0)
    with pytest.raises(WindowError):
        flow_service.solve_coupled(scalar_tanh, 0.0, [1.0], [0.0], -numerics.t_max - 0.5, numerics)


def test_solve_uncoupled_is_linear_flow(numerics, scalar_tanh):
    x1, y = flow_service.solve_uncoupled(scalar_tanh, 0.5, [2.0], [1.0], 2.0, numerics)
    assert_allclose(x1, [2.0 * math.exp(-1.5)], rtol=1e-8)
    assert_allclose(y, [1.0])


def test_solve_coupled_zero_f_equals_linear(numerics):
    sys = system_service.build_system("zero_f", {"dim": 2})
    x2, _ = flow_service.solve_coupled(sys, 0.0, [1.0, -2.0], [0.3], 1.2, numerics)
    x1, _ = flow_service.solve_uncoupled(sys, 0.0, [1.0, -2.0], [0.3], 1.2, numerics)
    assert_allclose(x2, x1, atol=1e-10)


def test_cocycle_products():
    c = Cocycle(lambda k: np.full(np.shape(k) + (1, 1), 0.5), 1, 10)
    assert flow_service.cocycle_eval(c, 5, 2)[0, 0] == pytest.approx(0.125)
    assert c.evaluate(2, 5)[0, 0] == pytest.approx(8.0)
    assert_allclose(c.evaluate(3, 3), np.eye(1))
    with pytest.raises(WindowError):
        c.evaluate(11, 0)


def test_cocycle_column_and_row_match_products():
    sys = system_service.build_system("discrete_rotation_decay_3d")
    c = flow_service.evolution_family(sys, NumericsConfig(t_max=15.0))
    col = c.column(2, -4, 6)
    row = c.row(2, -4, 6)
    for j in range(-4, 7):
        assert_allclose(col[j + 4], c.evaluate(j, 2), atol=1e-12)
        assert_allclose(row[j + 4], c.evaluate(2, j), atol=1e-12)


def test_singular_operator_is_rejected():
    c = Cocycle(lambda k: np.zeros(np.shape(k) + (1, 1)), 1, 5)
    with pytest.raises(InvertibilityError):
        c.evaluate(0, 2)


def test_orbit_forward_then_backward(numerics, discrete_tanh):
    xi, eta = np.array([1.3]), np.array([0.4])
    x3, y3 = flow_service.orbit(discrete_tanh, 0, (xi, eta), 3, coupled=True, numerics=numerics)
    x0, y0 = flow_service.orbit(discrete_tanh, 3, (x3, y3), 0, coupled=True, numerics=numerics)
    assert_allclose(x0, xi, atol=1e-10)
    assert_allclose(y0, eta, atol=1e-12)


def test_orbit_path_batches(numerics, discrete_tanh):
    x = np.array([[0.5], [-1.0]])
    y = np.array([[0.1], [0.2]])
    xs, ys = flow_service.orbit_path(discrete_tanh, 0, x, y, 4, coupled=False, numerics=numerics)
    assert xs.shape == (5, 2, 1)
    assert_allclose(xs[-1], x * 0.5 ** 4)
    assert_allclose(ys[-1], y)
