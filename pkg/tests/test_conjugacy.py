import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import ExtentError, HypothesisFailure, ParameterValidationError
from app.models.table_model import GridSpec
from app.schemas.run_config import NumericsConfig
from app.services.conjugacy_service import conjugacy_service
from app.services.green_service import green_service
from app.services.system_service import system_service
from app.utils.table_io import read_table_csv, read_table_npz, write_table_csv, write_table_npz


def test_picard_contracts_at_rate_q(scalar_pair, numerics):
    info = scalar_pair.h_table.info
    history = info.residual_history
    q, N = info.q_value, info.N_value
    assert q == pytest.approx(0.1, abs=1e-6)
    for before, after in zip(history, history[1:]):
        if before > 1e-12:
            assert after / before <= q + 0.05
    limit = math.ceil(math.log(numerics.tol * (1 - q) / N) / math.log(q)) + 3
    assert info.iterations <= limit
    assert info.final_delta <= numerics.tol * (1 - q)


def test_tables_respect_sup_bound(scalar_pair, numerics):
    N = scalar_pair.h_table.info.N_value
    assert scalar_pair.h_table.sup_norm() <= N + numerics.tol
    assert scalar_pair.hbar_table.sup_norm() <= N + numerics.tol


def test_hbar_has_opposite_sign_to_h_at_small_eps(scalar_pair):
    h, _ = scalar_pair.h_table.evaluate(0.0, np.array([1.0]), np.array([0.0]))
    hb, _ = scalar_pair.hbar_table.evaluate(0.0, np.array([1.0]), np.array([0.0]))
    assert h[0] > 0 > hb[0]


def test_inverse_identity_within_budget(scalar_pair, tmp_path):
    path = tmp_path / "inverse.csv"
    report = conjugacy_service.verify_inverse(scalar_pair, samples=500, rng_seed=3, csv_path=path)
    assert report.samples == 500
    assert report.max_defect <= report.budget
    assert set(report.directions) == {"H_after_Hbar", "Hbar_after_H"}
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "y1", "defect_H_after_Hbar", "defect_Hbar_after_H", "clamped"]
    assert len(rows) == 501


def test_eval_conjugacy_composition_is_identity(scalar_pair):
    x, y = np.array([0.5]), np.array([0.2])
    xb, yb = conjugacy_service.eval_conjugacy(scalar_pair, 0.0, x, y, direction="inverse")
    xx, yy = conjugacy_service.eval_conjugacy(scalar_pair, 0.0, xb, yb, direction="forward")
    budget = scalar_pair.h_table.info.error_budget + 2 * scalar_pair.hbar_table.info.error_budget
    assert np.abs(xx - x).max() <= budget
    assert_allclose(yy, y)
    with pytest.raises(ParameterValidationError):
        conjugacy_service.eval_conjugacy(scalar_pair, 0.0, x, y, direction="sideways")


def test_solution_mapping_within_budget(scalar_tanh, scalar_pair, numerics):
    report = conjugacy_service.verify_mapping(scalar_tanh, scalar_pair, samples=40, horizon=2.0, rng_seed=5,
                                              numerics=numerics)
    assert report.directions["H"] <= report.directions["H_budget"]
    assert report.directions["Hbar"] <= report.directions["Hbar_budget"]
    assert report.directions["ode"] > 0.0


def test_contraction_failure_stops_solver(numerics, grid):
    sys = system_service.build_system("scalar_tanh", {"eps": 1.5})
    gk = green_service.build_kernel(sys, numerics=numerics)
    with pytest.raises(HypothesisFailure):
        conjugacy_service.solve_pair(sys, gk, grid, numerics)


def test_continuous_solver_rejects_discrete_system(discrete_tanh, discrete_kernel, grid, numerics):
    with pytest.raises(ParameterValidationError):
        conjugacy_service.solve_h(discrete_tanh, discrete_kernel, grid, numerics)


def test_coupled_saddle_pair(numerics):
    sys = system_service.build_system("saddle_tanh", {"eps": 0.1, "coupling": 0.5, "drift": 0.5})
    gk = green_service.build_kernel(sys, numerics=numerics)
    grid = GridSpec(tau_min=-1, tau_max=1, n_tau=2, n_x=21, n_y=5, box_x=2.0, box_y=2.0)
    pair = conjugacy_service.solve_pair(sys, gk, grid, numerics)
    assert pair.h_table.sup_norm() <= pair.h_table.info.N_value + numerics.tol
    report = conjugacy_service.verify_inverse(pair, samples=200, rng_seed=1)
    assert report.max_defect <= report.budget


def test_table_files_preserve_values(scalar_pair, tmp_path):
    table = scalar_pair.h_table
    from_csv = read_table_csv(write_table_csv(table, tmp_path / "h_table.csv"))
    from_npz = read_table_npz(write_table_npz(table, tmp_path / "h_table.npz"))
    for loaded in (from_csv, from_npz):
        assert_allclose(loaded.values, table.values, rtol=0, atol=0)
        assert loaded.info.error_budget == table.info.error_budget
    with (tmp_path / "h_table.csv").open() as fh:
        fh.readline()
        assert fh.readline().strip() == "t,x1,y1,h1"


def test_periodic_system_table_repeats(numerics):
    sys = system_service.build_system("periodic_tanh", {"eps": 0.1})
    gk = green_service.build_kernel(sys, numerics=numerics)
    grid = GridSpec(tau_min=0.0, tau_max=2 * math.pi, n_tau=3, n_x=21, n_y=3, box_x=3.0, box_y=1.0)
    pair = conjugacy_service.solve_pair(sys, gk, grid, numerics)
    assert pair.h_table.tau_policy == "wrap"
    assert conjugacy_service.periodicity_defect(pair, 2 * math.pi) <= 1e-3


def test_autonomous_table_is_time_invariant(scalar_pair):
    assert conjugacy_service.periodicity_defect(scalar_pair, 1.0) <= 1e-3
    with pytest.raises(ExtentError):
        conjugacy_service.periodicity_defect(scalar_pair, 3.0)


def test_discrete_pair_bounds(discrete_pair, numerics):
    h, hbar = discrete_pair.h_table, discrete_pair.hbar_table
    assert h.discrete and hbar.discrete
    assert_allclose(h.tau_axis, [-2, -1, 0, 1, 2])
    assert h.sup_norm() <= h.info.N_value + numerics.tol
    assert hbar.sup_norm() <= h.info.N_value + numerics.tol
    report = conjugacy_service.verify_inverse(discrete_pair, samples=200, rng_seed=2)
    assert report.max_defect <= report.budget


def test_discrete_mapping_has_no_integration_error(discrete_tanh, discrete_pair, numerics):
    report = conjugacy_service.verify_mapping(discrete_tanh, discrete_pair, samples=30, horizon=2, rng_seed=4,
                                              numerics=numerics)
    assert report.directions["ode"] == 0.0
    assert report.max_defect <= report.budget


def test_discrete_solver_agrees_with_oracle(discrete_tanh, discrete_kernel, discrete_pair, discrete_grid, numerics):
    report = green_service.hypothesis_N_q(discrete_tanh, discrete_kernel, numerics)
    table = discrete_pair.h_table
    rng = np.random.default_rng(11)
    nodes = discrete_grid.tau_nodes(discrete=True).astype(int)
    excesses = []
    for _ in range(50):
        n = int(rng.choice(nodes))
        xi = rng.uniform(-discrete_grid.box_x, discrete_grid.box_x, size=1)
        eta = rng.uniform(-discrete_grid.box_y, discrete_grid.box_y, size=1)
        value, radius = conjugacy_service.brute_force_h_discrete(discrete_tanh, discrete_kernel, (n, xi, eta), K=8,
                                                                  numerics=numerics, report=report)
        solved, clamped = table.evaluate(float(n), xi, eta)
        assert not clamped.any()
        assert radius < 1e-4
        excesses.append(np.linalg.norm(solved - value) - (radius + table.info.error_budget))
    assert max(excesses) <= 0.0


def test_oracle_depth_is_validated(discrete_tanh, discrete_kernel, numerics):
    with pytest.raises(ParameterValidationError):
        conjugacy_service.brute_force_h_discrete(discrete_tanh, discrete_kernel, (0, [0.0], [0.0]), K=0,
                                                 numerics=numerics)


def test_composed_budgets_at_default_numerics(scalar_tanh):
    numerics = NumericsConfig()
    # h(τ,·) solo es log-Lipschitz en ξ = 0: la malla en x debe ser fina
    fine = GridSpec(tau_min=-1.0, tau_max=1.0, n_tau=2, n_x=3201, n_y=2, box_x=1.0, box_y=1.0)
    gk = green_service.build_kernel(scalar_tanh, numerics=numerics)
    pair = conjugacy_service.solve_pair(scalar_tanh, gk, fine, numerics)
    inverse = conjugacy_service.verify_inverse(pair, samples=500, rng_seed=5)
    assert inverse.max_defect <= inverse.budget <= 1e-3
    mapping = conjugacy_service.verify_mapping(scalar_tanh, pair, samples=100, horizon=2.0, rng_seed=6,
                                               numerics=numerics)
    assert mapping.max_defect <= mapping.budget <= 1e-3
    assert mapping.directions["ode"] > 0.0
