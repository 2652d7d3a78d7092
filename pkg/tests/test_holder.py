import csv
import math

import pytest

from app.core.exceptions import MissingConstantsError, ParameterValidationError, WindowError
from app.models.table_model import GridSpec
from app.services.conjugacy_service import conjugacy_service
from app.services.green_service import green_service
from app.services.holder_service import DeltaKind, EnvelopeConstants, holder_service
from app.services.system_service import system_service

CONSTANTS = EnvelopeConstants(K1=1.0, K2=1.0, a1=1.0, a2=2.0, eps=0.1, M2=0.5)


@pytest.fixture(scope="module")
def smooth_pair(numerics, grid):
    sys = system_service.build_system("scalar_tanh", {"eps": 0.01})
    gk = green_service.build_kernel(sys, numerics=numerics)
    return conjugacy_service.solve_pair(sys, gk, grid, numerics)


@pytest.fixture(scope="module")
def zero_pair(numerics, grid):
    sys = system_service.build_system("zero_f")
    gk = green_service.build_kernel(sys, numerics=numerics)
    return conjugacy_service.solve_pair(sys, gk, grid, numerics)


def test_delta_envelopes_closed_form():
    delta1 = holder_service.delta_bounds(CONSTANTS, "delta1")
    assert float(delta1(2.0, 0.0)) == pytest.approx(math.exp(2.0))
    assert float(delta1(0.0, 2.0)) == pytest.approx(math.exp(4.0))
    delta2 = holder_service.delta_bounds(CONSTANTS, DeltaKind.DELTA2)
    assert float(delta2(1.0, 0.0)) == pytest.approx(math.exp(1.1))
    delta3 = holder_service.delta_bounds(CONSTANTS, "delta3")
    assert float(delta3(0.7, 0.7)) == 2.0
    assert float(delta3(1.0, 0.0)) == pytest.approx(2.0 * math.exp(2.1))
    sigma = holder_service.delta_bounds(CONSTANTS, "sigma")
    assert float(sigma(0.0, 1.0)) == pytest.approx(math.exp(0.5))


def test_drift_envelopes_need_m2():
    constants = CONSTANTS.model_copy(update={"M2": None})
    with pytest.raises(MissingConstantsError):
        holder_service.delta_bounds(constants, "delta3")
    with pytest.raises(MissingConstantsError):
        holder_service.delta_bounds(constants, "sigma")
    assert holder_service.delta_bounds(constants, "delta1").k_ahead == 1.0


def test_unknown_delta_kind():
    with pytest.raises(ValueError):
        holder_service.delta_bounds(CONSTANTS, "delta9")


@pytest.mark.parametrize("kind", ["delta1", "delta2", "delta3", "sigma"])
def test_trajectory_pairs_stay_inside_envelopes(kind, numerics):
    sys = system_service.build_system("scalar_tanh", {"eps": 0.3, "coupling": 1.0, "drift": 0.5})
    report = holder_service.envelope_empirical_check(sys, kind, pairs=200, horizon=3.0, rng_seed=7,
                                                     numerics=numerics)
    assert report.pairs == 200
    assert report.max_ratio <= 1.0 + 1e-3
    assert report.slack < 1e-6


def test_discrete_trajectory_pairs(discrete_tanh, numerics):
    report = holder_service.envelope_empirical_check(discrete_tanh, "delta2", pairs=50, horizon=3, rng_seed=1,
                                                     numerics=numerics)
    assert report.max_ratio <= 1.0
    assert report.slack == 0.0


def test_trajectory_pairs_use_the_grid_box(numerics):
    sys = system_service.build_system("scalar_tanh", {"eps": 0.3, "coupling": 1.0, "drift": 0.5})
    wide = GridSpec(box_x=8.0, box_y=8.0)
    report = holder_service.envelope_empirical_check(sys, "delta2", pairs=200, horizon=3.0, rng_seed=7,
                                                     numerics=numerics, grid=wide)
    default = holder_service.envelope_empirical_check(sys, "delta2", pairs=200, horizon=3.0, rng_seed=7,
                                                      numerics=numerics)
    assert report.max_ratio <= 1.0 + 1e-3
    assert report.max_ratio != default.max_ratio


def test_horizon_must_fit_window(scalar_tanh, numerics):
    with pytest.raises(WindowError):
        holder_service.envelope_empirical_check(scalar_tanh, "delta1", pairs=5, horizon=100.0, numerics=numerics)


@pytest.mark.parametrize("axis", ["x", "y", "xy"])
@pytest.mark.parametrize("table_kind", ["h", "hbar"])
def test_holder_estimate_has_no_violations(smooth_pair, axis, table_kind):
    report = holder_service.empirical_holder(smooth_pair, axis, table_kind, C=1.0, alpha=0.5, samples=1000,
                                             rng_seed=11)
    assert report.violations == 0
    assert report.max_ratio < 1.0
    assert report.c_prime > report.C


def test_zero_table_gives_degenerate_fit(zero_pair):
    report = holder_service.empirical_holder(zero_pair, "x", "h", C=1.0, alpha=0.5, samples=50)
    assert report.fit_degenerate
    assert report.fitted_exponent is None
    assert report.violations == 0


def test_holder_arguments_are_validated(smooth_pair):
    with pytest.raises(ParameterValidationError):
        holder_service.empirical_holder(smooth_pair, "z", "h", C=1.0, alpha=0.5, samples=10)
    with pytest.raises(ParameterValidationError):
        holder_service.empirical_holder(smooth_pair, "x", "g", C=1.0, alpha=0.5, samples=10)
    with pytest.raises(ParameterValidationError):
        holder_service.empirical_holder(smooth_pair, "x", "h", C=1.0, alpha=1.0, samples=10)


def test_holder_pairs_csv(smooth_pair, tmp_path):
    path = tmp_path / "holder_pairs.csv"
    holder_service.empirical_holder(smooth_pair, "x", "h", C=1.0, alpha=0.5, samples=20, csv_path=path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["delta_norm", "h_gap_norm", "ratio", "clamped_flag"]
    assert len(rows) == 21
