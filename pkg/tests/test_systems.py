import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from app.core.exceptions import CatalogError, ParameterValidationError
from app.crud.catalog_families import coppel_phi
from app.crud.crud_catalog import catalog_crud
from app.models.envelope_model import EnvelopeKind, ScalarEnvelope, constant
from app.models.system_model import CoupledSystem
from app.models.table_model import GridSpec
from app.services.system_service import system_service


def test_catalog_lists_every_family():
    assert {"scalar_tanh", "zero_f", "saddle_tanh", "rotation_decay_3d", "periodic_tanh", "coppel_scalar",
            "trichotomy_block", "discrete_scalar_tanh", "discrete_rotation_decay_3d",
            "discrete_zero_f"} <= set(catalog_crud.names())


def test_build_system_uses_defaults():
    sys = system_service.build_system("scalar_tanh")
    assert sys.params == {"eps": 0.1, "a": 1.0, "drift": 0.0, "coupling": 0.0}
    assert sys.autonomous
    assert_allclose(sys.linear_part(np.zeros(2)), -np.ones((2, 1, 1)))


def test_unknown_family():
    with pytest.raises(CatalogError, match="no encontrada"):
        system_service.build_system("no_such_family")


def test_parameter_out_of_range():
    with pytest.raises(ParameterValidationError, match="fuera del rango"):
        system_service.build_system("scalar_tanh", {"eps": 7.0})


def test_unknown_parameter():
    with pytest.raises(ParameterValidationError, match="desconocidos"):
        system_service.build_system("scalar_tanh", {"sigma": 1.0})


def test_integer_parameter():
    with pytest.raises(ParameterValidationError, match="entero"):
        system_service.build_system("zero_f", {"dim": 1.5})
    assert system_service.build_system("zero_f", {"dim": 3}).dim_x == 3


def test_envelope_bounds_are_validated():
    with pytest.raises(ValueError):
        CoupledSystem(
            name="bad", dim_x=1, dim_y=0,
            linear_part=lambda t: -np.ones(np.shape(t) + (1, 1)),
            nonlinearity=lambda t, x, y: 2.0 * np.tanh(x),
            drift=lambda t, y: y,
            mu_envelope=constant(2.0), gamma_envelope=constant(2.0), eps_envelope=constant(2.0),
        )


@pytest.mark.parametrize("name,params", [
    ("scalar_tanh", {"eps": 0.3, "coupling": 1.0, "drift": 0.5}),
    ("saddle_tanh", {"eps": 0.2, "coupling": 1.0}),
    ("rotation_decay_3d", {}),
    ("periodic_tanh", {"eps": 0.2}),
    ("trichotomy_block", {}),
    ("discrete_scalar_tanh", {}),
])
def test_declared_envelopes_hold(name, params):
    sys = system_service.build_system(name, params)
    report = system_service.envelope_check(sys, budget=500, rng_seed=1, time_halfwidth=10.0)
    assert report.total_violations == 0
    assert report.ratio("mu").max_ratio <= 1.0 + 1e-9


def test_periodic_family_reports_no_gap():
    sys = system_service.build_system("periodic_tanh", {"omega": 2.0})
    assert sys.period == pytest.approx(np.pi)
    report = system_service.envelope_check(sys, budget=100)
    assert report.periodicity_gap <= 1e-12
    assert report.periodicity_violations == 0


def test_period_mismatch_in_nonlinearity_is_flagged():
    sys = system_service.build_system("periodic_tanh", {"eps": 0.1})
    f = sys.nonlinearity
    damped = sys.model_copy(update={
        "nonlinearity": lambda t, x, y: np.where(np.asarray(t) >= 0, 0.5, 1.0)[..., None] * f(t, x, y),
    })
    report = system_service.envelope_check(damped, budget=500, rng_seed=2)
    assert report.periodicity_gap > 0.0
    assert report.periodicity_violations > 0
    assert report.total_violations >= report.periodicity_violations


def test_period_mismatch_in_drift_is_flagged():
    sys = system_service.build_system("periodic_tanh", {"eps": 0.1})
    drifting = sys.model_copy(update={"drift": lambda t, y: -np.asarray(t, dtype=float)[..., None] * y})
    report = system_service.envelope_check(drifting, budget=200, rng_seed=3)
    assert report.periodicity_gap > 0.0
    assert report.periodicity_violations > 0


def test_misdeclared_mu_is_flagged():
    sys = system_service.build_system("scalar_tanh", {"eps": 0.1})
    wrong = sys.model_copy(update={"mu_envelope": constant(0.05)})
    report = system_service.envelope_check(wrong, budget=500, rng_seed=1)
    assert report.ratio("mu").violations >= 1
    assert report.ratio("mu").max_ratio > 1.0
    assert report.total_violations >= 1


def test_envelope_check_samples_the_grid_box():
    sys = system_service.build_system("scalar_tanh", {"eps": 0.1})
    # |0.02 x| <= 0.1 solo en |x| <= 5
    linear = sys.model_copy(update={"nonlinearity": lambda t, x, y: 0.02 * x})
    inside = system_service.envelope_check(linear, budget=300, rng_seed=4, grid=GridSpec(box_x=5.0, box_y=5.0))
    wide = system_service.envelope_check(linear, budget=300, rng_seed=4, grid=GridSpec(box_x=10.0, box_y=5.0))
    assert inside.ratio("mu").violations == 0
    assert wide.ratio("mu").violations > 0


def test_coppel_phi_shape():
    t = np.linspace(-3.0, 20.0, 200)
    phi = coppel_phi(t, 1.0)
    assert np.all(phi[t <= 0] == 1.0)
    assert np.all((phi > 0) & (phi <= 1.0))


def test_coppel_linear_part_is_log_derivative():
    sys = system_service.build_system("coppel_scalar", {"c": 2.0})
    t = np.linspace(0.1, 8.0, 50)
    h = 1e-5
    log_derivative = (np.log(coppel_phi(t + h, 2.0)) - np.log(coppel_phi(t - h, 2.0))) / (2 * h)
    assert_allclose(sys.linear_part(t)[:, 0, 0], log_derivative - 1.0, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(list(EnvelopeKind)),
    value=st.floats(min_value=0.0, max_value=10.0),
    t=st.floats(min_value=-1e3, max_value=1e3),
)
def test_scalar_envelope_between_zero_and_sup(kind, value, t):
    env = ScalarEnvelope(kind=kind, value=value)
    w = float(env(t))
    assert 0.0 <= w <= env.sup() * (1 + 1e-12)


def test_rational_profile_moment_is_closed_form():
    env = ScalarEnvelope(kind=EnvelopeKind.RATIONAL_DECAY, value=0.2 / np.pi)
    assert env.polynomial_moment() == pytest.approx(0.2)
    assert env.polynomial_tail(0.0, 0.0) == pytest.approx(0.2)
    assert env.polynomial_tail(0.0, 1e6) == pytest.approx(0.0, abs=1e-6)
