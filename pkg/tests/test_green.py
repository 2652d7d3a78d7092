import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from app.core.exceptions import DivergenceError, ParameterValidationError
from app.models.envelope_model import EnvelopeKind, ScalarEnvelope
from app.models.kernel_model import DecayEnvelope, DecayKind, DichotomyData, KernelSpec
from app.services.green_service import green_service
from app.services.system_service import system_service

UNIT_DICHOTOMY = DichotomyData(D1=1, D2=1, lambda1=1, lambda2=1, K1=1, K2=1, a1=1, a2=1)


def test_scalar_hypothesis_matches_closed_form(scalar_tanh, scalar_kernel, numerics):
    report = green_service.hypothesis_N_q(scalar_tanh, scalar_kernel, numerics)
    assert report.N_certified == pytest.approx(0.1, abs=1e-6)
    assert report.q_certified == pytest.approx(0.1, abs=1e-6)
    assert report.margins["bound"].passed
    assert report.certified
    assert report.tail_bound <= numerics.check_tol


@settings(max_examples=8, deadline=None)
@given(eps=st.floats(min_value=0.01, max_value=0.9))
def test_q_scales_with_eps(eps, numerics):
    sys = system_service.build_system("scalar_tanh", {"eps": eps})
    report = green_service.hypothesis_N_q(sys, green_service.build_kernel(sys, numerics=numerics), numerics)
    assert report.q_certified == pytest.approx(eps, abs=1e-5)


def test_projection_dimension_is_checked(scalar_tanh):
    with pytest.raises(ParameterValidationError, match="dimensión"):
        green_service.build_kernel(scalar_tanh, KernelSpec(projection=[1.0, 0.0]))


def test_non_binary_projection_is_rejected(scalar_tanh):
    with pytest.raises(ParameterValidationError):
        green_service.build_kernel(scalar_tanh, KernelSpec(projection=[0.5]))


def test_saddle_kernel_branches(numerics):
    sys = system_service.build_system("saddle_tanh")
    gk = green_service.build_kernel(sys, numerics=numerics)
    assert_allclose(green_service.green_eval(gk, 1.0, 0.0), np.diag([math.exp(-1.0), 0.0]), atol=1e-8)
    assert_allclose(green_service.green_eval(gk, 0.0, 1.0), np.diag([0.0, -math.exp(-1.0)]), atol=1e-8)
    assert green_service.kernel_envelope_ratio(gk, np.linspace(-3, 3, 13), np.linspace(3, -3, 13)) <= 1.0 + 1e-6


def test_exponential_tails():
    env = DecayEnvelope(kind=DecayKind.EXPONENTIAL, d_forward=1.0, rate_forward=1.0)
    assert green_service.tail_bound(env, 0.1, 5.0) == pytest.approx(0.1 * math.exp(-5.0))
    r = math.exp(-1.0)
    assert green_service.tail_bound(env, 0.1, 5.0, discrete=True) == pytest.approx(0.1 * r ** 5 / (1 - r))
    assert green_service.tail_bound(env, 0.0, 5.0) == 0.0


def test_polynomial_envelope_needs_decaying_weight():
    env = DecayEnvelope(kind=DecayKind.POLYNOMIAL)
    with pytest.raises(DivergenceError):
        green_service.tail_bound(env, 0.1, 5.0)
    profile = ScalarEnvelope(kind=EnvelopeKind.RATIONAL_DECAY, value=0.1)
    with pytest.raises(DivergenceError):
        env.tail(profile, 5.0, growth=(0.5, 0.5))
    assert 0.0 < green_service.tail_bound(env, profile, 5.0) < 0.1


def test_growth_beyond_rate_diverges():
    env = DecayEnvelope(kind=DecayKind.EXPONENTIAL, d_forward=1.0, rate_forward=1.0)
    with pytest.raises(DivergenceError):
        env.tail(1.0, 5.0, growth=(1.5, 0.0))


def test_epcon_pattern_is_exact():
    passing = green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, M=1.0, eps=0.4, alpha=0.5, C=1.0)
    failing = green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, M=1.0, eps=0.6, alpha=0.5, C=1.0)
    assert passing.margins["epcon"].lhs == 0.8
    assert passing.margins["epcon"].passed
    assert failing.margins["epcon"].lhs == 1.2
    assert not failing.margins["epcon"].passed


def test_corollary_adds_drift_conditions_with_m2():
    report = green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, M=1.0, eps=0.01, alpha=0.3, C=1.0, M2=0.5)
    assert {"epcon", "epcon1", "epcon4", "cor2cond1", "cor2condition3"} <= set(report.margins)
    assert report.alpha_bounds["cor2cond1"] == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(min_value=1e-4, max_value=0.5), bump=st.floats(min_value=1e-3, max_value=0.5),
       alpha=st.floats(min_value=0.05, max_value=0.45))
def test_corollary_margins_shrink_with_eps(eps, bump, alpha):
    small = green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, M=1.0, eps=eps, alpha=alpha, C=1.0)
    large = green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, M=1.0, eps=eps + bump, alpha=alpha, C=1.0)
    for tag in ("epcon", "epcon1", "epcon4"):
        if large.margins[tag].admissible:
            assert large.margins[tag].lhs >= small.margins[tag].lhs


@settings(max_examples=50, deadline=None)
@given(L=st.floats(min_value=0.0, max_value=30.0), extra=st.floats(min_value=0.0, max_value=10.0),
       weight=st.floats(min_value=0.0, max_value=2.0))
def test_tail_bound_decreases_with_radius(L, extra, weight):
    env = DecayEnvelope(kind=DecayKind.EXPONENTIAL, d_forward=1.5, rate_forward=0.7, d_backward=2.0,
                        rate_backward=1.3)
    near = green_service.tail_bound(env, weight, L)
    far = green_service.tail_bound(env, weight, L + extra)
    assert 0.0 <= far <= near


def test_inadmissible_alpha_is_flagged():
    dd = DichotomyData(D1=1, D2=1, lambda1=1, lambda2=1, K1=1, K2=1, a1=2, a2=2)
    report = green_service.dichotomy_corollary_check(dd, M=1.0, eps=0.1, alpha=0.6, C=1.0)
    assert report.alpha_bounds["epcon1"] == pytest.approx(0.5)
    assert not report.margins["epcon1"].admissible
    assert not report.margins["epcon1"].passed


@pytest.mark.parametrize("kwargs", [
    {"M": 1.0, "eps": 0.1, "alpha": 1.0, "C": 1.0},
    {"M": 1.0, "eps": 0.0, "alpha": 0.5, "C": 1.0},
    {"M": 1.0, "eps": 0.1, "alpha": 0.5, "C": -1.0},
])
def test_corollary_rejects_invalid_constants(kwargs):
    with pytest.raises(ParameterValidationError):
        green_service.dichotomy_corollary_check(UNIT_DICHOTOMY, **kwargs)


def test_c1_closed_form_margin(numerics):
    sys = system_service.build_system("scalar_tanh", {"eps": 0.01})
    gk = green_service.build_kernel(sys, numerics=numerics)
    margin = green_service.holder_x_condition(sys, gk, C=1.0, alpha=0.5, numerics=numerics)
    assert margin.method == "closed_form"
    assert margin.margin == pytest.approx(0.2, abs=1e-12)


def test_c1_quadrature_agrees_with_closed_form(numerics):
    sys = system_service.build_system("scalar_tanh", {"eps": 0.01})
    gk = green_service.build_kernel(sys, numerics=numerics)
    margin = green_service.holder_x_condition(sys, gk, C=1.0, alpha=0.5, numerics=numerics, method="quadrature")
    assert margin.method == "quadrature"
    assert margin.lhs == pytest.approx(0.8, abs=1e-5)


def test_holder_condition_validation(scalar_tanh, scalar_kernel):
    with pytest.raises(ParameterValidationError):
        green_service.holder_x_condition(scalar_tanh, scalar_kernel, C=1.0, alpha=1.2)
    with pytest.raises(ParameterValidationError):
        green_service.holder_x_condition(scalar_tanh, scalar_kernel, C=1.0, alpha=0.5, delta="sigma")
    with pytest.raises(ParameterValidationError):
        green_service.holder_y_condition(scalar_tanh, scalar_kernel, C=1.0, alpha=0.5, delta="delta1")


def test_zero_nonlinearity_passes_trivially(numerics):
    sys = system_service.build_system("zero_f")
    gk = green_service.build_kernel(sys, numerics=numerics)
    margin = green_service.holder_y_condition(sys, gk, C=0.5, alpha=0.5, numerics=numerics)
    assert margin.passed and margin.lhs == 0.0


def test_discrete_hypothesis_sums(discrete_tanh, discrete_kernel, numerics):
    report = green_service.hypothesis_N_q(discrete_tanh, discrete_kernel, numerics)
    assert report.N_certified == pytest.approx(0.2, abs=1e-6)
    assert report.q_certified == pytest.approx(0.2, abs=1e-6)
    assert report.margins["boundd"].passed
    assert report.quadrature_error is None


def test_coppel_conditions_pass_for_small_eps():
    margins = green_service.coppel_conditions(eps=0.001, c=1.0, M=1.0, alpha=0.5, C=1.0)
    assert margins["coppel_bound"].lhs == pytest.approx(0.004)
    assert all(m.passed for m in margins.values())


def test_coppel_c2_alpha_bound():
    margins = green_service.coppel_conditions(eps=0.5, c=1.0, M=1.0, alpha=0.9, C=1.0)
    assert not margins["coppel_c2"].admissible


def test_polynomial_admissibility_on_rational_profiles():
    sys = system_service.build_system("rotation_decay_3d")
    margin = green_service.polynomial_admissibility(sys)
    assert margin.passed
    assert margin.lhs == pytest.approx(0.2)


def test_trichotomy_projection_is_spliced_at_zero(numerics):
    sys = system_service.build_system("trichotomy_block")
    td = sys.default_kernel.trichotomy
    assert_allclose(green_service.trichotomy_green(td, 1.0, -1.0, sys, numerics), np.diag([0.0, math.exp(-2.0)]),
                    atol=1e-7)
    assert_allclose(green_service.trichotomy_green(td, -1.0, 1.0, sys, numerics), np.zeros((2, 2)), atol=1e-12)
    assert_allclose(green_service.trichotomy_green(td, -2.0, -1.0, sys, numerics),
                    np.diag([-math.cosh(1.0) / math.cosh(2.0), 0.0]), atol=1e-7)
