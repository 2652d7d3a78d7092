import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import CatalogError
from app.services.example_service import example_service


@pytest.mark.parametrize("name", example_service.names())
def test_example_reproduces_expected_pattern(name, wide_numerics):
    pkg = example_service.load_example(name, wide_numerics)
    report = example_service.run_expected_checks(pkg, wide_numerics)
    mismatched = [(c.tag, c.overrides, c.observed) for c in report.checks if c.observed != c.expected]
    assert report.all_matched, mismatched


def test_saddle_example_records_epcon_values(wide_numerics):
    pkg = example_service.load_example("E3", wide_numerics)
    report = example_service.run_expected_checks(pkg, wide_numerics)
    assert report.recorded["epcon_eps=0.4_lhs"] == 0.8
    assert report.recorded["epcon_eps=0.6_lhs"] == 1.2
    assert report.recorded["q"] < 1.0


def test_rotation_block_is_an_isometry(wide_numerics):
    pkg = example_service.load_example("E1_rotation_decay", wide_numerics)
    T = pkg.kernel.family.evolve_many(2.0, 0.5)
    assert_allclose(T[:2, :2] @ T[:2, :2].T, np.eye(2), atol=1e-8)
    assert T[2, 2] == pytest.approx(1.25 / 5.0, rel=1e-8)


def test_discrete_rotation_block_is_an_isometry(wide_numerics):
    pkg = example_service.load_example("E2", wide_numerics)
    A = pkg.kernel.family.evaluate(5, 1)
    assert_allclose(A[:2, :2] @ A[:2, :2].T, np.eye(2), atol=1e-12)
    assert A[2, 2] == pytest.approx(2.0 / 26.0)


def test_unknown_example():
    with pytest.raises(CatalogError, match="no encontrado"):
        example_service.load_example("E9")


def test_examples_are_listed():
    assert example_service.names() == [
        "E1_rotation_decay", "E2_discrete_rotation_decay", "E3_saddle_dichotomy", "E4_trichotomy", "E5_coppel",
    ]
