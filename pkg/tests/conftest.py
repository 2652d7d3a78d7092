import json

import pytest

from app.models.table_model import GridSpec
from app.schemas.run_config import NumericsConfig
from app.services.conjugacy_service import conjugacy_service
from app.services.green_service import green_service
from app.services.system_service import system_service

FAST_NUMERICS = {"h_ode": 1e-2, "t_max": 20.0, "check_tol": 1e-6, "quad_stride": 5, "sup_grid_points": 9}
SMALL_GRID = {"tau_min": -1.0, "tau_max": 1.0, "n_tau": 3, "n_x": 41, "n_y": 5, "box_x": 3.0, "box_y": 3.0}


@pytest.fixture(scope="session")
def numerics():
    return NumericsConfig(**FAST_NUMERICS)


@pytest.fixture(scope="session")
def wide_numerics():
    return NumericsConfig(**{**FAST_NUMERICS, "t_max": 40.0})


@pytest.fixture(scope="session")
def grid():
    return GridSpec(**SMALL_GRID)


@pytest.fixture(scope="session")
def discrete_grid():
    return GridSpec(**{**SMALL_GRID, "tau_min": -2.0, "tau_max": 2.0})


@pytest.fixture(scope="session")
def scalar_tanh():
    return system_service.build_system("scalar_tanh", {"eps": 0.1})


@pytest.fixture(scope="session")
def scalar_kernel(scalar_tanh, numerics):
    return green_service.build_kernel(scalar_tanh, numerics=numerics)


@pytest.fixture(scope="session")
def scalar_pair(scalar_tanh, scalar_kernel, numerics, grid):
    return conjugacy_service.solve_pair(scalar_tanh, scalar_kernel, grid, numerics)


@pytest.fixture(scope="session")
def discrete_tanh():
    return system_service.build_system("discrete_scalar_tanh", {"eps": 0.1})


@pytest.fixture(scope="session")
def discrete_kernel(discrete_tanh, numerics):
    return green_service.build_kernel(discrete_tanh, numerics=numerics)


@pytest.fixture(scope="session")
def discrete_pair(discrete_tanh, discrete_kernel, numerics, discrete_grid):
    return conjugacy_service.solve_pair(discrete_tanh, discrete_kernel, discrete_grid, numerics)


@pytest.fixture
def write_config(tmp_path):
    """Escribe un RunConfig JSON con numérica rápida y devuelve su ruta."""

    def _write(system, **extra):
        data = {"system": system, "numerics": FAST_NUMERICS, "grid": SMALL_GRID,
                "output_dir": str(tmp_path / "out")}
        data.update(extra)
        path = tmp_path / "run.json"
        path.write_text(json.dumps(data))
        return path

    return _write
