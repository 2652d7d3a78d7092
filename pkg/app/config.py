from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Integración y ventana temporal
    H_ODE: float = 1e-3
    T_MAX: float = 40.0

    # Tolerancias
    TOL: float = 1e-5
    CHECK_TOL: float = 1e-8
    ENVELOPE_REL_TOL: float = 1e-9
    PICARD_TOL: float = 1e-14
    PICARD_MAX_ITER: int = 200
    PICARD_DAMPING: float = 1.0

    # Cuadratura y barridos de Picard
    QUAD_STRIDE: int = 50
    MAX_SWEEPS: int = 60
    SUP_GRID_POINTS: int = 41

    # Caja de trabajo y malla de las tablas
    BOX_X: float = 5.0
    BOX_Y: float = 5.0
    GRID_N_TAU: int = 3
    GRID_N_X: int = 161
    GRID_N_Y: int = 5
    TAU_HALFWIDTH: float = 1.0

    SEED: int = 0
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"
        env_prefix = "LINCONJ_"


settings = Settings()
