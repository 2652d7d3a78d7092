from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict, Field

from app.models.system_model import CoupledSystem


class ExpectedCheck(BaseModel):
    """
    Resultado esperado de una condición.

    :ivar tag: Etiqueta de la condición.
    :ivar expected: ``True`` si la condición debe cumplirse.
    :ivar overrides: Constantes sustituidas antes de evaluar (por ejemplo ``eps``).
    """
    tag: str
    expected: bool
    overrides: Dict[str, float] = Field(default_factory=dict)

    model_config = {
        "json_schema_extra": {"example": {"tag": "epcon", "expected": True, "overrides": {"eps": 0.4}}}
    }


class ExamplePackage(BaseModel):
    """
    Sistema, núcleo y patrón de condiciones de un ejemplo empaquetado.

    :ivar name: Nombre del ejemplo.
    :ivar system: Sistema acoplado.
    :ivar kernel: Núcleo de Green construido.
    :ivar expected_checks: Patrón de condiciones que debe reproducirse.
    :ivar notes: Descripción del ejemplo.
    :ivar alpha: Exponente usado por las condiciones de Hölder del ejemplo.
    :ivar C: Constante usada por las condiciones de Hölder del ejemplo.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    system: CoupledSystem
    kernel: Any
    expected_checks: List[ExpectedCheck]
    notes: str = ""
    alpha: float = 0.5
    C: float = 1.0
