import logging
from typing import Dict, List

from app.core.exceptions import CatalogError
from app.crud.catalog_families import CATALOG_ENTRIES
from app.models.system_model import CatalogEntry

logger = logging.getLogger(__name__)


class CRUDCatalog:
    """Registro en memoria de las familias del catálogo."""

    def __init__(self, entries: List[CatalogEntry]):
        self._entries: Dict[str, CatalogEntry] = {}
        for entry in entries:
            self.register(entry)

    def register(self, entry: CatalogEntry) -> CatalogEntry:
        """Registra una familia; el nombre debe ser único."""
        if entry.name in self._entries:
            raise ValueError(f"Ya existe una familia de catálogo llamada '{entry.name}'")
        self._entries[entry.name] = entry
        return entry

    def get(self, name: str) -> CatalogEntry:
        """Obtiene una familia por nombre."""
        entry = self._entries.get(name)
        if entry is None:
            logger.warning(f"Familia de catálogo desconocida: {name}")
            raise CatalogError(f"Familia de catálogo no encontrada: '{name}'. Disponibles: {', '.join(self.names())}")
        return entry

    def names(self) -> List[str]:
        return sorted(self._entries)


catalog_crud = CRUDCatalog(CATALOG_ENTRIES)
