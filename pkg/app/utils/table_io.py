"""
Módulo de lectura y escritura de tablas.

El formato columnar es el mismo en CSV y en ``.npz``: una cabecera con la
especificación de la malla y luego una fila por nodo ``(t, x1..xd, y1..ye,
h1..hd)``. El CSV guarda la malla en una primera línea de comentario
``# grid: {...}``.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np

from app.models.table_model import FunctionTable, GridSpec, SolverInfo

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def column_names(table: FunctionTable) -> List[str]:
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(table.dim_x)]
        + [f"y{i + 1}" for i in range(table.dim_y)]
        + [f"h{i + 1}" for i in range(table.dim_x)]
    )


def table_rows(table: FunctionTable) -> np.ndarray:
    """Matriz ``(nodos, 1 + dim_x + dim_y + dim_x)`` en el orden de los nodos."""
    xi, eta = table.grid.node_points(table.dim_x, table.dim_y)
    n_tau, n_xi, n_eta = len(table.tau_axis), xi.shape[0], eta.shape[0]
    t = np.repeat(table.tau_axis, n_xi * n_eta)[:, None]
    x = np.tile(np.repeat(xi, n_eta, axis=0), (n_tau, 1))
    y = np.tile(eta, (n_tau * n_xi, 1))
    return np.concatenate([t, x, y, table.values.reshape(-1, table.dim_x)], axis=1)


def _header(table: FunctionTable) -> Dict:
    return {
        "kind": table.kind,
        "dim_x": table.dim_x,
        "dim_y": table.dim_y,
        "discrete": table.discrete,
        "tau_policy": table.tau_policy,
        "period": table.period,
        "grid": table.grid.model_dump(),
        "tau_axis": [float(t) for t in table.tau_axis],
        "info": table.info.model_dump(),
    }


def write_table_csv(table: FunctionTable, path: PathLike) -> Path:
    """Escribe la tabla en CSV con la malla en la línea de comentario inicial."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# grid: " + json.dumps(_header(table), sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(column_names(table))
        for row in table_rows(table):
            writer.writerow([repr(float(v)) for v in row])
    logger.info(f"Tabla '{table.kind}' escrita en {path}")
    return path


def read_table_csv(path: PathLike) -> FunctionTable:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# grid: "):
            raise ValueError(f"{path} no tiene la cabecera de malla")
        header = json.loads(first[len("# grid: "):])
        reader = csv.reader(fh)
        next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    dim_x = header["dim_x"]
    values = data[:, -dim_x:]
    return _from_header(header, values)


def write_table_npz(table: FunctionTable, path: PathLike) -> Path:
    """Escribe la forma binaria compacta con la misma disposición columnar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, header=np.array(json.dumps(_header(table), sort_keys=True)), rows=table_rows(table))
    return path


def read_table_npz(path: PathLike) -> FunctionTable:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        rows = data["rows"]
    return _from_header(header, rows[:, -header["dim_x"]:])


def _from_header(header: Dict, values: np.ndarray) -> FunctionTable:
    grid = GridSpec(**header["grid"])
    tau_axis = np.asarray(header["tau_axis"], dtype=float)
    dim_x, dim_y = header["dim_x"], header["dim_y"]
    n_xi = grid.n_x ** dim_x
    n_eta = grid.n_y ** dim_y if dim_y else 1
    return FunctionTable(
        kind=header["kind"],
        grid=grid,
        dim_x=dim_x,
        dim_y=dim_y,
        discrete=header["discrete"],
        tau_axis=tau_axis,
        values=values.reshape(len(tau_axis), n_xi, n_eta, dim_x),
        tau_policy=header["tau_policy"],
        period=header["period"],
        info=SolverInfo(**header["info"]),
    )


def write_rows_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Escribe filas genéricas (defectos por muestra, pares de Hölder)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
