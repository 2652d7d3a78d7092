"""
Módulo principal de la línea de comandos.

Carga un :class:`RunConfig` desde JSON, despacha al comando pedido y escribe
``report.json`` (con la configuración resuelta incrustada) más las tablas CSV
cuando se pide ``--csv``. El código de salida sigue el ``exit_code`` de la
excepción que escape del comando.

Uso::

    python -m app.main check --config run.json --out out/
    python -m app.main example E3
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.core.exceptions import ConfigError, LinearizationError, MissingConstantsError
from app.models.system_model import CoupledSystem
from app.schemas.reports import HypothesisReport
from app.schemas.run_config import NumericsConfig, RunConfig, SystemRef
from app.services.conjugacy_service import conjugacy_service
from app.services.example_service import example_service
from app.services.green_service import GreenKernel, green_service
from app.services.holder_service import DeltaKind, holder_service
from app.services.system_service import system_service
from app.utils.table_io import write_rows_csv, write_table_csv, write_table_npz

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Archivo JSON con el RunConfig.")
    common.add_argument("--out", type=str, help="Directorio de salida (reemplaza output_dir).")
    common.add_argument("--seed", type=int, help="Semilla de los muestreos.")
    common.add_argument("--csv", action="store_true", help="Escribe tablas y muestras en CSV.")
    common.add_argument("--tol", type=float, help="Tolerancia del punto fijo.")
    common.add_argument("--window", type=float, help="Semiancho de la ventana temporal T_max.")

    parser = argparse.ArgumentParser(prog="linconj", description="Linealización de sistemas no autónomos.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="Cantidades de hipótesis y condiciones.")
    sub.add_parser("solve", parents=[common], help="Resuelve h y h̄.")
    sub.add_parser("verify", parents=[common], help="Defectos de inversa y de transporte.")
    sub.add_parser("holder", parents=[common], help="Envolventes Δ y Hölder empírico.")
    example = sub.add_parser("example", parents=[common], help="Patrón esperado de un ejemplo.")
    example.add_argument("name", type=str)
    sub.add_parser("oracle", parents=[common], help="Comparación con el oráculo discreto.")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """
    Lee y valida la configuración, aplicando las banderas.

    :raises ConfigError: Si el archivo no existe, no es JSON o no valida.
    """
    if args.config is None:
        if args.command != "example":
            raise ConfigError("Se requiere --config para este comando")
        data: Dict[str, Any] = {"system": {"example": args.name}}
    else:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"No existe el archivo de configuración {args.config}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Configuración JSON inválida: {e}")
    if args.command == "example":
        data["system"] = {"example": args.name}
    try:
        cfg = RunConfig.model_validate(data)
        updates: Dict[str, Any] = {}
        if args.tol is not None:
            updates["tol"] = args.tol
        if args.window is not None:
            updates["t_max"] = args.window
        if updates:
            cfg.numerics = NumericsConfig.model_validate({**cfg.numerics.model_dump(), **updates})
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        return RunConfig.model_validate(cfg.model_dump())
    except ValidationError as e:
        raise ConfigError(f"Configuración inválida: {e}")


def resolve_system(cfg: RunConfig) -> Tuple[CoupledSystem, GreenKernel]:
    ref: SystemRef = cfg.system
    if ref.example is not None:
        pkg = example_service.load_example(ref.example, cfg.numerics)
        system = pkg.system
    else:
        system = system_service.build_system(ref.catalog, ref.params)
    kernel = green_service.build_kernel(system, cfg.kernel, cfg.numerics)
    return system, kernel


def _dump(model) -> Any:
    return model.model_dump(mode="json")


def _holder_margins(system: CoupledSystem, kernel: GreenKernel, cfg: RunConfig,
                    report: HypothesisReport) -> None:
    """Agrega al informe las condiciones de Hölder y de corolario para cada ``(C, α)``."""
    for C in cfg.holder.C:
        for alpha in cfg.holder.alpha:
            suffix = f"@C={C:g},alpha={alpha:g}"
            try:
                for delta in (DeltaKind.DELTA1, DeltaKind.DELTA2):
                    m = green_service.holder_x_condition(system, kernel, C, alpha, delta.value, cfg.numerics)
                    report.margins[m.tag + suffix] = m
                if system.dim_y:
                    for delta in (DeltaKind.SIGMA, DeltaKind.DELTA3):
                        m = green_service.holder_y_condition(system, kernel, C, alpha, delta.value, cfg.numerics)
                        report.margins[m.tag + suffix] = m
            except MissingConstantsError as e:
                report.warnings.append(str(e))
            dd = kernel.spec.dichotomy
            if dd is not None and not system.discrete and not system.eps_envelope.is_zero():
                corollary = green_service.dichotomy_corollary_check(
                    dd, system.M_bound, system.eps_envelope.sup(), alpha, C, system.M2_bound
                )
                for tag, m in corollary.margins.items():
                    report.margins[tag + suffix] = m
                for tag, bound in corollary.alpha_bounds.items():
                    report.alpha_bounds[tag] = bound
    if kernel.envelope is not None and kernel.envelope.kind.value == "polynomial" and not system.discrete:
        m = green_service.polynomial_admissibility(system)
        report.margins[m.tag] = m


def _required_failures(report: HypothesisReport, required: List[str]) -> List[str]:
    failed = []
    for key, m in report.margins.items():
        if key.split("@", 1)[0] in required and not m.passed:
            failed.append(key)
    return failed


def cmd_check(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    system, kernel = resolve_system(cfg)
    report = green_service.hypothesis_N_q(system, kernel, cfg.numerics)
    _holder_margins(system, kernel, cfg, report)
    bound_tag = "boundd" if system.discrete else "bound"
    failed = _required_failures(report, cfg.holder.required)
    code = 0
    if not report.passed(bound_tag):
        logger.warning(f"La hipótesis de contracción falla: q={report.q_certified}")
        code = 2
    if failed:
        logger.warning(f"Condiciones requeridas fallidas: {', '.join(failed)}")
        code = 2
    envelopes = system_service.envelope_check(system, cfg.verify.samples, cfg.seed, cfg.numerics.t_max, cfg.grid)
    if envelopes.total_violations:
        logger.warning(f"Envolventes declaradas violadas en {envelopes.total_violations} muestras")
    return code, {"hypothesis": _dump(report), "envelopes": _dump(envelopes), "required_failed": failed}


def _solve(cfg: RunConfig):
    system, kernel = resolve_system(cfg)
    report = green_service.hypothesis_N_q(system, kernel, cfg.numerics)
    pair = conjugacy_service.solve_pair(system, kernel, cfg.grid, cfg.numerics, report)
    return system, kernel, report, pair


def _tables_result(pair, report: HypothesisReport) -> Dict[str, Any]:
    return {
        "hypothesis": _dump(report),
        "h": {"info": _dump(pair.h_table.info), "sup_norm": pair.h_table.sup_norm()},
        "hbar": {"info": _dump(pair.hbar_table.info), "sup_norm": pair.hbar_table.sup_norm()},
    }


def cmd_solve(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    _, _, report, pair = _solve(cfg)
    write_table_npz(pair.h_table, out / "h_table.npz")
    write_table_npz(pair.hbar_table, out / "hbar_table.npz")
    if args.csv:
        write_table_csv(pair.h_table, out / "h_table.csv")
        write_table_csv(pair.hbar_table, out / "hbar_table.csv")
    return 0, _tables_result(pair, report)


def cmd_verify(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    system, _, report, pair = _solve(cfg)
    inverse = conjugacy_service.verify_inverse(
        pair, cfg.verify.samples, cfg.seed, out / "inverse_defects.csv" if args.csv else None
    )
    mapping = conjugacy_service.verify_mapping(system, pair, cfg.verify.samples, cfg.verify.horizon, cfg.seed,
                                               cfg.numerics)
    result = _tables_result(pair, report)
    result.update({"inverse": _dump(inverse), "mapping": _dump(mapping)})
    period = 1.0 if system.autonomous else system.period
    if period is not None:
        extent = float(pair.h_table.tau_axis[-1] - pair.h_table.tau_axis[0])
        if extent >= period:
            result["periodicity_defect"] = conjugacy_service.periodicity_defect(pair, period)
    return 0, result


def cmd_holder(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    system, kernel, report, pair = _solve(cfg)
    envelopes = {}
    kinds = [DeltaKind.DELTA1, DeltaKind.DELTA2]
    if system.dim_y:
        kinds += [DeltaKind.DELTA3, DeltaKind.SIGMA]
    for kind in kinds:
        try:
            envelopes[kind.value] = _dump(holder_service.envelope_empirical_check(
                system, kind, cfg.holder.pairs, cfg.holder.horizon, cfg.seed, cfg.numerics, cfg.grid
            ))
        except MissingConstantsError as e:
            logger.warning(f"Envolvente {kind.value} omitida: {e}")
    axes = ["x", "y"] if system.dim_y else ["x"]
    empirical = []
    first = True
    for C in cfg.holder.C:
        for alpha in cfg.holder.alpha:
            for table_kind in ("h", "hbar"):
                for axis in axes:
                    csv_path = out / "holder_pairs.csv" if args.csv and first else None
                    first = False
                    empirical.append(_dump(holder_service.empirical_holder(
                        pair, axis, table_kind, C, alpha, cfg.holder.samples, cfg.seed, csv_path
                    )))
    return 0, {"hypothesis": _dump(report), "envelopes": envelopes, "empirical": empirical}


def cmd_example(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    pkg = example_service.load_example(args.name, cfg.numerics)
    report = example_service.run_expected_checks(pkg, cfg.numerics)
    return (0 if report.all_matched else 2), {"example": _dump(report)}


def cmd_oracle(cfg: RunConfig, args: argparse.Namespace, out: Path) -> Tuple[int, Dict[str, Any]]:
    system, kernel = resolve_system(cfg)
    if not system.discrete:
        raise ConfigError("El oráculo solo aplica a sistemas en tiempo discreto")
    report = green_service.hypothesis_N_q(system, kernel, cfg.numerics)
    table = conjugacy_service.solve_h_discrete(system, kernel, cfg.grid, cfg.numerics, report)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = int(table.tau_axis[0]), int(table.tau_axis[-1])
    rows = []
    excesses = 0
    worst = 0.0
    for _ in range(cfg.oracle.probes):
        n = int(rng.integers(lo, hi + 1))
        xi = rng.uniform(-0.5 * cfg.grid.box_x, 0.5 * cfg.grid.box_x, size=system.dim_x)
        eta = rng.uniform(-0.5 * cfg.grid.box_y, 0.5 * cfg.grid.box_y, size=system.dim_y)
        value, radius = conjugacy_service.brute_force_h_discrete(
            system, kernel, (n, xi, eta), cfg.oracle.depth, int(table.info.truncation), cfg.numerics, report
        )
        gap = float(np.linalg.norm(table(float(n), xi, eta) - value))
        allowed = radius + table.info.error_budget
        excess = gap > allowed
        excesses += int(excess)
        worst = max(worst, gap)
        rows.append([n] + [float(v) for v in xi] + [float(v) for v in eta] + [gap, allowed, int(excess)])
    if args.csv:
        header = (["n"] + [f"x{i + 1}" for i in range(system.dim_x)] + [f"y{i + 1}" for i in range(system.dim_y)]
                  + ["gap", "allowed", "excess"])
        write_rows_csv(out / "oracle_probes.csv", header, rows)
    if excesses:
        logger.warning(f"El oráculo excede el radio certificado en {excesses} sondas")
    return 0, {
        "hypothesis": _dump(report),
        "h": {"info": _dump(table.info)},
        "oracle": {"probes": cfg.oracle.probes, "depth": cfg.oracle.depth, "max_gap": worst, "excesses": excesses},
    }


HANDLERS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "holder": cmd_holder,
    "example": cmd_example,
    "oracle": cmd_oracle,
}


def write_report(out: Path, command: str, cfg: RunConfig, result: Dict[str, Any], code: int) -> Path:
    """Escribe ``report.json`` con claves ordenadas y sin marcas de tiempo."""
    out.mkdir(parents=True, exist_ok=True)
    document = {"command": command, "config": cfg.model_dump(mode="json"), "exit_code": code, "result": result}
    path = out / "report.json"
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")
    return path


def run(argv: Optional[List[str]] = None) -> int:
    """
    Ejecuta un comando y devuelve el código de salida.

    0 éxito, 2 hipótesis fallida, 3 falta de convergencia, 4 configuración inválida.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 4 if e.code else 0
    try:
        cfg = load_config(args)
    except LinearizationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        code, result = HANDLERS[args.command](cfg, args, out)
    except LinearizationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        code = e.exit_code
        result = {"error": {"type": type(e).__name__, "message": str(e),
                            "residual_history": getattr(e, "residual_history", [])}}
    except Exception as e:
        logger.error(f"Error al ejecutar '{args.command}': {e}")
        code = LinearizationError.exit_code
        result = {"error": {"type": type(e).__name__, "message": str(e), "residual_history": []}}
    path = write_report(out, args.command, cfg, result, code)
    logger.info(f"Informe escrito en {path}")
    return code


def main() -> None:
    logging.basicConfig(level=settings.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
