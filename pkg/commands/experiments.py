"""
Comandos de experimentos: phase-lambda, phase-nk, phase-nj, error-lambda, error-j
"""

import logging
from dataclasses import replace
from typing import Any, Dict

from components.experiments import (
    Axis,
    ExperimentTable,
    GridSpec,
    boundary_fit,
    default_grid,
    emit_report,
    linear_fit,
    monotonicity_summary,
    phase_boundary,
    run_experiment,
)
from components.lifted_lasso import ConfigError, ParameterError, SolverOptions
from components.lifted_lasso.synth_metrics import DEFAULT_SUPPORT_THRESHOLD

logger = logging.getLogger(__name__)

PROBLEM_KEYS = ("N", "M", "K", "J", "sigma", "k", "gamma", "lambda", "basis")


def solver_options(config: Dict[str, Any], default_mode: str = "fista") -> SolverOptions:
    return SolverOptions(
        max_iters=config["max_iters"],
        kkt_tol=config["kkt_tol"],
        step_mode=config["step_mode"] or default_mode,
    )


def support_threshold(config: Dict[str, Any]) -> float:
    value = config["support_threshold"]
    return DEFAULT_SUPPORT_THRESHOLD if value is None else value


def build_grid(command: str, config: Dict[str, Any]) -> GridSpec:
    """GridSpec del comando con la configuración aplicada encima de los valores por defecto"""
    spec = default_grid(command, paper_scale=bool(config["paper_scale"]))
    x_axis, y_axis = spec.x_axis, spec.y_axis

    if config["x_axis"] or config["x_values"]:
        name = config["x_axis"] or x_axis.name
        values = config["x_values"] or (x_axis.values if name == x_axis.name else None)
        if values is None:
            raise ConfigError(f"al cambiar el eje x a '{name}' indique x_values", key="x_values")
        x_axis = Axis(name, tuple(values))
    if config["y_values"]:
        if y_axis is None:
            raise ConfigError(f"{command} no tiene eje y", key="y_values")
        y_axis = Axis(y_axis.name, tuple(config["y_values"]))

    axes = {x_axis.name} | ({y_axis.name} if y_axis else set())
    fixed = {k: v for k, v in spec.fixed.items() if k not in axes}
    for key in PROBLEM_KEYS:
        if config.get(key) is None:
            continue
        if key in axes:
            raise ConfigError(f"'{key}' es un eje de {command}; use x_values/y_values", key=key)
        fixed[key] = config[key]
    if "lambda" in axes | set(fixed) and "k" in fixed:
        fixed.pop("k")

    return replace(
        spec,
        x_axis=x_axis,
        y_axis=y_axis,
        fixed=fixed,
        trials=config["trials"] or spec.trials,
        base_seed=config["seed"],
        workers=config["workers"],
        solver=solver_options(config),
        support_threshold=support_threshold(config),
        dump_dir=config["dump_failures"],
    )


def summarize(table: ExperimentTable) -> None:
    """Resumen en el log: cruces de fase y ajustes lineales"""
    if table.is_phase:
        if table.spec.x_axis.name == "N":
            crossings = phase_boundary(table)
            for c in crossings:
                note = " (censurado: la grilla parte sobre el 50%)" if c.censored else ""
                logger.info("   N* al 50%% para %s=%s: %.2f%s", table.spec.y_axis.name, c.y, c.x, note)
            try:
                fit = boundary_fit(crossings)
                logger.info("📐 Frontera de fase: pendiente %.3f, R² %.3f", fit.slope, fit.r_squared)
            except ParameterError as e:
                logger.warning("⚠️ Sin ajuste de frontera: %s", e)
            mono = monotonicity_summary(table)
            status = "✅" if mono.monotone else "⚠️"
            logger.info("%s Monotonía en N: descensos por fila %s", status, mono.drops)
        return
    points = [(r.value(table.spec.x_axis.name), r.mean_error) for r in table.records if r.mean_error is not None]
    if len(points) >= 2:
        fit = linear_fit(*zip(*points))
        logger.info("📐 %s vs %s: pendiente %.4g, R² %.3f", table.error_label, table.spec.x_axis.name,
                    fit.slope, fit.r_squared)
    else:
        logger.warning("⚠️ Menos de dos puntos con recuperación exacta; sin ajuste lineal")


def run(command: str, config: Dict[str, Any]) -> int:
    spec = build_grid(command, config)
    logger.info("🔢 %d puntos × %d ensayos, semilla %d, %d worker(s)", len(spec.points()), spec.trials,
                spec.base_seed, spec.workers)
    table = run_experiment(command, spec)
    paths = emit_report(table, config["format"], config["out_dir"], config["timezone"])
    summarize(table)
    logger.info("✅ %s terminado: %d archivo(s) en %s", command, len(paths), config["out_dir"])
    return 0
