"""
Grillas de experimentos sintéticos

Cada punto de la grilla corre `trials` ensayos independientes. El ensayo t usa la
semilla base_seed ⊕ t en todos los puntos (números aleatorios comunes), así que una
misma instancia se evalúa bajo distintos λ o γ.

Los ensayos se reparten en un pool de joblib; los resultados se consumen en el orden
de la grilla, nunca por orden de término, por lo que 1 o N workers dan la misma tabla.

Con `dump_dir`, cada ensayo sin recuperación exacta deja su instancia en
`<dump_dir>/<experimento>_p<punto>_t<ensayo>.llinst`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import linregress

from components.lifted_lasso import (
    BasisKind,
    BoundInputs,
    ConfigError,
    InstanceParams,
    ParameterError,
    SolverOptions,
    gamma_zero,
    gen_instance,
    save_instance,
    solve_group_lasso,
    support_metrics,
)
from components.lifted_lasso.synth_metrics import DEFAULT_SUPPORT_THRESHOLD

logger = logging.getLogger(__name__)

INTEGER_PARAMS = ("N", "M", "K", "J")
REAL_PARAMS = ("sigma", "k", "gamma", "lambda")
GRID_PARAMS = INTEGER_PARAMS + REAL_PARAMS + ("basis",)

# configuración base de las simulaciones
BASE_FIXED = {"N": 100, "M": 150, "K": 3, "J": 3, "sigma": 0.1, "basis": BasisKind.DFT_FIRST_K.value}


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in GRID_PARAMS or self.name == "basis":
            raise ConfigError(f"parámetro de eje desconocido '{self.name}'", key="axis")
        if len(self.values) == 0:
            raise ConfigError("el eje no tiene valores", key=self.name)
        object.__setattr__(self, "values", tuple(_coerce(self.name, v) for v in self.values))


@dataclass(frozen=True)
class GridSpec:
    x_axis: Axis
    y_axis: Optional[Axis] = None
    fixed: Mapping[str, Any] = field(default_factory=dict)
    trials: int = 20
    base_seed: int = 0
    workers: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD
    dump_dir: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("debe ser >= 1", key="trials")
        if self.workers == 0:
            raise ConfigError("debe ser distinto de 0 (-1 usa todos los núcleos)", key="workers")
        axes = [a.name for a in self.axes]
        if len(set(axes)) != len(axes):
            raise ConfigError("los ejes x e y deben ser parámetros distintos", key="axis")
        overlap = set(axes) & set(self.fixed)
        if overlap:
            raise ConfigError(f"parámetros a la vez en un eje y fijos: {sorted(overlap)}", key="fixed")
        unknown = set(self.fixed) - set(GRID_PARAMS)
        if unknown:
            raise ConfigError(f"parámetros fijos desconocidos: {sorted(unknown)}", key="fixed")
        object.__setattr__(self, "fixed", {k: _coerce(k, v) for k, v in self.fixed.items()})

    @property
    def axes(self) -> Tuple[Axis, ...]:
        return (self.x_axis,) if self.y_axis is None else (self.x_axis, self.y_axis)

    def points(self) -> List[Dict[str, Any]]:
        """Puntos de la grilla en orden: x externo, y interno"""
        ys = [None] if self.y_axis is None else list(self.y_axis.values)
        out = []
        for x in self.x_axis.values:
            for y in ys:
                point = {self.x_axis.name: x}
                if self.y_axis is not None:
                    point[self.y_axis.name] = y
                out.append(point)
        return out


@dataclass(frozen=True)
class ExperimentRecord:
    point: Tuple[Tuple[str, Any], ...]
    success_count: int
    trial_count: int
    mean_error: Optional[float] = None
    std_error: Optional[float] = None
    runtime_ms: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 0 <= self.success_count <= self.trial_count:
            raise ParameterError("success_count debe estar en [0, trial_count]")
        if self.success_count == 0 and (self.mean_error is not None or self.std_error is not None):
            raise ParameterError("Sin recuperaciones exactas no hay estadísticas de error")

    @property
    def success_rate(self) -> float:
        return self.success_count / self.trial_count

    def value(self, name: str) -> Any:
        return dict(self.point)[name]


@dataclass
class ExperimentTable:
    name: str
    spec: GridSpec
    records: List[ExperimentRecord]
    error_label: str = "l2inf_error"

    @property
    def is_phase(self) -> bool:
        return self.spec.y_axis is not None

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class TrialOutcome:
    exact: bool
    error: float
    elapsed_ms: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class MonotonicitySummary:
    drops: dict
    monotone: bool


def _coerce(name: str, value: Any) -> Any:
    try:
        if name in INTEGER_PARAMS:
            as_float = float(value)
            if not as_float.is_integer():
                raise ValueError(value)
            return int(as_float)
        if name in REAL_PARAMS:
            return None if value is None else float(value)
        if name == "basis":
            return BasisKind(value).value
    except ValueError as exc:
        raise ConfigError(f"valor inválido {value!r}", key=name) from exc
    return value


def _instance_params(setting: Mapping[str, Any], seed: int) -> InstanceParams:
    return InstanceParams(
        N=setting["N"], M=setting["M"], K=setting["K"], J=setting["J"], sigma=setting["sigma"],
        basis_kind=setting.get("basis", BasisKind.DFT_FIRST_K.value),
        gamma_target=setting.get("gamma"), seed=seed,
    )


def resolve_lambda(setting: Mapping[str, Any], mu_max: float) -> float:
    """λ explícito o λ = k·γ₀; sin ruido γ₀ = 0 y se exige λ explícito"""
    if setting.get("lambda") is not None:
        return float(setting["lambda"])
    if setting.get("k") is None:
        raise ConfigError("se requiere 'k' o 'lambda'", key="lambda")
    b = BoundInputs(N=setting["N"], M=setting["M"], K=setting["K"], J=setting["J"], sigma=setting["sigma"],
                    mu_max=mu_max)
    lam = setting["k"] * gamma_zero(b)
    if not lam > 0:
        raise ConfigError("λ = k·γ₀ es 0 (sigma = 0 o k = 0); indique lambda explícito", key="lambda")
    return lam


def run_trial(setting: Mapping[str, Any], seed: int, solver: SolverOptions, threshold: float,
              error_power: int = 1, dump_path: Optional[str] = None) -> TrialOutcome:
    """Un ensayo: genera la instancia, resuelve y compara soportes; guarda la instancia si falla y hay dump_path"""
    start = time.perf_counter()
    instance = gen_instance(_instance_params(setting, seed))
    lam = resolve_lambda(setting, instance.op.basis.mu_max)
    solution = solve_group_lasso(instance.op, instance.y, lam, solver)
    metrics = support_metrics(solution.estimate, instance.X0, instance.support, threshold)
    if dump_path is not None and not metrics.exact:
        save_instance(instance, dump_path)
    elapsed = 1000.0 * (time.perf_counter() - start)
    return TrialOutcome(metrics.exact, metrics.l2inf_error ** error_power, elapsed)


def _aggregate(point: Mapping[str, Any], outcomes: Sequence[TrialOutcome]) -> ExperimentRecord:
    errors = np.array([o.error for o in outcomes if o.exact])
    mean = std = None
    if errors.size:
        mean, std = float(errors.mean()), float(errors.std())
    return ExperimentRecord(
        point=tuple(point.items()),
        success_count=int(errors.size),
        trial_count=len(outcomes),
        mean_error=mean,
        std_error=std,
        runtime_ms=float(sum(o.elapsed_ms for o in outcomes)),
    )


def run_grid(spec: GridSpec, name: str = "grid", error_power: int = 1,
             progress: Optional[Callable[[int, int, ExperimentRecord], None]] = None) -> ExperimentTable:
    """Corre todos los (punto, ensayo) y agrega por punto en orden de grilla"""
    points = spec.points()
    settings = [{**spec.fixed, **point} for point in points]
    missing = [p for p in INTEGER_PARAMS + ("sigma",) if p not in settings[0]]
    if missing:
        raise ConfigError(f"faltan parámetros: {missing}", key="fixed")
    for setting in settings:
        try:
            _instance_params(setting, spec.base_seed)
        except ParameterError as exc:
            raise ConfigError(str(exc), key="grid") from exc

    dump_dir = None
    if spec.dump_dir is not None:
        dump_dir = Path(spec.dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)

    def dump_path(index: int, t: int) -> Optional[str]:
        return None if dump_dir is None else str(dump_dir / f"{name}_p{index:03d}_t{t:03d}.llinst")

    tasks = ((index, setting, t) for index, setting in enumerate(settings) for t in range(spec.trials))
    results: Iterator[TrialOutcome] = Parallel(n_jobs=spec.workers, return_as="generator")(
        delayed(run_trial)(setting, spec.base_seed ^ t, spec.solver, spec.support_threshold, error_power,
                           dump_path(index, t))
        for index, setting, t in tasks
    )

    records = []
    for index, point in enumerate(points):
        outcomes = [next(results) for _ in range(spec.trials)]
        record = _aggregate(point, outcomes)
        records.append(record)
        if progress is not None:
            progress(index + 1, len(points), record)
        logger.info("[%d/%d] %s: %d/%d exactos", index + 1, len(points), _label(point),
                    record.success_count, record.trial_count)
    label = "l2inf_error_sq" if error_power == 2 else "l2inf_error"
    return ExperimentTable(name=name, spec=spec, records=records, error_label=label)


def _label(point: Mapping[str, Any]) -> str:
    return ", ".join(f"{k}={v}" for k, v in point.items())


def _require_axes(spec: GridSpec, x_names: Sequence[str], y_names: Optional[Sequence[str]]) -> None:
    if spec.x_axis.name not in x_names:
        raise ConfigError(f"el eje x debe ser uno de {list(x_names)}", key="x_axis")
    if y_names is None:
        if spec.y_axis is not None:
            raise ConfigError("este experimento no usa eje y", key="y_axis")
    elif spec.y_axis is None or spec.y_axis.name not in y_names:
        raise ConfigError(f"el eje y debe ser uno de {list(y_names)}", key="y_axis")


def run_lambda_gamma_phase(spec: GridSpec, **kwargs) -> ExperimentTable:
    """Tasa de recuperación exacta sobre la grilla (k, γ)"""
    _require_axes(spec, ("k", "lambda"), ("gamma",))
    return run_grid(spec, "phase-lambda", **kwargs)


def run_n_vs_k_phase(spec: GridSpec, **kwargs) -> ExperimentTable:
    """Tasa de recuperación exacta sobre (N, K) con J fijo"""
    _require_axes(spec, ("N",), ("K",))
    return run_grid(spec, "phase-nk", **kwargs)


def run_n_vs_j_phase(spec: GridSpec, **kwargs) -> ExperimentTable:
    """Tasa de recuperación exacta sobre (N, J) con K fijo"""
    _require_axes(spec, ("N",), ("J",))
    return run_grid(spec, "phase-nj", **kwargs)


def run_error_vs_lambda(spec: GridSpec, **kwargs) -> ExperimentTable:
    """Media y desviación de ‖X̂ − X₀‖_{2,∞} condicionadas a recuperación exacta"""
    _require_axes(spec, ("k", "lambda"), None)
    return run_grid(spec, "error-lambda", **kwargs)


def run_error_vs_j(spec: GridSpec, **kwargs) -> ExperimentTable:
    """Como run_error_vs_lambda pero con el error al cuadrado y J en el eje"""
    _require_axes(spec, ("J",), None)
    return run_grid(spec, "error-j", error_power=2, **kwargs)


@dataclass(frozen=True)
class ExperimentDefaults:
    runner: Callable[..., ExperimentTable]
    x_axis: Axis
    y_axis: Optional[Axis]
    fixed: Mapping[str, Any]
    trials: int
    full_x: Axis
    full_y: Optional[Axis]
    full_trials: int


EXPERIMENTS: Dict[str, ExperimentDefaults] = {
    "phase-lambda": ExperimentDefaults(
        runner=run_lambda_gamma_phase,
        x_axis=Axis("k", (0.5, 1.0, 1.5, 2.0, 3.0)),
        y_axis=Axis("gamma", (0.01, 0.02, 0.04, 0.08, 0.16)),
        fixed=dict(BASE_FIXED),
        trials=20,
        full_x=Axis("k", tuple(np.round(np.arange(0.2, 4.01, 0.2), 2))),
        full_y=Axis("gamma", tuple(np.round(np.arange(0.01, 0.201, 0.01), 2))),
        full_trials=50,
    ),
    "phase-nk": ExperimentDefaults(
        runner=run_n_vs_k_phase,
        x_axis=Axis("N", (20, 40, 60, 80, 100)),
        y_axis=Axis("K", (1, 2, 3, 4, 5)),
        fixed={**{k: v for k, v in BASE_FIXED.items() if k not in ("N", "K")}, "k": 3.0, "gamma": 0.02},
        trials=20,
        full_x=Axis("N", tuple(range(20, 201, 10))),
        full_y=Axis("K", tuple(range(1, 11))),
        full_trials=50,
    ),
    "phase-nj": ExperimentDefaults(
        runner=run_n_vs_j_phase,
        x_axis=Axis("N", (20, 40, 60, 80, 100)),
        y_axis=Axis("J", (1, 2, 3, 4, 5)),
        fixed={**{k: v for k, v in BASE_FIXED.items() if k not in ("N", "J")}, "k": 3.0, "gamma": 0.02},
        trials=20,
        full_x=Axis("N", tuple(range(20, 201, 10))),
        full_y=Axis("J", tuple(range(1, 11))),
        full_trials=50,
    ),
    "error-lambda": ExperimentDefaults(
        runner=run_error_vs_lambda,
        x_axis=Axis("k", (1.5, 2.0, 2.5, 3.0, 3.5)),
        y_axis=None,
        fixed={**BASE_FIXED, "gamma": 0.02},
        trials=30,
        full_x=Axis("k", tuple(np.round(np.arange(1.5, 5.01, 0.25), 2))),
        full_y=None,
        full_trials=100,
    ),
    "error-j": ExperimentDefaults(
        runner=run_error_vs_j,
        x_axis=Axis("J", (2, 4, 6, 8)),
        y_axis=None,
        fixed={**{k: v for k, v in BASE_FIXED.items() if k != "J"}, "k": 3.0, "gamma": 0.02},
        trials=30,
        full_x=Axis("J", tuple(range(1, 9))),
        full_y=None,
        full_trials=100,
    ),
}


def default_grid(experiment: str, paper_scale: bool = False, **overrides) -> GridSpec:
    """GridSpec por defecto (escala de escritorio o la del protocolo completo)"""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experimento desconocido '{experiment}'", key="experiment")
    d = EXPERIMENTS[experiment]
    spec = GridSpec(
        x_axis=d.full_x if paper_scale else d.x_axis,
        y_axis=d.full_y if paper_scale else d.y_axis,
        fixed=dict(d.fixed),
        trials=d.full_trials if paper_scale else d.trials,
    )
    return replace(spec, **overrides) if overrides else spec


def run_experiment(experiment: str, spec: GridSpec, **kwargs) -> ExperimentTable:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experimento desconocido '{experiment}'", key="experiment")
    return EXPERIMENTS[experiment].runner(spec, **kwargs)


@dataclass(frozen=True)
class PhaseCrossing:
    y: Any
    x: float
    censored: bool = False


def phase_boundary(table: ExperimentTable, level: float = 0.5) -> List[PhaseCrossing]:
    """
    Cruce del nivel de tasa a lo largo del eje x, para cada valor del eje y

    Interpolación lineal entre los dos puntos que encierran el primer cruce.
    x = NaN si la fila nunca alcanza el nivel. Si ya parte sobre él se devuelve el
    primer x marcado como censurado: el cruce real queda fuera de la grilla.
    """
    if not table.is_phase:
        raise ParameterError("phase_boundary requiere una tabla de fase (dos ejes)")
    xs = table.spec.x_axis.values
    ys = table.spec.y_axis.values
    rates = np.array([r.success_rate for r in table.records]).reshape(len(xs), len(ys))
    out = []
    for col, y in enumerate(ys):
        row = rates[:, col]
        crossing = PhaseCrossing(y, math.nan)
        for i, rate in enumerate(row):
            if rate >= level:
                if i == 0:
                    crossing = PhaseCrossing(y, float(xs[0]), censored=True)
                else:
                    r0, r1 = row[i - 1], rate
                    crossing = PhaseCrossing(y, float(xs[i - 1] + (level - r0) * (xs[i] - xs[i - 1]) / (r1 - r0)))
                break
        out.append(crossing)
    return out


def boundary_fit(crossings: Sequence[PhaseCrossing]) -> LinearFit:
    """Recta x* = f(y) sobre los cruces no censurados"""
    kept = [c for c in crossings if not c.censored]
    return linear_fit([c.y for c in kept], [c.x for c in kept])


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Recta de mínimos cuadrados; descarta pares con NaN"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        raise ParameterError("Se requieren al menos dos puntos finitos para el ajuste")
    fit = linregress(x[keep], y[keep])
    return LinearFit(slope=float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2))


def monotonicity_summary(table: ExperimentTable, allowed_drops: int = 1) -> MonotonicitySummary:
    """Número de descensos de la tasa al crecer x, por valor de y"""
    if not table.is_phase:
        raise ParameterError("monotonicity_summary requiere una tabla de fase")
    xs = table.spec.x_axis.values
    ys = table.spec.y_axis.values
    rates = np.array([r.success_rate for r in table.records]).reshape(len(xs), len(ys))
    drops = {y: int(np.count_nonzero(np.diff(rates[:, col]) < 0)) for col, y in enumerate(ys)}
    return MonotonicitySummary(drops=drops, monotone=all(d <= allowed_drops for d in drops.values()))
