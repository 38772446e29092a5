"""
Emisión de reportes de experimentos

Esquema CSV (UTF-8, separador ',', decimal '.', comillas RFC-4180 mínimas, fin de
línea '\\n'), una fila por punto de la grilla en orden de grilla:

    <eje x>, [<eje y>], success_count, trial_count, success_rate, mean_error, std_error

mean_error y std_error quedan vacíos si no hubo recuperación exacta. En error-j
son estadísticas del error al cuadrado (ver `error_label` en el sidecar).

Los tiempos de ejecución no van al CSV sino al sidecar `<nombre>.meta.json`, así
el CSV es idéntico byte a byte entre corridas con la misma semilla.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import pytz  # noqa: E402
from openpyxl.styles import Alignment, Font, PatternFill  # noqa: E402

from components.lifted_lasso import ParameterError  # noqa: E402

from .runner import ExperimentRecord, ExperimentTable  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_TIMEZONE = "America/Santiago"
STAT_COLUMNS = ["success_count", "trial_count", "success_rate", "mean_error", "std_error"]


class ReportFormat(str, Enum):
    CSV = "csv"
    PLOT = "plot"
    BOTH = "both"
    XLSX = "xlsx"


def table_to_frame(table: ExperimentTable) -> pd.DataFrame:
    rows = []
    for record in table.records:
        row: Dict[str, Any] = dict(record.point)
        row.update(
            success_count=record.success_count,
            trial_count=record.trial_count,
            success_rate=record.success_rate,
            mean_error=record.mean_error,
            std_error=record.std_error,
        )
        rows.append(row)
    columns = [a.name for a in table.spec.axes] + STAT_COLUMNS
    return pd.DataFrame(rows, columns=columns)


def write_csv(table: ExperimentTable, path: Path) -> Path:
    table_to_frame(table).to_csv(path, index=False, na_rep="", lineterminator="\n", encoding="utf-8")
    return path


def _python_value(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


def read_report_csv(path: Union[str, Path]) -> List[ExperimentRecord]:
    """Lee un CSV de reporte y reconstruye los registros (sin tiempos)"""
    df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    missing = [c for c in STAT_COLUMNS if c not in df.columns]
    if missing:
        raise ParameterError(f"Columnas faltantes en {path}: {missing}")
    axes = [c for c in df.columns if c not in STAT_COLUMNS]
    records = []
    for row in df.to_dict("records"):
        mean = row["mean_error"]
        std = row["std_error"]
        records.append(ExperimentRecord(
            point=tuple((name, _python_value(row[name])) for name in axes),
            success_count=int(row["success_count"]),
            trial_count=int(row["trial_count"]),
            mean_error=None if pd.isna(mean) else float(mean),
            std_error=None if pd.isna(std) else float(std),
        ))
    return records


def rate_grid(table: ExperimentTable) -> np.ndarray:
    """Tasas como matriz (len(y), len(x)); fila 0 = primer valor de y"""
    nx = len(table.spec.x_axis.values)
    ny = len(table.spec.y_axis.values)
    return np.array([r.success_rate for r in table.records]).reshape(nx, ny).T


def write_heatmaps(table: ExperimentTable, out_dir: Path) -> List[Path]:
    """Mapa de calor anotado y una imagen cruda de un píxel por punto de la grilla"""
    grid = rate_grid(table)
    x = table.spec.x_axis
    y = table.spec.y_axis

    raw = out_dir / f"{table.name}_grid.png"
    plt.imsave(raw, grid, cmap="gray", vmin=0.0, vmax=1.0, origin="lower")

    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.imshow(grid, origin="lower", cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(x.values)), [f"{v:g}" for v in x.values])
    ax.set_yticks(range(len(y.values)), [f"{v:g}" for v in y.values])
    ax.set_xlabel(x.name)
    ax.set_ylabel(y.name)
    ax.set_title(f"{table.name}: tasa de recuperación exacta")
    fig.colorbar(mesh, ax=ax)
    figure = out_dir / f"{table.name}.png"
    fig.savefig(figure, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [figure, raw]


def write_error_plot(table: ExperimentTable, out_dir: Path) -> List[Path]:
    xs, means, stds = [], [], []
    for record in table.records:
        if record.mean_error is None:
            continue
        xs.append(record.value(table.spec.x_axis.name))
        means.append(record.mean_error)
        stds.append(record.std_error)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel(table.spec.x_axis.name)
    ax.set_ylabel(table.error_label)
    ax.set_title(f"{table.name}: error condicionado a recuperación exacta")
    ax.grid(True, alpha=0.3)
    figure = out_dir / f"{table.name}.png"
    fig.savefig(figure, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [figure]


def write_styled_excel(df: pd.DataFrame, path: Path, sheet_name: str = "resultados") -> Path:
    """Planilla con encabezado destacado, panel congelado y anchos ajustados"""
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        df.to_excel(writer, index=False, sheet_name=sheet_name)
        ws = writer.book[sheet_name]

        header_fill = PatternFill(start_color="1F4E79", end_color="1F4E79", fill_type="solid")
        header_font = Font(color="FFFFFF", bold=True)
        header_alignment = Alignment(horizontal="center", vertical="center")
        for cell in ws[1]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = header_alignment

        ws.freeze_panes = "A2"

        for col_cells in ws.columns:
            width = max((len(str(c.value)) for c in col_cells if c.value is not None), default=0)
            ws.column_dimensions[col_cells[0].column_letter].width = min(max(10, width + 2), 60)
    return path


def timestamp(timezone: str = DEFAULT_TIMEZONE) -> str:
    return datetime.now(pytz.timezone(timezone)).isoformat(timespec="seconds")


def write_meta(path: Path, payload: Dict[str, Any], timezone: str = DEFAULT_TIMEZONE) -> Path:
    """Sidecar JSON con marca de tiempo localizada"""
    content = {"generated_at": timestamp(timezone), "timezone": timezone, **payload}
    path.write_text(json.dumps(content, indent=2, ensure_ascii=False, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"No serializable: {type(value).__name__}")


def table_meta(table: ExperimentTable) -> Dict[str, Any]:
    spec = table.spec
    return {
        "experiment": table.name,
        "error_label": table.error_label,
        "x_axis": {"name": spec.x_axis.name, "values": list(spec.x_axis.values)},
        "y_axis": None if spec.y_axis is None else {"name": spec.y_axis.name, "values": list(spec.y_axis.values)},
        "fixed": dict(spec.fixed),
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "workers": spec.workers,
        "solver": asdict(spec.solver),
        "support_threshold": spec.support_threshold,
        "runtime_ms": [r.runtime_ms for r in table.records],
        "total_runtime_ms": float(sum(r.runtime_ms for r in table.records)),
    }


def emit_report(table: ExperimentTable, fmt: Union[ReportFormat, str] = ReportFormat.CSV,
                out_dir: Union[str, Path] = ".", timezone: str = DEFAULT_TIMEZONE) -> List[Path]:
    """Escribe los artefactos pedidos y el sidecar de metadatos; devuelve las rutas"""
    if len(table) == 0:
        raise ParameterError("La tabla de resultados está vacía")
    fmt = ReportFormat(fmt)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    written: List[Path] = []
    if fmt in (ReportFormat.CSV, ReportFormat.BOTH):
        written.append(write_csv(table, out / f"{table.name}.csv"))
    if fmt in (ReportFormat.PLOT, ReportFormat.BOTH):
        written.extend(write_heatmaps(table, out) if table.is_phase else write_error_plot(table, out))
    if fmt is ReportFormat.XLSX:
        written.append(write_styled_excel(table_to_frame(table), out / f"{table.name}.xlsx"))
    written.append(write_meta(out / f"{table.name}.meta.json", table_meta(table), timezone))
    for path in written:
        logger.info("✅ %s", path)
    return written
