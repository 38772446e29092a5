"""
Componente Experimentos
Grillas de diagramas de fase y de escalamiento del error, con reportes CSV/gráficos/Excel
"""

from .report import ReportFormat, emit_report, read_report_csv, table_to_frame, write_meta, write_styled_excel
from .runner import (
    EXPERIMENTS,
    Axis,
    ExperimentRecord,
    ExperimentTable,
    GridSpec,
    LinearFit,
    MonotonicitySummary,
    PhaseCrossing,
    boundary_fit,
    default_grid,
    linear_fit,
    monotonicity_summary,
    phase_boundary,
    run_error_vs_j,
    run_error_vs_lambda,
    run_experiment,
    run_grid,
    run_lambda_gamma_phase,
    run_n_vs_j_phase,
    run_n_vs_k_phase,
)

__all__ = [
    'ReportFormat', 'emit_report', 'read_report_csv', 'table_to_frame', 'write_meta', 'write_styled_excel',
    'EXPERIMENTS', 'Axis', 'ExperimentRecord', 'ExperimentTable', 'GridSpec', 'LinearFit', 'MonotonicitySummary',
    'PhaseCrossing', 'boundary_fit', 'default_grid', 'linear_fit', 'monotonicity_summary', 'phase_boundary',
    'run_error_vs_j', 'run_error_vs_lambda', 'run_experiment', 'run_grid', 'run_lambda_gamma_phase',
    'run_n_vs_j_phase', 'run_n_vs_k_phase',
]
