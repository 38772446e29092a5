"""
Componente Lifted Lasso
Recuperación de matrices con columnas dispersas a partir de observaciones levantadas
(group lasso), cotas teóricas de recuperación de soporte y su verificación empírica
"""

from .errors import (
    ConfigError,
    DomainError,
    FrameStackFormatError,
    LiftedLassoError,
    NumericalFailureError,
    OperatorNormWarning,
    ParameterError,
    ShapeError,
)
from .instance_io import InstanceFormatError, load_instance, save_instance
from .lifted_op import (
    DirectLiftedOperator,
    Dictionary,
    DictionaryKind,
    LiftedOperator,
    SampleMode,
    SmiLiftedOperator,
    SubspaceBasis,
    coherence,
    inner,
    lift_adjoint,
    lift_forward,
    phi_block,
    subsample,
    subsample_adjoint,
)
from .solver import (
    GroupLassoSolution,
    SolverOptions,
    StepMode,
    block_soft_threshold,
    kkt_check,
    objective,
    operator_norm_sq,
    solve_group_lasso,
)
from .synth_metrics import (
    BasisKind,
    Instance,
    InstanceParams,
    SupportMetrics,
    extract_support,
    gen_instance,
    l2inf_error,
    support_metrics,
    trial_rng,
)
from .theory import (
    BoundInputs,
    WitnessReport,
    error_bound,
    gamma_zero,
    gram_inverse_norm,
    isometry_residual,
    lambda_k_range,
    lambda_lower_bound,
    sample_complexity_bound,
    tail_bound_check,
    witness_certificate,
)

__all__ = [
    'ConfigError', 'DomainError', 'FrameStackFormatError', 'LiftedLassoError', 'NumericalFailureError',
    'OperatorNormWarning', 'ParameterError', 'ShapeError',
    'InstanceFormatError', 'load_instance', 'save_instance',
    'DirectLiftedOperator', 'Dictionary', 'DictionaryKind', 'LiftedOperator', 'SampleMode',
    'SmiLiftedOperator', 'SubspaceBasis', 'coherence', 'inner', 'lift_adjoint', 'lift_forward', 'phi_block',
    'subsample', 'subsample_adjoint',
    'GroupLassoSolution', 'SolverOptions', 'StepMode', 'block_soft_threshold', 'kkt_check', 'objective',
    'operator_norm_sq', 'solve_group_lasso',
    'BasisKind', 'Instance', 'InstanceParams', 'SupportMetrics', 'extract_support', 'gen_instance',
    'l2inf_error', 'support_metrics', 'trial_rng',
    'BoundInputs', 'WitnessReport', 'error_bound', 'gamma_zero', 'gram_inverse_norm', 'isometry_residual',
    'lambda_k_range', 'lambda_lower_bound', 'sample_complexity_bound', 'tail_bound_check',
    'witness_certificate',
]
