"""
Solver de mínimos cuadrados con regularización ℓ2,1 (group lasso)

    min_X ½‖y − L(X)‖₂² + λ Σ_j ‖x_j‖₂

Modos:
- fista: gradiente proximal acelerado con reinicio adaptativo por valor de la
  función objetivo (monótono).
- bb-nonmonotone: pasos espectrales de Barzilai–Borwein con búsqueda lineal
  no monótona (estilo SpaRSA).

El gradiente usa la convención de Wirtinger g = L*(L(X) − y).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import NumericalFailureError, OperatorNormWarning, ParameterError
from .lifted_op import LiftedOperator

logger = logging.getLogger(__name__)

ACTIVE_FLOOR = 1e-10
BB_SUFFICIENT_DECREASE = 1e-5
BB_GROWTH = 2.0


class StepMode(str, Enum):
    FISTA = "fista"
    BB_NONMONOTONE = "bb-nonmonotone"


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    kkt_tol: float = 1e-6
    step_mode: StepMode = StepMode.FISTA
    lipschitz_power_iters: int = 50
    objective_stall_tol: float = 1e-12
    kkt_check_every: int = 10
    lipschitz_safety: float = 1.01
    lipschitz_rtol: float = 1e-3
    bb_memory: int = 5

    def __post_init__(self):
        object.__setattr__(self, "step_mode", StepMode(self.step_mode))
        for name in ("max_iters", "lipschitz_power_iters", "kkt_check_every", "bb_memory"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} debe ser un entero positivo")
        for name in ("kkt_tol", "objective_stall_tol", "lipschitz_rtol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} debe ser estrictamente positivo")
        if self.lipschitz_safety < 1.0:
            raise ParameterError("lipschitz_safety debe ser >= 1")


@dataclass
class GroupLassoSolution:
    estimate: np.ndarray
    objective_trace: List[float]
    iterations: int
    kkt_residual: float
    converged: bool
    lam: float
    restarts: int = 0
    step_mode: StepMode = StepMode.FISTA
    block_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))


def column_norms(X: np.ndarray) -> np.ndarray:
    return np.linalg.norm(X, axis=0)


def l21_norm(X: np.ndarray) -> float:
    return float(column_norms(X).sum())


def objective(op: LiftedOperator, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    r = op.forward(X) - y
    return 0.5 * float(np.vdot(r, r).real) + lam * l21_norm(X)


def block_soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Proximal de τ‖·‖₂: 0 si ‖v‖₂ <= τ, si no (1 − τ/‖v‖₂)·v"""
    if tau < 0:
        raise ParameterError("tau debe ser no negativo")
    v = np.asarray(v)
    norm = np.linalg.norm(v)
    if norm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / norm) * v


def prox_columns(V: np.ndarray, tau: float) -> np.ndarray:
    """block_soft_threshold aplicado a cada columna"""
    norms = column_norms(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return V * scale[None, :]


def operator_norm_sq(op: LiftedOperator, iters: int = 50, rtol: float = 1e-6, seed: int = 0) -> float:
    """
    Estima ‖Φ‖² por iteración de potencia sobre L*L

    Converge cuando el cociente de Rayleigh cambia menos de `rtol` (relativo)
    entre iteraciones. Si no converge en `iters` iteraciones emite
    `OperatorNormWarning` y devuelve la mejor estimación.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(op.x_shape) + 1j * rng.standard_normal(op.x_shape)
    X /= np.linalg.norm(X)
    best = 0.0
    for it in range(1, iters + 1):
        Z = op.adjoint(op.forward(X))
        nz = np.linalg.norm(Z)
        if nz == 0.0:
            return 0.0
        rayleigh = float(np.vdot(X, Z).real)
        if it > 1 and abs(rayleigh - best) <= rtol * rayleigh:
            return max(rayleigh, best)
        best = max(best, rayleigh)
        X = Z / nz
    warnings.warn(f"Iteración de potencia sin converger tras {iters} iteraciones (estimación {best:.6g})",
                  OperatorNormWarning, stacklevel=2)
    return best


def _kkt_from_gradient(X: np.ndarray, G: np.ndarray, lam: float) -> Tuple[float, np.ndarray]:
    xn = column_norms(X)
    gn = column_norms(G)
    top = xn.max() if xn.size else 0.0
    active = xn > ACTIVE_FLOOR * top if top > 0 else np.zeros(xn.shape, dtype=bool)
    violation = np.maximum(gn - lam, 0.0)
    block_norms = gn / lam
    if np.any(active):
        unit = X[:, active] / xn[active][None, :]
        violation[active] = np.linalg.norm(G[:, active] + lam * unit, axis=0)
        block_norms[active] = 1.0
    residual = float(violation.max()) if violation.size else 0.0
    return residual, block_norms


def kkt_check(op: LiftedOperator, X: np.ndarray, y: np.ndarray, lam: float) -> Tuple[float, np.ndarray]:
    """
    Violación de la condición de primer orden y normas ‖s_j‖₂ del certificado dual

    Bloques activos (‖x_j‖ > 1e-10·max‖x_k‖): ‖g_j + λ x_j/‖x_j‖‖₂ y norma 1.
    Bloques nulos: max(0, ‖g_j‖₂ − λ) y norma ‖g_j‖₂/λ.
    """
    if not lam > 0:
        raise ParameterError("lambda debe ser estrictamente positivo")
    X = op._check_x(X)
    y = op._check_y(y)
    G = op.adjoint(op.forward(X) - y)
    return _kkt_from_gradient(X, G, lam)


def solve_group_lasso(op: LiftedOperator, y: np.ndarray, lam: float, opts: Optional[SolverOptions] = None,
                      x_init: Optional[np.ndarray] = None) -> GroupLassoSolution:
    """Resuelve el problema group lasso; parte de X = 0 salvo que se indique x_init"""
    if not lam > 0:
        raise ParameterError("lambda debe ser estrictamente positivo")
    opts = opts or SolverOptions()
    y = op._check_y(np.asarray(y, dtype=complex))
    X = np.zeros(op.x_shape, dtype=complex) if x_init is None else np.array(op._check_x(x_init), dtype=complex)

    lipschitz = operator_norm_sq(op, opts.lipschitz_power_iters, opts.lipschitz_rtol) * opts.lipschitz_safety
    trace = [objective(op, X, y, lam)]
    if lipschitz == 0.0:
        # operador nulo: el término cuadrático es constante
        X = np.zeros(op.x_shape, dtype=complex)
        trace.append(objective(op, X, y, lam))
        iterations, restarts = 0, 0
    elif opts.step_mode is StepMode.FISTA:
        X, iterations, restarts = _run_fista(op, y, lam, X, lipschitz, opts, trace)
    else:
        X, iterations, restarts = _run_bb(op, y, lam, X, lipschitz, opts, trace)

    residual, block_norms = kkt_check(op, X, y, lam)
    converged = residual <= opts.kkt_tol
    logger.debug("group lasso %s: %d iteraciones, %d reinicios, KKT %.3e", opts.step_mode.value,
                 iterations, restarts, residual)
    if not converged:
        logger.warning("Solver sin converger: KKT %.3e > %.1e tras %d iteraciones", residual, opts.kkt_tol, iterations)
    return GroupLassoSolution(
        estimate=X,
        objective_trace=trace,
        iterations=iterations,
        kkt_residual=residual,
        converged=converged,
        lam=lam,
        restarts=restarts,
        step_mode=opts.step_mode,
        block_norms=block_norms,
    )


def _stalled(prev: float, new: float, X: np.ndarray, Xn: np.ndarray, tol: float) -> bool:
    small_decrease = abs(prev - new) <= tol * max(1.0, abs(new))
    small_step = np.linalg.norm(Xn - X) <= tol * max(1.0, np.linalg.norm(X))
    return small_decrease and small_step


def _run_fista(op, y, lam, X, lipschitz, opts: SolverOptions, trace: List[float]):
    step = 1.0 / lipschitz
    Y = X.copy()
    t = 1.0
    restarts = 0
    just_restarted = True
    it = 0
    for it in range(1, opts.max_iters + 1):
        G = op.adjoint(op.forward(Y) - y)
        Xn = prox_columns(Y - step * G, step * lam)
        value = objective(op, Xn, y, lam)
        if not np.isfinite(value):
            raise NumericalFailureError(it, value)
        if value > trace[-1]:
            if just_restarted:
                # ni siquiera el paso proximal simple desciende: precisión agotada
                break
            # reinicio adaptativo: se descarta el paso y se reinicia el momento
            Y, t = X, 1.0
            restarts += 1
            just_restarted = True
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Y = Xn + ((t - 1.0) / t_next) * (Xn - X)
        stalled = _stalled(trace[-1], value, X, Xn, opts.objective_stall_tol)
        X, t = Xn, t_next
        just_restarted = False
        trace.append(value)
        if stalled:
            break
        if it % opts.kkt_check_every == 0:
            G_x = op.adjoint(op.forward(X) - y)
            if _kkt_from_gradient(X, G_x, lam)[0] <= opts.kkt_tol:
                break
    return X, it, restarts


def _run_bb(op, y, lam, X, lipschitz, opts: SolverOptions, trace: List[float]):
    alpha_max = lipschitz
    alpha_min = 1e-8 * lipschitz
    alpha = lipschitz
    G = op.adjoint(op.forward(X) - y)
    it = 0
    for it in range(1, opts.max_iters + 1):
        reference = max(trace[-opts.bb_memory:])
        while True:
            Xn = prox_columns(X - G / alpha, lam / alpha)
            value = objective(op, Xn, y, lam)
            if not np.isfinite(value):
                raise NumericalFailureError(it, value)
            S = Xn - X
            decrease = 0.5 * BB_SUFFICIENT_DECREASE * alpha * float(np.vdot(S, S).real)
            if value <= reference - decrease or alpha >= alpha_max:
                break
            alpha = min(alpha * BB_GROWTH, alpha_max)
        Gn = op.adjoint(op.forward(Xn) - y)
        ss = float(np.vdot(S, S).real)
        stalled = _stalled(trace[-1], value, X, Xn, opts.objective_stall_tol)
        if ss > 0:
            # paso espectral: ‖Φ s‖² / ‖s‖²
            alpha = float(np.clip(np.vdot(S, Gn - G).real / ss, alpha_min, alpha_max))
        X, G = Xn, Gn
        trace.append(value)
        if _kkt_from_gradient(X, G, lam)[0] <= opts.kkt_tol or stalled:
            break
    return X, it, 0
