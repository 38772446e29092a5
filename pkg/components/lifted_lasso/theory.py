"""
Cotas del teorema de recuperación de soporte y su aparato de prueba

- Calculadoras de cotas (λ mínimo, número de observaciones, error ℓ2,∞, γ₀).
- Residuo de isometría de Φ_TᴴΦ_T.
- Certificado primal-dual (testigo) sobre un soporte T.
- Validación Monte Carlo de las colas gaussianas cuadráticas.

Las constantes C_{α,·} no tienen valor numérico conocido: por defecto valen 1.0
y las calculadoras predicen la forma (escalamiento), no umbrales absolutos.
Todos los logaritmos son naturales.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh

from .errors import DomainError, ParameterError, ShapeError
from .lifted_op import LiftedOperator
from .solver import ACTIVE_FLOOR, SolverOptions, column_norms, solve_group_lasso

logger = logging.getLogger(__name__)

GRAM_EIG_FLOOR = 1e-10
TAIL_CHUNK = 20_000


@dataclass(frozen=True)
class BoundInputs:
    N: float
    M: int
    K: int
    J: int
    sigma: float
    mu_max: float = 1.0
    alpha: float = 2.0
    c_alpha_1: float = 1.0
    c_alpha_2: float = 1.0
    c_alpha_err: float = 1.0

    def __post_init__(self):
        if self.N <= 0 or self.M < 1 or self.K < 1:
            raise ParameterError("N, M y K deben ser positivos")
        if self.J < 1:
            raise DomainError("J debe ser >= 1 (log J)")
        if self.J >= self.M:
            raise DomainError(f"Se requiere J < M (J={self.J}, M={self.M}); log(M − J) no está definido")
        if self.K >= self.N:
            raise ParameterError(f"Se requiere K < N (K={self.K}, N={self.N})")
        if self.sigma < 0:
            raise ParameterError("sigma debe ser no negativo")
        if self.alpha <= 1:
            raise ParameterError("alpha debe ser > 1")
        if not 1.0 - 1e-9 <= self.mu_max <= math.sqrt(self.N) + 1e-9:
            raise ParameterError(f"mu_max={self.mu_max} fuera de [1, √N]")
        if min(self.c_alpha_1, self.c_alpha_2, self.c_alpha_err) <= 0:
            raise ParameterError("Las constantes C_α deben ser positivas")

    @property
    def log_terms(self) -> float:
        """log(M − J) + log N"""
        return math.log(self.M - self.J) + math.log(self.N)


def lambda_lower_bound(b: BoundInputs) -> float:
    """√(C_{α,2} σ² μ² K [log(M−J) + log N])"""
    return math.sqrt(b.c_alpha_2 * b.sigma ** 2 * b.mu_max ** 2 * b.K * b.log_terms)


def sample_complexity_bound(b: BoundInputs) -> float:
    """C_{α,1} μ² J K [log(M−J) + log² N]"""
    return b.c_alpha_1 * b.mu_max ** 2 * b.J * b.K * (math.log(b.M - b.J) + math.log(b.N) ** 2)


def error_bound(b: BoundInputs, lam: float) -> float:
    """
    √(C_α σ² μ² J K [log J + log N]) + 4√J λ

    También es el umbral de recuperación exacta sobre min_{j∈T} ‖x₀ⱼ‖₂.
    """
    if lam < 0:
        raise ParameterError("lambda debe ser no negativo")
    noise_term = math.sqrt(b.c_alpha_err * b.sigma ** 2 * b.mu_max ** 2 * b.J * b.K
                           * (math.log(b.J) + math.log(b.N)))
    return noise_term + 4.0 * math.sqrt(b.J) * lam


def gamma_zero(b: BoundInputs) -> float:
    """γ₀: la cota de λ con C_{α,2} = 1"""
    return lambda_lower_bound(replace(b, c_alpha_2=1.0))


def lambda_k_range(b: BoundInputs, gamma: float) -> Tuple[float, float]:
    """
    Intervalo admisible de k (λ = k·γ₀) para recuperación exacta: C₁ <= k < C₄/γ − C₅

    C₁ = √C_{α,2}, C₃ = 4√J, C₂ el término de ruido de la cota de error,
    C₄ = 1/C₃ y C₅ = C₂/(C₃ γ₀).
    """
    if gamma <= 0:
        raise ParameterError("gamma debe ser positivo")
    g0 = gamma_zero(b)
    if g0 == 0:
        raise DomainError("γ₀ = 0 (sigma = 0): el intervalo de k no está definido")
    c3 = 4.0 * math.sqrt(b.J)
    c2 = error_bound(b, 0.0)
    return math.sqrt(b.c_alpha_2), 1.0 / (c3 * gamma) - c2 / (c3 * g0)


def _support_array(support: Sequence[int], M: int) -> np.ndarray:
    T = np.asarray(sorted(int(j) for j in support), dtype=int)
    if T.size and (T[0] < 0 or T[-1] >= M or np.unique(T).size != T.size):
        raise ParameterError(f"Soporte inválido para M={M}")
    return T


def support_phi(op: LiftedOperator, support: Sequence[int]) -> np.ndarray:
    """Φ_T densa (N×JK)"""
    T = _support_array(support, op.M)
    if T.size == 0:
        return np.zeros((op.n_obs, 0), dtype=complex)
    return np.hstack([op.phi_block(int(j)) for j in T])


def isometry_residual(op: LiftedOperator, support: Sequence[int]) -> float:
    """‖Φ_TᴴΦ_T − I‖ (norma espectral); 0 para T vacío"""
    phi_t = support_phi(op, support)
    if phi_t.shape[1] == 0:
        return 0.0
    eigs = eigvalsh(phi_t.conj().T @ phi_t)
    return float(np.abs(eigs - 1.0).max())


def gram_inverse_norm(op: LiftedOperator, support: Sequence[int]) -> float:
    """‖(Φ_TᴴΦ_T)⁻¹‖; inf si el Gram es singular"""
    phi_t = support_phi(op, support)
    if phi_t.shape[1] == 0:
        return 0.0
    smallest = float(eigvalsh(phi_t.conj().T @ phi_t)[0])
    return 1.0 / smallest if smallest > GRAM_EIG_FLOOR else math.inf


@dataclass
class WitnessReport:
    gram_min_eig: float
    gram_invertible: bool
    isometry_residual: float
    s_T: np.ndarray
    s_TC_block_norms: np.ndarray
    certified: bool
    delta_x: np.ndarray
    support: np.ndarray
    complement: np.ndarray
    X_T_hat: Optional[np.ndarray] = None
    s_TC: Optional[np.ndarray] = None
    s_TC_delta_route: Optional[np.ndarray] = None
    route_gap: float = 0.0
    phi_T_noise_l2inf: float = 0.0

    @property
    def max_off_support_norm(self) -> float:
        """‖s_{T^C}‖_{2,∞}; 0 si T^C es vacío"""
        norms = self.s_TC_block_norms
        return float(norms.max()) if norms.size else 0.0


def witness_certificate(op: LiftedOperator, support: Sequence[int], X0_T: np.ndarray, noise: np.ndarray,
                        lam: float, opts: Optional[SolverOptions] = None) -> WitnessReport:
    """
    Construcción primal-dual sobre el soporte T

    1. Resuelve el problema restringido a T (mismo solver, operador restringido).
    2. Forma s_T según el subgradiente de la solución restringida.
    3. Calcula s_{T^C} = Φ_{T^C}ᴴ(I − Φ_T G⁻¹Φ_Tᴴ)(n/λ) + Φ_{T^C}ᴴΦ_T G⁻¹ s_T con G = Φ_TᴴΦ_T.

    Certifica si G es invertible y todas las normas de bloque de s_{T^C} son < 1.
    """
    if not lam > 0:
        raise ParameterError("lambda debe ser estrictamente positivo")
    K, M = op.x_shape
    T = _support_array(support, M)
    if T.size == 0:
        raise ParameterError("El soporte no puede ser vacío")
    X0_T = np.asarray(X0_T, dtype=complex)
    if X0_T.shape != (K, T.size):
        raise ShapeError(f"X0_T debe ser {K}×{T.size}, se recibió {X0_T.shape}")
    noise = op._check_y(np.asarray(noise, dtype=complex))
    complement = np.setdiff1d(np.arange(M), T)

    phi_t = support_phi(op, T)
    gram = phi_t.conj().T @ phi_t
    eigs = eigvalsh(gram)
    min_eig = float(eigs[0])
    iso = float(np.abs(eigs - 1.0).max())
    invertible = min_eig >= GRAM_EIG_FLOOR
    phi_t_noise = phi_t.conj().T @ noise
    noise_l2inf = float(column_norms(phi_t_noise.reshape((K, T.size), order="F")).max())

    if not invertible:
        logger.info("Gram de soporte singular (λ_min = %.3e); sin certificado", min_eig)
        nan_vec = np.full(K * T.size, np.nan, dtype=complex)
        return WitnessReport(
            gram_min_eig=min_eig, gram_invertible=False, isometry_residual=iso,
            s_T=nan_vec, s_TC_block_norms=np.full(complement.size, np.nan), certified=False,
            delta_x=nan_vec.copy(), support=T, complement=complement, phi_T_noise_l2inf=noise_l2inf,
        )

    restricted = op.restrict(T)
    y = restricted.forward(X0_T) + noise
    X_T = solve_group_lasso(restricted, y, lam, opts).estimate

    # subgradiente de la solución restringida
    xn = column_norms(X_T)
    active = xn > ACTIVE_FLOOR * xn.max() if xn.max() > 0 else np.zeros(xn.shape, dtype=bool)
    S_T = restricted.adjoint(y - restricted.forward(X_T)) / lam
    S_T[:, active] = X_T[:, active] / xn[active][None, :]
    s_T = S_T.ravel(order="F")

    factor = cho_factor(gram)
    delta = cho_solve(factor, phi_t_noise - lam * s_T)

    w = noise / lam - phi_t @ cho_solve(factor, phi_t_noise) / lam + phi_t @ cho_solve(factor, s_T)
    S_TC = op.adjoint(w)[:, complement]
    S_TC_delta = op.adjoint((noise - phi_t @ delta) / lam)[:, complement]
    gap = float(np.abs(S_TC - S_TC_delta).max()) if complement.size else 0.0

    norms = column_norms(S_TC)
    max_norm = float(norms.max()) if norms.size else 0.0
    return WitnessReport(
        gram_min_eig=min_eig,
        gram_invertible=True,
        isometry_residual=iso,
        s_T=s_T,
        s_TC_block_norms=norms,
        certified=max_norm < 1.0,
        delta_x=delta,
        support=T,
        complement=complement,
        X_T_hat=X_T,
        s_TC=S_TC,
        s_TC_delta_route=S_TC_delta,
        route_gap=gap,
        phi_T_noise_l2inf=noise_l2inf,
    )


def tail_threshold(H: np.ndarray, sigma: float, alpha: float, complex_input: bool, sharp: bool = False) -> float:
    """Umbral de la cola cuadrática para ‖Ha‖₂²"""
    Sigma = H.conj().T @ H
    tr = float(np.trace(Sigma).real)
    if not sharp:
        if complex_input:
            return sigma ** 2 * (2.0 + (2.0 * math.sqrt(2.0) + 2.0) * alpha) * tr
        return sigma ** 2 * (1.0 + 4.0 * alpha) * tr
    tr_sq = float(np.linalg.norm(Sigma, "fro") ** 2)
    spec = float(eigvalsh(Sigma)[-1]) if Sigma.size else 0.0
    if complex_input:
        return sigma ** 2 * (2.0 * tr + 2.0 * math.sqrt(2.0 * tr_sq * alpha) + 2.0 * spec * alpha)
    return sigma ** 2 * (tr + 2.0 * math.sqrt(tr_sq * alpha) + 2.0 * spec * alpha)


def tail_bound_check(K: int, N: int, sigma: float, alpha: float, trials: int, complex_input: bool = True,
                     rng_seed: int = 0, H: Optional[np.ndarray] = None, sharp: bool = False) -> Tuple[float, float]:
    """
    Tasa empírica de ‖Ha‖₂² sobre el umbral y la cota e^{−α}

    H (K×N complejo) se sortea una vez por llamada; las colas se enuncian
    condicionadas a H.
    """
    if trials < 1000:
        raise ParameterError("Se requieren al menos 1000 ensayos")
    if sigma <= 0:
        raise ParameterError("sigma debe ser positivo")
    if alpha <= (0 if sharp else 1):
        raise ParameterError("alpha fuera de rango (> 1, o > 0 con sharp)")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    if H is None:
        H = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / math.sqrt(2.0)
    H = np.asarray(H, dtype=complex)
    if H.shape != (K, N):
        raise ShapeError(f"H debe ser {K}×{N}, se recibió {H.shape}")
    threshold = tail_threshold(H, sigma, alpha, complex_input, sharp)

    exceed = 0
    remaining = trials
    while remaining > 0:
        batch = min(remaining, TAIL_CHUNK)
        a = sigma * rng.standard_normal((batch, N))
        if complex_input:
            a = a + 1j * sigma * rng.standard_normal((batch, N))
        energy = np.sum(np.abs(a @ H.T) ** 2, axis=1)
        exceed += int(np.count_nonzero(energy > threshold))
        remaining -= batch
    rate = exceed / trials
    logger.debug("cola cuadrática: %d/%d sobre %.4g", exceed, trials, threshold)
    return rate, math.exp(-alpha)
