"""
Instancias sintéticas sembradas y métricas de soporte/error

Protocolo de simulación: A con entradas normal estándar reales, B según
`basis_kind` (por defecto las primeras K columnas de la DFT normalizada), soporte
T uniforme sin reemplazo, columnas en soporte c_j h_j con c_j y h_j gaussianos
complejos estándar, ruido complejo con partes real e imaginaria N(0, σ²).

Flujos aleatorios: generador contador Philox con clave `seed XOR índice de ensayo`,
de modo que los ensayos paralelos son reproducibles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .lifted_op import DirectLiftedOperator, Dictionary, LiftedOperator, SubspaceBasis
from .solver import column_norms
from .theory import BoundInputs, gamma_zero

logger = logging.getLogger(__name__)

DEFAULT_SUPPORT_THRESHOLD = 1e-4
_SEED_MASK = (1 << 64) - 1


class BasisKind(str, Enum):
    DFT_FIRST_K = "dft-first-k"
    IDENTITY_FIRST_K = "identity-first-k"
    RANDOM_ORTHONORMAL = "random-orthonormal"


def trial_rng(seed: int, trial_index: int = 0) -> np.random.Generator:
    """Generador Philox con clave seed ⊕ trial_index (64 bits)"""
    key = (int(seed) ^ int(trial_index)) & _SEED_MASK
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class InstanceParams:
    N: int = 100
    M: int = 150
    K: int = 3
    J: int = 3
    sigma: float = 0.1
    basis_kind: BasisKind = BasisKind.DFT_FIRST_K
    gamma_target: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "basis_kind", BasisKind(self.basis_kind))
        if min(self.N, self.M, self.K, self.J) < 1:
            raise ParameterError("N, M, K y J deben ser enteros positivos")
        if self.J > self.M:
            raise ParameterError(f"J={self.J} excede M={self.M}")
        if self.K >= self.N:
            raise ParameterError(f"Se requiere K < N (K={self.K}, N={self.N})")
        if self.sigma < 0:
            raise ParameterError("sigma debe ser no negativo")
        if self.gamma_target is not None and self.gamma_target <= 0:
            raise ParameterError("gamma_target debe ser positivo")


@dataclass
class Instance:
    params: InstanceParams
    op: LiftedOperator
    X0: np.ndarray
    support: np.ndarray
    noise: np.ndarray
    y: np.ndarray

    @property
    def X0_T(self) -> np.ndarray:
        return self.X0[:, self.support]

    def bound_inputs(self, **overrides) -> BoundInputs:
        p = self.params
        values = dict(N=p.N, M=p.M, K=p.K, J=p.J, sigma=p.sigma, mu_max=self.op.basis.mu_max)
        values.update(overrides)
        return BoundInputs(**values)


@dataclass(frozen=True)
class SupportMetrics:
    recovered_support: Tuple[int, ...]
    exact: bool
    l2inf_error: float
    true_support: Tuple[int, ...] = field(default=())


def make_basis(kind: BasisKind, N: int, K: int, rng: np.random.Generator) -> SubspaceBasis:
    kind = BasisKind(kind)
    if kind is BasisKind.DFT_FIRST_K:
        return SubspaceBasis.dft_first_k(N, K)
    if kind is BasisKind.IDENTITY_FIRST_K:
        return SubspaceBasis.identity_first_k(N, K)
    return SubspaceBasis.random_orthonormal(N, K, rng)


def gen_instance(p: InstanceParams) -> Instance:
    """Instancia determinista a partir de (params, seed)"""
    rng = trial_rng(p.seed)
    dictionary = Dictionary.gaussian(p.N, p.M, rng)
    basis = make_basis(p.basis_kind, p.N, p.K, rng)
    op = DirectLiftedOperator(dictionary, basis)

    support = np.sort(rng.choice(p.M, size=p.J, replace=False))
    c = rng.standard_normal(p.J) + 1j * rng.standard_normal(p.J)
    h = rng.standard_normal((p.K, p.J)) + 1j * rng.standard_normal((p.K, p.J))
    X0 = np.zeros((p.K, p.M), dtype=complex)
    X0[:, support] = h * c[None, :]

    if p.gamma_target is not None:
        g0 = gamma_zero(BoundInputs(N=p.N, M=p.M, K=p.K, J=p.J, sigma=p.sigma, mu_max=basis.mu_max))
        if g0 == 0:
            raise DomainError("gamma_target requiere γ₀ > 0 (sigma = 0)")
        # un solo factor común: se conserva la forma de la verdad de terreno
        X0 *= g0 / (p.gamma_target * column_norms(X0[:, support]).min())

    if p.sigma > 0:
        noise = p.sigma * (rng.standard_normal(p.N) + 1j * rng.standard_normal(p.N))
    else:
        noise = np.zeros(p.N, dtype=complex)
    y = op.forward(X0) + noise
    return Instance(params=p, op=op, X0=X0, support=support, noise=noise, y=y)


def extract_support(X: np.ndarray, rel_threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> Tuple[int, ...]:
    """{ j : ‖x_j‖₂ > rel_threshold · max_k ‖x_k‖₂ }"""
    if not 0 <= rel_threshold < 1:
        raise ParameterError("rel_threshold debe estar en [0, 1)")
    norms = column_norms(np.asarray(X))
    top = norms.max() if norms.size else 0.0
    if top == 0:
        return ()
    return tuple(int(j) for j in np.flatnonzero(norms > rel_threshold * top))


def l2inf_error(Xhat: np.ndarray, X0: np.ndarray) -> float:
    """‖X̂ − X₀‖_{2,∞}"""
    Xhat, X0 = np.asarray(Xhat), np.asarray(X0)
    if Xhat.shape != X0.shape:
        raise ShapeError(f"Formas distintas: {Xhat.shape} y {X0.shape}")
    if Xhat.size == 0:
        return 0.0
    return float(column_norms(Xhat - X0).max())


def support_metrics(Xhat: np.ndarray, X0: np.ndarray, support, rel_threshold: float = DEFAULT_SUPPORT_THRESHOLD
                    ) -> SupportMetrics:
    recovered = extract_support(Xhat, rel_threshold)
    truth = tuple(sorted(int(j) for j in support))
    return SupportMetrics(recovered_support=recovered, exact=recovered == truth,
                          l2inf_error=l2inf_error(Xhat, X0), true_support=truth)


def with_seed(p: InstanceParams, seed: int) -> InstanceParams:
    return replace(p, seed=seed)
