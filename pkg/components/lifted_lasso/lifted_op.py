"""
Operador lineal levantado

Representa el mapa X (K×M, complejo) -> y (N observaciones complejas)

    y[n] = b'_nᴴ X a'_n = Σ_j A[n, j] (B X)[n, j]

donde b'_n y a'_n son las n-ésimas columnas de Bᴴ y Aᵀ. En forma matricial
y = Φ vec(X) con vec por columnas y bloques Φ_j = [diag(b_1)a_j, ..., diag(b_K)a_j].

Φ nunca se materializa completa salvo en `dense_phi()` (instancias pequeñas,
oráculos de prueba); forward/adjoint usan la forma factorizada.

Los índices de columna son base 0.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

# Tolerancias por defecto del módulo
ORTHONORMAL_TOL = 1e-10
BLOCK_TOL = 1e-12
DENSE_ENTRY_LIMIT = 8_000_000


class DictionaryKind(str, Enum):
    GAUSSIAN = "gaussian"
    FOURIER_SPIKES = "fourier-spikes"


class SampleMode(str, Enum):
    DECIMATE = "decimate"
    BLOCK_AVERAGE = "block-average"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Dictionary:
    """
    Diccionario A (N×M)

    Para kind=fourier-spikes la matriz no se guarda: la columna j es la DFT 2-D
    (sin normalizar) de la espiga en la posición j de una grilla side×side.
    """

    def __init__(self, entries: Optional[np.ndarray], kind: DictionaryKind = DictionaryKind.GAUSSIAN,
                 grid_side: Optional[int] = None):
        self.kind = DictionaryKind(kind)
        if self.kind is DictionaryKind.FOURIER_SPIKES:
            if grid_side is None or grid_side < 1:
                raise ParameterError("Un diccionario de Fourier requiere grid_side >= 1")
            self.grid_side = int(grid_side)
            self._entries = None
            self.shape = (self.grid_side ** 2, self.grid_side ** 2)
        else:
            if entries is None:
                raise ParameterError("Faltan las entradas del diccionario")
            arr = np.array(entries)
            if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
                raise ShapeError(f"El diccionario debe ser una matriz N×M no vacía, se recibió {arr.shape}")
            if not np.iscomplexobj(arr):
                arr = arr.astype(float)
            self.grid_side = None
            self._entries = _frozen(arr)
            self.shape = arr.shape

    @classmethod
    def gaussian(cls, N: int, M: int, rng: np.random.Generator) -> "Dictionary":
        """Entradas i.i.d. normal estándar (reales)"""
        return cls(rng.standard_normal((N, M)), DictionaryKind.GAUSSIAN)

    @classmethod
    def from_array(cls, entries: np.ndarray) -> "Dictionary":
        return cls(entries, DictionaryKind.GAUSSIAN)

    @classmethod
    def fourier_spikes(cls, grid_side: int) -> "Dictionary":
        return cls(None, DictionaryKind.FOURIER_SPIKES, grid_side=grid_side)

    @property
    def N(self) -> int:
        return self.shape[0]

    @property
    def M(self) -> int:
        return self.shape[1]

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.M:
            raise ParameterError(f"Índice de columna {j} fuera de rango [0, {self.M})")
        if self._entries is not None:
            return self._entries[:, j]
        side = self.grid_side
        spike = np.zeros((side, side))
        spike[divmod(j, side)] = 1.0
        return np.fft.fft2(spike).ravel()

    def to_dense(self) -> np.ndarray:
        if self._entries is not None:
            return self._entries
        if self.N * self.M > DENSE_ENTRY_LIMIT:
            raise ParameterError(f"Diccionario de Fourier demasiado grande para materializar ({self.N}×{self.M})")
        side = self.grid_side
        idx = np.arange(side)
        F = np.exp(-2j * np.pi * np.outer(idx, idx) / side)
        return np.kron(F, F)


def _orthonormalize(columns: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(columns)
    diag = np.diag(R)
    scale = np.abs(diag).max() if diag.size else 0.0
    if scale == 0.0 or np.any(np.abs(diag) <= 1e-12 * scale):
        raise ParameterError("La base del subespacio no tiene rango completo")
    # diagonal de R real positiva
    return Q * (diag / np.abs(diag))[None, :]


class SubspaceBasis:
    """
    Base B (N×K) del subespacio común de modulación, con BᴴB = I_K

    Si la entrada se desvía de la ortonormalidad en más de `tol` (máxima
    desviación absoluta por entrada) se re-ortonormaliza con QR.
    """

    def __init__(self, columns: np.ndarray, tol: float = ORTHONORMAL_TOL):
        B = np.array(columns, dtype=complex)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise ShapeError(f"La base debe ser una matriz N×K, se recibió {B.shape}")
        N, K = B.shape
        if K < 1 or K >= N:
            raise ParameterError(f"Se requiere 1 <= K < N (K={K}, N={N})")
        deviation = np.abs(B.conj().T @ B - np.eye(K)).max()
        if deviation > tol:
            logger.debug("Base re-ortonormalizada (desviación %.3e)", deviation)
            B = _orthonormalize(B)
        self.columns = _frozen(B)
        self.mu_max = coherence(self)

    @classmethod
    def dft_first_k(cls, N: int, K: int) -> "SubspaceBasis":
        """Primeras K columnas de la DFT N×N normalizada"""
        F = np.fft.fft(np.eye(N), norm="ortho")
        return cls(F[:, :K])

    @classmethod
    def identity_first_k(cls, N: int, K: int) -> "SubspaceBasis":
        return cls(np.eye(N)[:, :K])

    @classmethod
    def random_orthonormal(cls, N: int, K: int, rng: np.random.Generator) -> "SubspaceBasis":
        G = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
        return cls(_orthonormalize(G))

    @property
    def N(self) -> int:
        return self.columns.shape[0]

    @property
    def K(self) -> int:
        return self.columns.shape[1]


def coherence(basis: SubspaceBasis) -> float:
    """μ_max = √N · max_ij |B_ij|, acotado a [1, √N]"""
    B = basis.columns
    N = B.shape[0]
    mu = float(np.sqrt(N) * np.abs(B).max())
    # redondeo: para B ortonormal el valor exacto ya está en el intervalo
    return float(np.clip(mu, 1.0, np.sqrt(N)))


class LiftedOperator(ABC):
    """Interfaz común de las variantes del operador levantado"""

    variant = "direct"

    def __init__(self, dictionary: Dictionary, basis: SubspaceBasis):
        self.dictionary = dictionary
        self.basis = basis

    @property
    @abstractmethod
    def n_obs(self) -> int:
        """Largo del vector de observaciones"""

    @property
    def K(self) -> int:
        return self.basis.K

    @property
    def M(self) -> int:
        return self.dictionary.M

    @property
    def x_shape(self) -> Tuple[int, int]:
        return (self.K, self.M)

    @abstractmethod
    def forward(self, X: np.ndarray) -> np.ndarray:
        """L(X)"""

    @abstractmethod
    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """L*(y)"""

    @abstractmethod
    def _block(self, j: int) -> np.ndarray:
        """Bloque Φ_j sin validar el índice"""

    def phi_block(self, j: int) -> np.ndarray:
        if not 0 <= j < self.M:
            raise ParameterError(f"Índice de bloque {j} fuera de rango [0, {self.M})")
        return self._block(j)

    def dense_phi(self) -> np.ndarray:
        """Φ densa (N×KM); solo para instancias pequeñas"""
        if self.n_obs * self.K * self.M > DENSE_ENTRY_LIMIT:
            raise ParameterError(f"Φ de {self.n_obs}×{self.K * self.M} es demasiado grande para materializar")
        return np.hstack([self._block(j) for j in range(self.M)])

    def restrict(self, support: Sequence[int]) -> "LiftedOperator":
        return SupportRestrictedOperator(self, support)

    def as_linear_operator(self) -> LinearOperator:
        """Φ como `LinearOperator` de scipy sobre vec(X) (orden por columnas)"""
        K, M = self.x_shape
        return LinearOperator(
            shape=(self.n_obs, K * M),
            matvec=lambda v: self.forward(np.reshape(v, (K, M), order="F")),
            rmatvec=lambda y: self.adjoint(np.ravel(y)).ravel(order="F"),
            dtype=complex,
        )

    def _check_x(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        if X.shape != self.x_shape:
            raise ShapeError(f"Se esperaba X de forma {self.x_shape}, se recibió {X.shape}")
        return X

    def _check_y(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != self.n_obs:
            raise ShapeError(f"Se esperaba y de largo {self.n_obs}, se recibió {y.shape}")
        return y


class DirectLiftedOperator(LiftedOperator):
    """Variante de diccionario explícito (gaussiano)"""

    variant = "direct"

    def __init__(self, dictionary: Dictionary, basis: SubspaceBasis):
        if dictionary.N != basis.N:
            raise ShapeError(f"A tiene {dictionary.N} filas y B tiene {basis.N}")
        super().__init__(dictionary, basis)
        self._A = dictionary.to_dense()
        self._B = basis.columns

    @property
    def n_obs(self) -> int:
        return self.dictionary.N

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = self._check_x(X)
        return np.sum(self._A * (self._B @ X), axis=1)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = self._check_y(y)
        return self._B.conj().T @ (y[:, None] * self._A.conj())

    def _block(self, j: int) -> np.ndarray:
        return self._B * self._A[:, j][:, None]

    def restrict(self, support: Sequence[int]) -> "DirectLiftedOperator":
        cols = _validate_support(support, self.M)
        return DirectLiftedOperator(Dictionary.from_array(self._A[:, cols]), self.basis)


def subsample(image: np.ndarray, factor: int, mode: SampleMode = SampleMode.BLOCK_AVERAGE) -> np.ndarray:
    """Sample[·] sobre los dos últimos ejes: diezmado o promedio por bloques factor×factor"""
    f = int(factor)
    if SampleMode(mode) is SampleMode.DECIMATE:
        return image[..., ::f, ::f]
    rows, cols = image.shape[-2:]
    if rows % f or cols % f:
        raise ShapeError(f"La imagen {rows}×{cols} no es divisible por el factor {f}")
    return image.reshape(*image.shape[:-2], rows // f, f, cols // f, f).mean(axis=(-3, -1))


def subsample_adjoint(frame: np.ndarray, factor: int, mode: SampleMode = SampleMode.BLOCK_AVERAGE) -> np.ndarray:
    f = int(factor)
    if SampleMode(mode) is SampleMode.DECIMATE:
        out = np.zeros((frame.shape[0] * f, frame.shape[1] * f), dtype=frame.dtype)
        out[::f, ::f] = frame
        return out
    return np.repeat(np.repeat(frame, f, axis=0), f, axis=1) / f ** 2


class SmiLiftedOperator(LiftedOperator):
    """
    Variante de microscopía: síntesis en Fourier, IDFT y submuestreo

        y = Sample{ IDFT_ortho[ Σ_k b_k ⊙ DFT(X_k) ] }

    con b_k la k-ésima columna de B (DFT unitaria del PSF rellenado y centrado
    en el origen) y X_k la fila k de X vista como imagen side×side. Equivale a
    convolución circular del PSF B'h_j con la espiga e_j.
    """

    variant = "smi"

    def __init__(self, dictionary: Dictionary, basis: SubspaceBasis, sample_factor: int,
                 sample_mode: SampleMode = SampleMode.BLOCK_AVERAGE):
        if dictionary.kind is not DictionaryKind.FOURIER_SPIKES:
            raise ParameterError("La variante smi requiere un diccionario fourier-spikes")
        if dictionary.N != basis.N:
            raise ShapeError(f"El diccionario tiene {dictionary.N} filas y B tiene {basis.N}")
        if sample_factor < 1:
            raise ParameterError("sample_factor debe ser un entero positivo")
        side = dictionary.grid_side
        if side % sample_factor:
            raise ShapeError(f"El lado {side} no es múltiplo del factor {sample_factor}")
        super().__init__(dictionary, basis)
        self.sample_factor = int(sample_factor)
        self.sample_mode = SampleMode(sample_mode)
        self.side = side
        self.low_side = side // self.sample_factor
        self._freq = _frozen(basis.columns.T.reshape(basis.K, side, side).copy())
        self._spatial = _frozen(np.fft.ifft2(self._freq, norm="ortho"))

    @property
    def n_obs(self) -> int:
        return self.low_side ** 2

    def position(self, j: int) -> Tuple[int, int]:
        """(fila, columna) de alta resolución del índice j"""
        return divmod(int(j), self.side)

    def sample(self, image: np.ndarray) -> np.ndarray:
        return subsample(image, self.sample_factor, self.sample_mode)

    def sample_adjoint(self, frame: np.ndarray) -> np.ndarray:
        return subsample_adjoint(frame, self.sample_factor, self.sample_mode)

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = self._check_x(X)
        spikes = np.fft.fft2(X.reshape(self.K, self.side, self.side))
        field = np.fft.ifft2(np.sum(self._freq * spikes, axis=0), norm="ortho")
        return self.sample(field).ravel()

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = self._check_y(y)
        field = self.sample_adjoint(y.reshape(self.low_side, self.low_side))
        U = np.fft.fft2(field, norm="ortho")
        # adjunta de la DFT sin normalizar: suma inversa sin escalar
        X = np.fft.ifft2(np.conj(self._freq) * U[None], norm="forward")
        return X.reshape(self.K, self.M)

    def _block(self, j: int) -> np.ndarray:
        shift = self.position(j)
        cols = [self.sample(np.roll(self._spatial[k], shift, axis=(0, 1))).ravel() for k in range(self.K)]
        return np.stack(cols, axis=1)


class SupportRestrictedOperator(LiftedOperator):
    """L restringido a las columnas de un soporte T"""

    def __init__(self, parent: LiftedOperator, support: Sequence[int]):
        self.parent = parent
        self.support = _validate_support(support, parent.M)
        super().__init__(parent.dictionary, parent.basis)
        self.variant = parent.variant

    @property
    def n_obs(self) -> int:
        return self.parent.n_obs

    @property
    def M(self) -> int:
        return len(self.support)

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = self._check_x(X)
        full = np.zeros(self.parent.x_shape, dtype=complex)
        full[:, self.support] = X
        return self.parent.forward(full)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.parent.adjoint(y)[:, self.support]

    def _block(self, j: int) -> np.ndarray:
        return self.parent.phi_block(int(self.support[j]))


def _validate_support(support: Sequence[int], M: int) -> np.ndarray:
    cols = np.asarray(support, dtype=int).ravel()
    if cols.size and (cols.min() < 0 or cols.max() >= M):
        raise ParameterError(f"Soporte fuera de rango [0, {M})")
    if np.unique(cols).size != cols.size:
        raise ParameterError("El soporte contiene índices repetidos")
    return cols


def lift_forward(op: LiftedOperator, X: np.ndarray) -> np.ndarray:
    return op.forward(X)


def lift_adjoint(op: LiftedOperator, y: np.ndarray) -> np.ndarray:
    return op.adjoint(y)


def phi_block(op: LiftedOperator, j: int) -> np.ndarray:
    return op.phi_block(j)


def inner(u: np.ndarray, v: np.ndarray) -> complex:
    """⟨u, v⟩ = Σ u · conj(v)"""
    return complex(np.vdot(v, u))
