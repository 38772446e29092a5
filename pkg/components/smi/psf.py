"""
Banco de PSF gaussianas y su subespacio de baja dimensión
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import svd

from components.lifted_lasso import ParameterError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_WIDTH_RANGE = (1.0, 4.0)
DEFAULT_PSF_COUNT = 9
MASS_TOL = 1e-9


def gaussian_psf(width: float, size: int) -> np.ndarray:
    """exp(−(x²+y²)/(2·width²)) en la grilla entera centrada, normalizada a suma 1"""
    if size < 1 or size % 2 == 0:
        raise ParameterError(f"El tamaño del PSF debe ser impar y positivo (se recibió {size})")
    if not width > 0:
        raise ParameterError("El ancho del PSF debe ser positivo")
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * width ** 2))
    return g / g.sum()


def default_psf_size(max_width: float) -> int:
    """Lado impar que cubre ±3 anchos"""
    return 2 * math.ceil(3.0 * max_width) + 1


@dataclass(frozen=True)
class PsfBank:
    psfs: np.ndarray
    widths: Tuple[float, ...]

    def __post_init__(self):
        psfs = np.asarray(self.psfs, dtype=float)
        if psfs.ndim != 3 or psfs.shape[1] != psfs.shape[2] or psfs.shape[1] % 2 == 0:
            raise ShapeError(f"El banco debe ser (count, H, H) con H impar, se recibió {psfs.shape}")
        if len(self.widths) != psfs.shape[0]:
            raise ShapeError("Debe haber un ancho por PSF")
        if np.any(np.abs(psfs.sum(axis=(1, 2)) - 1.0) > MASS_TOL):
            raise ParameterError("Cada PSF debe tener masa total 1")
        if not np.allclose(psfs, psfs[:, ::-1, ::-1], atol=1e-12):
            raise ParameterError("Cada PSF debe ser centrosimétrico")
        object.__setattr__(self, "psfs", psfs)
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    @property
    def size(self) -> int:
        return self.psfs.shape[1]

    @property
    def count(self) -> int:
        return self.psfs.shape[0]

    @property
    def width_range(self) -> Tuple[float, float]:
        return min(self.widths), max(self.widths)


def psf_bank(widths: Optional[Sequence[float]] = None, count: int = DEFAULT_PSF_COUNT,
             width_range: Tuple[float, float] = DEFAULT_WIDTH_RANGE, size: Optional[int] = None) -> PsfBank:
    """Banco de PSF; por defecto `count` anchos equiespaciados en `width_range`"""
    if widths is None:
        if count < 1:
            raise ParameterError("count debe ser positivo")
        widths = np.linspace(width_range[0], width_range[1], count)
    widths = [float(w) for w in widths]
    size = default_psf_size(max(widths)) if size is None else size
    return PsfBank(np.stack([gaussian_psf(w, size) for w in widths]), tuple(widths))


@dataclass(frozen=True)
class PsfSubspace:
    basis_spatial: np.ndarray
    singular_values: np.ndarray
    energy_ratio_k: float
    size: int

    @property
    def K(self) -> int:
        return self.basis_spatial.shape[1]

    def patch(self, h: np.ndarray) -> np.ndarray:
        """PSF B′h como imagen H×H"""
        return (self.basis_spatial @ np.asarray(h)).reshape(self.size, self.size)

    def coefficients(self, psf: np.ndarray) -> np.ndarray:
        """Proyección de un PSF H×H sobre la base: h = B′ᵀ vec(psf)"""
        psf = np.asarray(psf, dtype=float)
        if psf.shape != (self.size, self.size):
            raise ShapeError(f"Se esperaba un PSF {self.size}×{self.size}, se recibió {psf.shape}")
        return self.basis_spatial.T @ psf.ravel()

    def truncate(self, K: int) -> "PsfSubspace":
        if not 1 <= K <= self.K:
            raise ParameterError(f"K debe estar en [1, {self.K}]")
        energy = self.singular_values ** 2
        return PsfSubspace(self.basis_spatial[:, :K].copy(), self.singular_values,
                           float(energy[:K].sum() / energy.sum()), self.size)


def psf_subspace(bank: PsfBank, K: int) -> PsfSubspace:
    """Vectores singulares izquierdos dominantes de la matriz P×count de PSF vectorizados"""
    if not 1 <= K <= bank.count:
        raise ParameterError(f"K={K} debe estar en [1, {bank.count}] (número de PSF)")
    stacked = bank.psfs.reshape(bank.count, -1).T
    U, s, _ = svd(stacked, full_matrices=False)
    basis = U[:, :K]
    # signo: cada vector con suma positiva
    signs = np.where(basis.sum(axis=0) < 0, -1.0, 1.0)
    basis = basis * signs[None, :]
    energy = s ** 2
    ratio = float(energy[:K].sum() / energy.sum())
    logger.debug("Subespacio PSF K=%d: energía %.6f", K, ratio)
    return PsfSubspace(basis_spatial=basis, singular_values=s, energy_ratio_k=ratio, size=bank.size)
