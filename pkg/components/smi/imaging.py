"""
Microscopía de molécula única: modelo de observación, síntesis y recuperación por cuadro

Grilla de alta resolución side×side con side = n·factor; el índice de columna j
corresponde al píxel divmod(j, side). Cada fuente aporta c_j·(B′h_j) centrado en su
píxel; el cuadro observado es Sample[·] de la suma.

Modelo espacial: los parches se truncan en los bordes (sin envolver). Modelo de
Fourier (`smi_operator`): convolución circular. Coinciden mientras el parche
quepa completo en la grilla.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from components.lifted_lasso import (
    Dictionary,
    ParameterError,
    SampleMode,
    ShapeError,
    SmiLiftedOperator,
    SolverOptions,
    StepMode,
    SubspaceBasis,
    extract_support,
    solve_group_lasso,
    subsample,
    trial_rng,
)
from components.lifted_lasso.synth_metrics import DEFAULT_SUPPORT_THRESHOLD

from .psf import PsfSubspace, gaussian_psf

logger = logging.getLogger(__name__)

LOWRES_PITCH_NM = 100.0
HIGHRES_FACTOR = 5
MAX_EMITTERS_PER_FRAME = 18


@dataclass(frozen=True)
class Emitter:
    row: int
    col: int
    intensity: float
    width: float


@dataclass(frozen=True)
class FrameStack:
    frames: np.ndarray
    pixel_pitch_nm: float = LOWRES_PITCH_NM
    highres_factor: int = HIGHRES_FACTOR
    mean_subtracted: bool = False

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3:
            raise ShapeError(f"Se esperaba una pila (count, alto, ancho), se recibió {frames.shape}")
        if self.highres_factor < 1:
            raise ParameterError("highres_factor debe ser positivo")
        object.__setattr__(self, "frames", frames)

    @property
    def count(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> Tuple[int, int]:
        return self.frames.shape[1:]

    @property
    def highres_pitch_nm(self) -> float:
        return self.pixel_pitch_nm / self.highres_factor

    def subtract_mean(self) -> "FrameStack":
        """Resta la intensidad media de toda la pila"""
        if self.count == 0:
            return self
        return replace(self, frames=self.frames - self.frames.mean(), mean_subtracted=True)


@dataclass(frozen=True)
class HighResImage:
    image: np.ndarray
    pixel_pitch_nm: float = LOWRES_PITCH_NM / HIGHRES_FACTOR

    def __post_init__(self):
        image = np.asarray(self.image, dtype=float)
        if image.ndim != 2:
            raise ShapeError("La imagen de alta resolución debe ser 2-D")
        if np.any(image < 0):
            raise ParameterError("La imagen de alta resolución debe ser no negativa")
        object.__setattr__(self, "image", image)


@dataclass
class FrameRecovery:
    side: int
    indices: np.ndarray
    intensities: np.ndarray
    estimate: np.ndarray
    residual_norm: float
    converged: bool
    lam: float
    frame_index: int = 0
    iterations: int = 0
    kkt_residual: float = field(default=0.0)

    @property
    def positions(self) -> List[Tuple[int, int]]:
        return [divmod(int(j), self.side) for j in self.indices]

    def peak(self) -> Optional[Tuple[int, int]]:
        """Posición de mayor intensidad recuperada"""
        if self.indices.size == 0:
            return None
        return divmod(int(self.indices[np.argmax(self.intensities)]), self.side)


def _grid_side(M: int, factor: int) -> int:
    side = int(round(np.sqrt(M)))
    if side * side != M:
        raise ShapeError(f"M={M} no es un cuadrado perfecto")
    if factor < 1 or side % factor:
        raise ShapeError(f"El lado {side} no es múltiplo del factor {factor}")
    return side


def _place_patch(image: np.ndarray, patch: np.ndarray, row: int, col: int) -> None:
    """Suma el parche centrado en (row, col), truncado en los bordes"""
    side = image.shape[0]
    half = patch.shape[0] // 2
    r0, r1 = row - half, row + half + 1
    c0, c1 = col - half, col + half + 1
    image[max(r0, 0):min(r1, side), max(c0, 0):min(c1, side)] += patch[
        max(0, -r0):patch.shape[0] - max(0, r1 - side),
        max(0, -c0):patch.shape[1] - max(0, c1 - side),
    ]


def smi_forward_spatial(c: np.ndarray, H: np.ndarray, sub: PsfSubspace, factor: int,
                        mode: SampleMode = SampleMode.BLOCK_AVERAGE) -> np.ndarray:
    """Sample[Σ_j c_j (B′h_j) ⊛ e_j] sin ruido"""
    c = np.asarray(c)
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != sub.K or c.shape != (H.shape[1],):
        raise ShapeError(f"Se esperaba c de largo M y H de {sub.K}×M, se recibió {c.shape} y {H.shape}")
    side = _grid_side(H.shape[1], factor)
    X = H * c[None, :]
    image = np.zeros((side, side), dtype=np.result_type(X.dtype, float))
    for j in np.flatnonzero(np.any(X != 0, axis=0)):
        row, col = divmod(int(j), side)
        _place_patch(image, sub.patch(X[:, j]), row, col)
    return subsample(image, factor, mode)


def padded_basis(sub: PsfSubspace, side: int) -> np.ndarray:
    """Parches de la base rellenados a side×side y centrados circularmente en el origen (K, side, side)"""
    if side < sub.size:
        raise ParameterError(f"La grilla ({side}) es menor que el parche PSF ({sub.size})")
    half = sub.size // 2
    out = np.zeros((sub.K, side, side))
    for k in range(sub.K):
        out[k, :sub.size, :sub.size] = sub.basis_spatial[:, k].reshape(sub.size, sub.size)
    return np.roll(out, (-half, -half), axis=(1, 2))


def smi_operator(sub: PsfSubspace, n: int, factor: int,
                 mode: SampleMode = SampleMode.BLOCK_AVERAGE) -> SmiLiftedOperator:
    """Operador levantado con B = DFT unitaria de la base PSF y diccionario de espigas"""
    if n < 1:
        raise ParameterError("n debe ser positivo")
    side = n * factor
    padded = padded_basis(sub, side)
    B = np.fft.fft2(padded, norm="ortho").reshape(sub.K, -1).T
    return SmiLiftedOperator(Dictionary.fourier_spikes(side), SubspaceBasis(B), factor, mode)


def _check_emitter(e: Emitter, side: int) -> None:
    if not (0 <= e.row < side and 0 <= e.col < side):
        raise ParameterError(f"Posición ({e.row}, {e.col}) fuera de la grilla {side}×{side}")
    if not e.width > 0:
        raise ParameterError("El ancho de cada fuente debe ser positivo")


def render_frame(emitters: Sequence[Emitter], sub: PsfSubspace, n: int, factor: int,
                 mode: SampleMode = SampleMode.BLOCK_AVERAGE, exact_psf: bool = False) -> np.ndarray:
    """
    Cuadro sin ruido; el PSF de cada fuente se proyecta en el subespacio

    Con exact_psf=True se usa el PSF gaussiano completo (fuera del modelo).
    """
    side = n * factor
    M = side * side
    if not exact_psf:
        X = np.zeros((sub.K, M))
        for e in emitters:
            _check_emitter(e, side)
            X[:, e.row * side + e.col] += e.intensity * sub.coefficients(gaussian_psf(e.width, sub.size))
        return smi_forward_spatial(np.ones(M), X, sub, factor, mode)
    image = np.zeros((side, side))
    for e in emitters:
        _check_emitter(e, side)
        _place_patch(image, e.intensity * gaussian_psf(e.width, sub.size), e.row, e.col)
    return subsample(image, factor, mode)


def noise_sigma_for_snr(peak: float, snr_db: float) -> float:
    """σ tal que 20·log10(peak/σ) = snr_db"""
    if peak < 0:
        raise ParameterError("El pico debe ser no negativo")
    return float(peak) * 10.0 ** (-snr_db / 20.0)


def synth_stack(truth: Sequence[Sequence[Emitter]], sub: PsfSubspace, n: int, factor: int = HIGHRES_FACTOR,
                sigma: float = 0.0, seed: int = 0, mode: SampleMode = SampleMode.BLOCK_AVERAGE,
                max_per_frame: int = MAX_EMITTERS_PER_FRAME, exact_psf: bool = False,
                pixel_pitch_nm: float = LOWRES_PITCH_NM, snr_db: Optional[float] = None
                ) -> Tuple[FrameStack, pd.DataFrame]:
    """
    Pila sintética con ruido gaussiano; determinista por semilla

    El ruido tiene desviación `sigma` o, si se indica `snr_db`, la que deja el pico
    de la pila sin ruido a esa relación señal-ruido.
    """
    if sigma < 0:
        raise ParameterError("sigma debe ser no negativo")
    if snr_db is not None and sigma > 0:
        raise ParameterError("Indique sigma o snr_db, no ambos")
    rng = trial_rng(seed)
    frames = np.zeros((len(truth), n, n))
    rows = []
    for index, emitters in enumerate(truth):
        if len(emitters) > max_per_frame:
            raise ParameterError(f"El cuadro {index} tiene {len(emitters)} fuentes (máximo {max_per_frame})")
        frames[index] = render_frame(emitters, sub, n, factor, mode, exact_psf)
        rows.extend(dict(frame=index, row=e.row, col=e.col, intensity=e.intensity, width=e.width)
                    for e in emitters)
    if snr_db is not None:
        sigma = noise_sigma_for_snr(float(np.abs(frames).max()) if frames.size else 0.0, snr_db)
        logger.debug("σ de ruido %.4g para %.1f dB", sigma, snr_db)
    if sigma > 0:
        for index in range(len(truth)):
            frames[index] += sigma * rng.standard_normal((n, n))
    truth_df = pd.DataFrame(rows, columns=["frame", "row", "col", "intensity", "width"])
    stack = FrameStack(frames, pixel_pitch_nm=pixel_pitch_nm, highres_factor=factor)
    return stack, truth_df


def random_truth(frames: int, n: int, factor: int = HIGHRES_FACTOR, max_per_frame: int = 3,
                 width_range: Tuple[float, float] = (1.0, 4.0), intensity_range: Tuple[float, float] = (1.0, 2.0),
                 margin: int = 0, seed: int = 0) -> List[List[Emitter]]:
    """Fuentes aleatorias por cuadro (entre 1 y max_per_frame), a `margin` píxeles o más del borde"""
    side = n * factor
    if frames < 0 or max_per_frame < 1:
        raise ParameterError("frames debe ser >= 0 y max_per_frame >= 1")
    if 2 * margin >= side:
        raise ParameterError(f"El margen {margin} no deja píxeles en una grilla de {side}")
    rng = trial_rng(seed, 1)
    truth = []
    for _ in range(frames):
        count = int(rng.integers(1, max_per_frame + 1))
        emitters = []
        for _ in range(count):
            row, col = (int(v) for v in rng.integers(margin, side - margin, size=2))
            emitters.append(Emitter(row=row, col=col, intensity=float(rng.uniform(*intensity_range)),
                                    width=float(rng.uniform(*width_range))))
        truth.append(emitters)
    return truth


def lambda_from_ratio(op: SmiLiftedOperator, frame: np.ndarray, ratio: float) -> float:
    """λ = ratio·‖L*(y)‖_{2,∞}; ratio >= 1 da la solución nula"""
    if not ratio > 0:
        raise ParameterError("ratio debe ser positivo")
    y = np.asarray(frame, dtype=complex).ravel()
    return float(ratio * np.linalg.norm(op.adjoint(y), axis=0).max())


def recover_frame(frame: np.ndarray, op: SmiLiftedOperator, lam: float, opts: Optional[SolverOptions] = None,
                  rel_threshold: float = DEFAULT_SUPPORT_THRESHOLD, frame_index: int = 0) -> FrameRecovery:
    """Group lasso sobre un cuadro; soporte = píxeles de alta resolución activados"""
    frame = np.asarray(frame)
    if frame.shape != (op.low_side, op.low_side):
        raise ShapeError(f"Cuadro {frame.shape} incompatible con el operador ({op.low_side}×{op.low_side})")
    if not np.any(frame):
        # cuadro nulo: X = 0 para todo λ
        return FrameRecovery(
            side=op.side, indices=np.zeros(0, dtype=int), intensities=np.zeros(0),
            estimate=np.zeros(op.x_shape, dtype=complex), residual_norm=0.0, converged=True, lam=lam,
            frame_index=frame_index,
        )
    opts = opts or SolverOptions(step_mode=StepMode.BB_NONMONOTONE)
    y = frame.astype(complex).ravel()
    solution = solve_group_lasso(op, y, lam, opts)
    indices = np.asarray(extract_support(solution.estimate, rel_threshold), dtype=int)
    intensities = np.linalg.norm(solution.estimate[:, indices], axis=0)
    residual = float(np.linalg.norm(y - op.forward(solution.estimate)))
    return FrameRecovery(
        side=op.side, indices=indices, intensities=intensities, estimate=solution.estimate,
        residual_norm=residual, converged=solution.converged, lam=lam, frame_index=frame_index,
        iterations=solution.iterations, kkt_residual=solution.kkt_residual,
    )


def recover_stack(stack: FrameStack, op: SmiLiftedOperator, lam: Optional[float] = None, ratio: Optional[float] = None,
                  opts: Optional[SolverOptions] = None, rel_threshold: float = DEFAULT_SUPPORT_THRESHOLD,
                  workers: int = 1) -> List[FrameRecovery]:
    """Recupera cada cuadro en un pool; el orden de salida es el de la pila"""
    if (lam is None) == (ratio is None):
        raise ParameterError("Indique exactamente uno de lambda o ratio")
    lams = [lam if lam is not None else lambda_from_ratio(op, f, ratio) for f in stack.frames]
    return Parallel(n_jobs=workers)(
        delayed(recover_frame)(frame, op, frame_lam, opts, rel_threshold, index)
        for index, (frame, frame_lam) in enumerate(zip(stack.frames, lams))
    )


def superimpose(recoveries: Sequence[FrameRecovery], pixel_pitch_nm: float = LOWRES_PITCH_NM / HIGHRES_FACTOR
                ) -> HighResImage:
    """Suma de los mapas de intensidad ‖x̂_j‖₂; independiente del orden de los cuadros"""
    if not recoveries:
        raise ParameterError("No hay recuperaciones que superponer")
    side = recoveries[0].side
    if any(r.side != side for r in recoveries):
        raise ShapeError("Las recuperaciones tienen grillas distintas")
    indices = np.concatenate([r.indices for r in recoveries]).astype(int)
    values = np.concatenate([r.intensities for r in recoveries]).astype(float)
    # orden canónico de la suma
    order = np.lexsort((values, indices))
    flat = np.zeros(side * side)
    np.add.at(flat, indices[order], values[order])
    return HighResImage(np.maximum(flat, 0.0).reshape(side, side), pixel_pitch_nm)


def _local_maxima(r: FrameRecovery, radius: int) -> np.ndarray:
    """Posiciones (en r.indices) que dominan a los detectados a distancia de Chebyshev <= radius"""
    if radius <= 0 or r.indices.size < 2:
        return np.arange(r.indices.size)
    pos = np.array(r.positions)
    keep = []
    # orden: intensidad decreciente, índice creciente
    for i in np.lexsort((r.indices, -r.intensities)):
        if all(np.abs(pos[i] - pos[k]).max() > radius for k in keep):
            keep.append(i)
    return np.sort(np.asarray(keep, dtype=int))


def localization_table(recoveries: Sequence[FrameRecovery], highres_pitch_nm: float,
                       merge_radius: int = 0) -> pd.DataFrame:
    """
    Una fila por localización

    Con merge_radius > 0 los detectados vecinos se funden en el de mayor intensidad.
    """
    if merge_radius < 0:
        raise ParameterError("merge_radius debe ser no negativo")
    rows = []
    for r in recoveries:
        positions = r.positions
        for i in _local_maxima(r, merge_radius):
            row, col = positions[i]
            rows.append(dict(frame=r.frame_index, row=row, col=col, intensity=float(r.intensities[i]),
                             y_nm=row * highres_pitch_nm, x_nm=col * highres_pitch_nm))
    return pd.DataFrame(rows, columns=["frame", "row", "col", "intensity", "y_nm", "x_nm"])


def nearest_distance(position: Tuple[int, int], candidates: Sequence[Tuple[int, int]]) -> float:
    """Distancia de Chebyshev (en píxeles de alta resolución) al candidato más cercano"""
    if not candidates:
        return float("inf")
    pts = np.asarray(candidates)
    return float(np.abs(pts - np.asarray(position)[None, :]).max(axis=1).min())
