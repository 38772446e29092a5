"""
Archivos de pilas de cuadros (FSTACK v1) e imágenes de salida (PGM P2 / PNG)

FSTACK v1 (texto ASCII):

    FSTACK 1 <alto> <ancho> <cantidad>
    <alto líneas por cuadro, cada una con <ancho> reales decimales separados por espacios>

Las líneas en blanco al final se ignoran. Los errores indican línea y columna (base 1).
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from components.lifted_lasso import FrameStackFormatError  # noqa: E402

from .imaging import HIGHRES_FACTOR, LOWRES_PITCH_NM, FrameStack, HighResImage  # noqa: E402

logger = logging.getLogger(__name__)

MAGIC = "FSTACK"
VERSION = "1"
PGM_MAXVAL = 65535


def _tokens(line: str) -> List[Tuple[int, str]]:
    """(columna base 1, token) de cada token separado por espacios"""
    out = []
    col = 0
    for token in line.split():
        col = line.index(token, col)
        out.append((col + 1, token))
        col += len(token)
    return out


def _positive_int(token: str, line: int, column: int, name: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FrameStackFormatError(f"{name} debe ser un entero, se leyó '{token}'", line, column) from None
    if value < 1 and name != "cantidad":
        raise FrameStackFormatError(f"{name} debe ser positivo", line, column)
    if value < 0:
        raise FrameStackFormatError(f"{name} no puede ser negativo", line, column)
    return value


def parse_fstack(text: str, pixel_pitch_nm: float = LOWRES_PITCH_NM,
                 highres_factor: int = HIGHRES_FACTOR) -> FrameStack:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FrameStackFormatError("archivo vacío", 1, 1)

    header = _tokens(lines[0])
    if not header or header[0][1] != MAGIC:
        raise FrameStackFormatError(f"se esperaba '{MAGIC}'", 1, header[0][0] if header else 1)
    if len(header) != 5:
        column = header[-1][0] + len(header[-1][1]) if len(header) < 5 else header[5][0]
        raise FrameStackFormatError("la cabecera debe ser 'FSTACK 1 <alto> <ancho> <cantidad>'", 1, column)
    if header[1][1] != VERSION:
        raise FrameStackFormatError(f"versión no soportada '{header[1][1]}'", 1, header[1][0])
    height = _positive_int(header[2][1], 1, header[2][0], "alto")
    width = _positive_int(header[3][1], 1, header[3][0], "ancho")
    count = _positive_int(header[4][1], 1, header[4][0], "cantidad")

    expected = 1 + height * count
    if len(lines) > expected:
        raise FrameStackFormatError(f"contenido sobrante tras {count} cuadros", expected + 1, 1)

    frames = np.zeros((count, height, width))
    for index in range(height * count):
        number = index + 2
        if number > len(lines):
            raise FrameStackFormatError(f"faltan filas: se esperaban {height * count}", number, 1)
        raw = lines[number - 1]
        tokens = _tokens(raw)
        if len(tokens) != width:
            column = tokens[width][0] if len(tokens) > width else len(raw) + 1
            raise FrameStackFormatError(f"se esperaban {width} valores, se leyeron {len(tokens)}", number, column)
        for j, (column, token) in enumerate(tokens):
            try:
                value = float(token)
            except ValueError:
                raise FrameStackFormatError(f"valor no numérico '{token}'", number, column) from None
            if not math.isfinite(value):
                raise FrameStackFormatError(f"valor no finito '{token}'", number, column)
            frames[divmod(index, height)][j] = value
    return FrameStack(frames, pixel_pitch_nm=pixel_pitch_nm, highres_factor=highres_factor)


def read_fstack(path: Union[str, Path], **kwargs) -> FrameStack:
    stack = parse_fstack(Path(path).read_text(encoding="ascii"), **kwargs)
    logger.info("Pila leída: %d cuadros de %d×%d", stack.count, *stack.frame_shape)
    return stack


def format_fstack(stack: FrameStack) -> str:
    height, width = stack.frame_shape
    parts = [f"{MAGIC} {VERSION} {height} {width} {stack.count}"]
    for frame in stack.frames:
        parts.extend(" ".join(repr(float(v)) for v in row) for row in frame)
    return "\n".join(parts) + "\n"


def write_fstack(stack: FrameStack, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_fstack(stack), encoding="ascii")
    return path


def scaled_uint16(image: HighResImage) -> np.ndarray:
    """Escala lineal a [0, 65535]; imagen nula → ceros"""
    top = image.image.max() if image.image.size else 0.0
    if top <= 0:
        return np.zeros(image.image.shape, dtype=np.uint16)
    return np.rint(image.image / top * PGM_MAXVAL).astype(np.uint16)


def write_pgm(image: HighResImage, path: Union[str, Path]) -> Path:
    """PGM ASCII (P2) de 16 bits"""
    data = scaled_uint16(image)
    rows, cols = data.shape
    lines = ["P2", f"# pixel_pitch_nm={image.pixel_pitch_nm:g}", f"{cols} {rows}", str(PGM_MAXVAL)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in data)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def write_png(image: HighResImage, path: Union[str, Path]) -> Path:
    path = Path(path)
    plt.imsave(path, image.image, cmap="hot", vmin=0.0)
    return path
