"""
Contenedor binario "LLINST v1" para guardar instancias y depurar ensayos fallidos

Todo en little-endian:

    cabecera (64 bytes)
        magic        8s   b"LLINST\\x00\\x01"
        version      u32  1
        N, M, K, J   4×u32
        basis_kind   u8   0 dft-first-k, 1 identity-first-k, 2 random-orthonormal
        has_gamma    u8
        (relleno)    2 bytes
        seed         u64
        sigma        f64
        gamma_target f64  (NaN si has_gamma = 0)
        (relleno)    4 bytes
    cuerpo
        A      N×M complex128, orden C
        B      N×K complex128, orden C
        X0     K×M complex128, orden C
        T      J   int64
        noise  N   complex128
        y      N   complex128
"""

from __future__ import annotations

import logging
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import LiftedLassoError, ParameterError
from .lifted_op import DirectLiftedOperator, Dictionary, SubspaceBasis
from .synth_metrics import BasisKind, Instance, InstanceParams

logger = logging.getLogger(__name__)

MAGIC = b"LLINST\x00\x01"
VERSION = 1
_HEADER = struct.Struct("<8sI4IBB2xQdd4x")
_KINDS = [BasisKind.DFT_FIRST_K, BasisKind.IDENTITY_FIRST_K, BasisKind.RANDOM_ORTHONORMAL]
_COMPLEX = np.dtype("<c16")
_INDEX = np.dtype("<i8")


class InstanceFormatError(LiftedLassoError, ValueError):
    """Archivo LLINST ilegible o truncado"""


def save_instance(instance: Instance, path: Union[str, Path]) -> Path:
    op = instance.op
    if not isinstance(op, DirectLiftedOperator):
        raise ParameterError("Solo se pueden serializar instancias de la variante directa")
    p = instance.params
    gamma = p.gamma_target
    header = _HEADER.pack(
        MAGIC, VERSION, p.N, p.M, p.K, p.J,
        _KINDS.index(p.basis_kind), int(gamma is not None),
        int(p.seed) & ((1 << 64) - 1), float(p.sigma), math.nan if gamma is None else float(gamma),
    )
    arrays = [op.dictionary.to_dense(), op.basis.columns, instance.X0, instance.noise, instance.y]
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(header)
        for arr in arrays[:3]:
            fh.write(np.ascontiguousarray(arr, dtype=_COMPLEX).tobytes())
        fh.write(np.ascontiguousarray(instance.support, dtype=_INDEX).tobytes())
        for arr in arrays[3:]:
            fh.write(np.ascontiguousarray(arr, dtype=_COMPLEX).tobytes())
    logger.debug("Instancia guardada en %s", path)
    return path


def load_instance(path: Union[str, Path]) -> Instance:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InstanceFormatError("Archivo más corto que la cabecera")
    magic, version, N, M, K, J, kind, has_gamma, seed, sigma, gamma = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise InstanceFormatError("Cabecera LLINST no reconocida")
    if kind >= len(_KINDS):
        raise InstanceFormatError(f"Código de base desconocido: {kind}")

    sizes = [(N, M), (N, K), (K, M)]
    expected = _HEADER.size + 16 * (N * M + N * K + K * M + 2 * N) + 8 * J
    if len(data) != expected:
        raise InstanceFormatError(f"Tamaño {len(data)} bytes, se esperaban {expected}")

    offset = _HEADER.size
    mats = []
    for shape in sizes:
        count = shape[0] * shape[1]
        mats.append(np.frombuffer(data, _COMPLEX, count, offset).reshape(shape).astype(complex))
        offset += 16 * count
    support = np.frombuffer(data, _INDEX, J, offset).astype(int)
    offset += 8 * J
    noise = np.frombuffer(data, _COMPLEX, N, offset).astype(complex)
    y = np.frombuffer(data, _COMPLEX, N, offset + 16 * N).astype(complex)

    A, B, X0 = mats
    if not np.any(A.imag):
        A = A.real
    params = InstanceParams(N=N, M=M, K=K, J=J, sigma=sigma, basis_kind=_KINDS[kind],
                            gamma_target=gamma if has_gamma else None, seed=seed)
    op = DirectLiftedOperator(Dictionary.from_array(A), SubspaceBasis(B))
    return Instance(params=params, op=op, X0=X0, support=support, noise=noise, y=y)
