"""
Componente SMI
Superresolución de microscopía de molécula única con PSF no estacionarios
"""

from .fstack import parse_fstack, read_fstack, write_fstack, write_pgm, write_png
from .imaging import (
    Emitter,
    FrameRecovery,
    FrameStack,
    HighResImage,
    lambda_from_ratio,
    localization_table,
    nearest_distance,
    noise_sigma_for_snr,
    random_truth,
    recover_frame,
    recover_stack,
    render_frame,
    smi_forward_spatial,
    smi_operator,
    superimpose,
    synth_stack,
)
from .psf import PsfBank, PsfSubspace, gaussian_psf, psf_bank, psf_subspace

__all__ = [
    'parse_fstack', 'read_fstack', 'write_fstack', 'write_pgm', 'write_png',
    'Emitter', 'FrameRecovery', 'FrameStack', 'HighResImage', 'lambda_from_ratio', 'localization_table',
    'nearest_distance', 'noise_sigma_for_snr', 'random_truth', 'recover_frame', 'recover_stack', 'render_frame',
    'smi_forward_spatial', 'smi_operator', 'superimpose', 'synth_stack',
    'PsfBank', 'PsfSubspace', 'gaussian_psf', 'psf_bank', 'psf_subspace',
]
