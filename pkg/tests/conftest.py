import numpy as np
import pytest

from components.lifted_lasso import (
    DirectLiftedOperator,
    Dictionary,
    InstanceParams,
    SubspaceBasis,
    gen_instance,
)
from components.smi import psf_bank, psf_subspace, smi_operator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_op(rng):
    """Operador directo N=24, M=8, K=2"""
    A = rng.standard_normal((24, 8))
    return DirectLiftedOperator(Dictionary.from_array(A), SubspaceBasis.dft_first_k(24, 2))


@pytest.fixture
def random_x():
    def make(shape, seed=0):
        g = np.random.default_rng(seed)
        return g.standard_normal(shape) + 1j * g.standard_normal(shape)
    return make


@pytest.fixture
def easy_instance():
    """Instancia sobredeterminada y bien condicionada (KM < N)"""
    return gen_instance(InstanceParams(N=80, M=20, K=2, J=2, sigma=0.01, seed=7))


@pytest.fixture
def small_subspace():
    """Banco angosto: parches 9×9, K=2"""
    return psf_subspace(psf_bank(count=5, width_range=(0.6, 1.2)), 2)


@pytest.fixture(params=["block-average", "decimate"])
def small_smi_op(request, small_subspace):
    """Grilla de alta resolución 12×12, cuadros de 4×4"""
    return smi_operator(small_subspace, 4, 3, request.param)
