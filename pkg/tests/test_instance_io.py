import numpy as np
import pytest

from components.lifted_lasso import (
    Instance,
    InstanceFormatError,
    InstanceParams,
    ParameterError,
    gen_instance,
    load_instance,
    save_instance,
)
from components.lifted_lasso.lifted_op import SupportRestrictedOperator


@pytest.fixture
def instance():
    return gen_instance(InstanceParams(N=30, M=12, K=2, J=2, sigma=0.05, gamma_target=0.1, seed=21))


def test_saved_instance_loads_identically(tmp_path, instance):
    path = save_instance(instance, tmp_path / "inst.llinst")
    loaded = load_instance(path)
    assert loaded.params == instance.params
    np.testing.assert_array_equal(loaded.op.dictionary.to_dense(), instance.op.dictionary.to_dense())
    np.testing.assert_array_equal(loaded.op.basis.columns, instance.op.basis.columns)
    np.testing.assert_array_equal(loaded.X0, instance.X0)
    np.testing.assert_array_equal(loaded.support, instance.support)
    np.testing.assert_array_equal(loaded.y, instance.y)
    assert not np.iscomplexobj(loaded.op.dictionary.to_dense())


def test_bad_magic_rejected(tmp_path, instance):
    path = save_instance(instance, tmp_path / "inst.llinst")
    data = bytearray(path.read_bytes())
    data[0:6] = b"NOPE!!"
    path.write_bytes(bytes(data))
    with pytest.raises(InstanceFormatError):
        load_instance(path)


def test_truncated_file_rejected(tmp_path, instance):
    path = save_instance(instance, tmp_path / "inst.llinst")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(InstanceFormatError):
        load_instance(path)
    path.write_bytes(b"LLINST")
    with pytest.raises(InstanceFormatError):
        load_instance(path)


def test_only_direct_operator_is_serializable(tmp_path, instance):
    restricted = Instance(
        params=instance.params, op=SupportRestrictedOperator(instance.op, [0, 1]), X0=instance.X0,
        support=instance.support, noise=instance.noise, y=instance.y,
    )
    with pytest.raises(ParameterError):
        save_instance(restricted, tmp_path / "nope.llinst")
