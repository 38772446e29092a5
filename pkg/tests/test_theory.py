import math

import numpy as np
import pytest

from components.lifted_lasso import (
    BoundInputs,
    DirectLiftedOperator,
    Dictionary,
    DomainError,
    InstanceParams,
    ParameterError,
    SolverOptions,
    SubspaceBasis,
    error_bound,
    extract_support,
    gamma_zero,
    gen_instance,
    gram_inverse_norm,
    isometry_residual,
    lambda_k_range,
    lambda_lower_bound,
    sample_complexity_bound,
    solve_group_lasso,
    tail_bound_check,
    witness_certificate,
)

DESK = dict(N=100, M=150, K=3, J=3, sigma=0.1)


def test_lambda_lower_bound_value():
    b = BoundInputs(**DESK)
    expected = math.sqrt(0.01 * 3 * (math.log(147) + math.log(100)))
    assert lambda_lower_bound(b) == pytest.approx(expected)
    assert lambda_lower_bound(b) == pytest.approx(0.53653, rel=1e-4)


def test_sample_complexity_value():
    b = BoundInputs(**DESK)
    assert sample_complexity_bound(b) == pytest.approx(9 * (math.log(147) + math.log(100) ** 2))


def test_error_bound_value():
    b = BoundInputs(**DESK)
    noise_term = math.sqrt(0.01 * 9 * (math.log(3) + math.log(100)))
    assert noise_term == pytest.approx(0.71648, rel=1e-4)
    assert error_bound(b, 0.5) == pytest.approx(noise_term + 4 * math.sqrt(3) * 0.5)


def test_bounds_scale_as_documented():
    b = BoundInputs(**DESK)
    assert lambda_lower_bound(BoundInputs(**{**DESK, "sigma": 0.2})) == pytest.approx(2 * lambda_lower_bound(b))
    doubled_j = BoundInputs(**{**DESK, "J": 6})
    ratio = sample_complexity_bound(doubled_j) / sample_complexity_bound(b)
    assert ratio == pytest.approx(2 * (math.log(144) + math.log(100) ** 2) / (math.log(147) + math.log(100) ** 2))
    assert lambda_lower_bound(BoundInputs(**DESK, mu_max=2.0)) == pytest.approx(2 * lambda_lower_bound(b))


def test_gamma_zero_ignores_constant():
    b = BoundInputs(**DESK, c_alpha_2=4.0)
    assert lambda_lower_bound(b) == pytest.approx(2 * gamma_zero(b))


def test_domain_errors():
    with pytest.raises(DomainError):
        BoundInputs(**{**DESK, "J": 150})
    with pytest.raises(DomainError):
        BoundInputs(**{**DESK, "J": 0})
    with pytest.raises(ParameterError):
        BoundInputs(**DESK, mu_max=20.0)
    with pytest.raises(ParameterError):
        error_bound(BoundInputs(**DESK), -1.0)


def test_lambda_k_range():
    b = BoundInputs(**DESK)
    low, high = lambda_k_range(b, 0.02)
    c3 = 4 * math.sqrt(3)
    assert low == pytest.approx(1.0)
    assert high == pytest.approx(1 / (c3 * 0.02) - error_bound(b, 0.0) / (c3 * gamma_zero(b)))
    assert high > low
    # γ grande: intervalo vacío
    low, high = lambda_k_range(b, 1.0)
    assert high < low


def test_lambda_k_range_requires_noise():
    with pytest.raises(DomainError):
        lambda_k_range(BoundInputs(**{**DESK, "sigma": 0.0}), 0.02)


def test_witness_certifies_incoherent_instance():
    instance = gen_instance(InstanceParams(N=200, M=40, K=2, J=2, sigma=0.0, seed=3))
    opts = SolverOptions(kkt_tol=1e-9)
    report = witness_certificate(instance.op, instance.support, instance.X0_T, instance.noise, 0.1, opts)
    assert report.gram_invertible
    assert report.isometry_residual < 1.0
    assert report.certified
    assert report.max_off_support_norm < 1.0
    assert report.route_gap < 1e-8
    assert report.s_TC_block_norms.shape == (38,)

    full = solve_group_lasso(instance.op, instance.y, 0.1, opts)
    assert set(extract_support(full.estimate)) <= set(int(j) for j in instance.support)


def test_witness_singular_gram_is_not_certified(rng):
    A = rng.standard_normal((30, 6))
    A[:, 1] = A[:, 0]
    op = DirectLiftedOperator(Dictionary.from_array(A), SubspaceBasis.dft_first_k(30, 2))
    report = witness_certificate(op, [0, 1], np.ones((2, 2)), np.zeros(30), 0.1)
    assert not report.gram_invertible
    assert not report.certified
    assert math.isinf(gram_inverse_norm(op, [0, 1]))


def test_witness_rejects_empty_support(small_op):
    with pytest.raises(ParameterError):
        witness_certificate(small_op, [], np.zeros((2, 0)), np.zeros(24), 0.1)


def test_isometry_residual_empty_support(small_op):
    assert isometry_residual(small_op, []) == 0.0


@pytest.mark.parametrize("complex_input", [True, False])
@pytest.mark.parametrize("sharp", [False, True])
def test_tail_rate_within_bound(complex_input, sharp):
    trials = 20_000
    rate, bound = tail_bound_check(3, 50, 0.5, 2.0, trials, complex_input=complex_input, rng_seed=11, sharp=sharp)
    assert bound == pytest.approx(math.exp(-2.0))
    assert rate <= bound + 3 * math.sqrt(bound * (1 - bound) / trials)


def test_tail_check_is_seeded():
    first = tail_bound_check(3, 20, 1.0, 1.5, 2000, rng_seed=5)
    second = tail_bound_check(3, 20, 1.0, 1.5, 2000, rng_seed=5)
    assert first == second


def test_tail_check_requires_enough_trials():
    with pytest.raises(ParameterError):
        tail_bound_check(3, 20, 1.0, 2.0, 999)


def _nondecreasing(values):
    return all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("key,values", [
    ("sigma", [0.0, 0.05, 0.1, 0.5, 1.0]),
    ("mu_max", [1.0, 2.0, 5.0, 10.0]),
    ("K", [1, 2, 3, 5, 8]),
    ("N", [50, 100, 200, 400]),
])
def test_bounds_nondecreasing(key, values):
    inputs = [BoundInputs(**{**DESK, key: v}) for v in values]
    assert _nondecreasing([lambda_lower_bound(b) for b in inputs])
    assert _nondecreasing([sample_complexity_bound(b) for b in inputs])
    assert _nondecreasing([error_bound(b, 0.3) for b in inputs])


def test_bounds_nondecreasing_in_sparsity():
    inputs = [BoundInputs(**{**DESK, "J": j}) for j in range(1, 11)]
    assert _nondecreasing([sample_complexity_bound(b) for b in inputs])
    assert _nondecreasing([error_bound(b, 0.3) for b in inputs])
    # log(M − J) decrece con J: el λ mínimo no es monótono en J
    assert lambda_lower_bound(inputs[-1]) < lambda_lower_bound(inputs[0])


def test_isometry_residual_controls_gram():
    checked = 0
    for seed in range(20):
        instance = gen_instance(InstanceParams(N=120, M=30, K=2, J=2, sigma=0.0, seed=seed))
        delta = isometry_residual(instance.op, instance.support)
        if delta >= 1.0:
            continue
        report = witness_certificate(instance.op, instance.support, instance.X0_T, instance.noise, 0.1)
        assert report.gram_invertible
        assert report.gram_min_eig >= 1.0 - delta - 1e-10
        assert gram_inverse_norm(instance.op, instance.support) <= 1.0 / (1.0 - delta) + 1e-9
        checked += 1
    assert checked >= 10


def test_isometry_residual_is_small_on_average():
    residuals = []
    for seed in range(50):
        instance = gen_instance(InstanceParams(N=200, M=20, K=2, J=2, sigma=0.0, seed=seed))
        residuals.append(isometry_residual(instance.op, instance.support))
    assert np.mean(residuals) < 0.5


@pytest.mark.slow
def test_certified_instances_are_recovered():
    opts = SolverOptions(kkt_tol=1e-9)
    qualifying = 0
    for seed in range(50):
        instance = gen_instance(InstanceParams(N=100, M=150, K=3, J=3, sigma=0.0, seed=seed))
        report = witness_certificate(instance.op, instance.support, instance.X0_T, instance.noise, 0.05, opts)
        assert report.route_gap < 1e-8
        if not (report.certified and report.max_off_support_norm < 0.9 and report.gram_min_eig > 0.4):
            continue
        qualifying += 1
        solution = solve_group_lasso(instance.op, instance.y, 0.05, opts)
        assert set(extract_support(solution.estimate)) <= set(int(j) for j in instance.support)
    assert qualifying >= 10


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("complex_input", [True, False])
def test_tail_rate_full_budget(alpha, complex_input):
    trials = 100_000
    rate, bound = tail_bound_check(2, 10, 1.0, alpha, trials, complex_input=complex_input, rng_seed=3)
    assert bound == pytest.approx(math.exp(-alpha))
    assert rate <= bound + 3 * math.sqrt(bound * (1 - bound) / trials)
