import numpy as np
import pytest

from components.lifted_lasso import ParameterError, ShapeError, SolverOptions, inner, solve_group_lasso
from components.smi import (
    Emitter,
    FrameRecovery,
    FrameStack,
    HighResImage,
    gaussian_psf,
    lambda_from_ratio,
    localization_table,
    nearest_distance,
    noise_sigma_for_snr,
    psf_bank,
    psf_subspace,
    random_truth,
    recover_frame,
    recover_stack,
    render_frame,
    smi_forward_spatial,
    smi_operator,
    superimpose,
    synth_stack,
)


def _recovery(indices, intensities, side=6, frame_index=0):
    return FrameRecovery(
        side=side, indices=np.asarray(indices, dtype=int), intensities=np.asarray(intensities, dtype=float),
        estimate=np.zeros((1, side * side)), residual_norm=0.0, converged=True, lam=0.1, frame_index=frame_index,
    )


def test_gaussian_psf_has_unit_mass():
    psf = gaussian_psf(1.5, 11)
    assert psf.shape == (11, 11)
    assert psf.sum() == pytest.approx(1.0)
    assert psf[5, 5] == psf.max()
    with pytest.raises(ParameterError):
        gaussian_psf(1.5, 10)
    with pytest.raises(ParameterError):
        gaussian_psf(0.0, 11)


def test_default_bank():
    bank = psf_bank()
    assert bank.count == 9
    assert bank.width_range == (1.0, 4.0)
    assert bank.size == 25


def test_nine_psf_bank_lives_in_three_dimensions():
    sub = psf_subspace(psf_bank(), 3)
    assert sub.energy_ratio_k >= 0.99
    np.testing.assert_allclose(sub.basis_spatial.T @ sub.basis_spatial, np.eye(3), atol=1e-10)
    assert np.all(sub.basis_spatial.sum(axis=0) > 0)


def test_single_psf_bank():
    bank = psf_bank(widths=[2.0])
    sub = psf_subspace(bank, 1)
    psf = bank.psfs[0].ravel()
    np.testing.assert_allclose(sub.basis_spatial[:, 0], psf / np.linalg.norm(psf))
    assert sub.energy_ratio_k == pytest.approx(1.0)


def test_subspace_rank_bounded_by_bank():
    with pytest.raises(ParameterError):
        psf_subspace(psf_bank(count=2), 3)


def test_truncate_is_nested():
    sub = psf_subspace(psf_bank(), 3)
    one = sub.truncate(1)
    np.testing.assert_array_equal(one.basis_spatial[:, 0], sub.basis_spatial[:, 0])
    assert one.energy_ratio_k < sub.energy_ratio_k


def test_smi_zero_coefficients_give_zero_frame(small_smi_op):
    y = small_smi_op.forward(np.zeros(small_smi_op.x_shape))
    assert y.shape == (16,)
    assert np.all(y == 0)


def test_smi_adjoint_identity(small_smi_op, random_x):
    for trial in range(100):
        X = random_x(small_smi_op.x_shape, seed=2 * trial)
        y = random_x((small_smi_op.n_obs,), seed=2 * trial + 1)
        lhs = inner(small_smi_op.forward(X), y)
        rhs = inner(X, small_smi_op.adjoint(y))
        assert abs(lhs - rhs) <= 1e-10 * (np.linalg.norm(X) * np.linalg.norm(y) + 1)


def test_smi_fourier_model_matches_spatial(small_smi_op, small_subspace):
    g = np.random.default_rng(99)
    side, half = small_smi_op.side, small_subspace.size // 2
    for _ in range(20):
        row, col = (int(v) for v in g.integers(half, side - half, size=2))
        X = np.zeros(small_smi_op.x_shape)
        X[:, row * side + col] = g.standard_normal(small_subspace.K) * g.uniform(0.5, 2.0)
        fourier = small_smi_op.forward(X)
        spatial = smi_forward_spatial(np.ones(X.shape[1]), X, small_subspace, 3, small_smi_op.sample_mode).ravel()
        assert np.linalg.norm(fourier - spatial) <= 1e-8 * np.linalg.norm(spatial)


def test_smi_phi_block_matches_forward(small_smi_op):
    X = np.zeros(small_smi_op.x_shape)
    X[1, 50] = 1.0
    np.testing.assert_allclose(small_smi_op.phi_block(50)[:, 1], small_smi_op.forward(X), atol=1e-12)


def test_block_average_divides_mass(small_subspace):
    e = Emitter(row=6, col=6, intensity=1.0, width=0.9)
    frame = render_frame([e], small_subspace, 4, 3, "block-average", exact_psf=True)
    assert frame.sum() * 9 == pytest.approx(1.0)


def test_synth_stack_empty_truth_is_zero(small_subspace):
    stack, truth = synth_stack([[], []], small_subspace, 4, 3, sigma=0.0)
    assert stack.count == 2
    assert np.all(stack.frames == 0)
    assert truth.empty


def test_synth_stack_is_seeded(small_subspace):
    truth = random_truth(3, 4, 3, width_range=(0.6, 1.2), margin=4, seed=5)
    a, ta = synth_stack(truth, small_subspace, 4, 3, sigma=0.05, seed=5)
    b, tb = synth_stack(truth, small_subspace, 4, 3, sigma=0.05, seed=5)
    np.testing.assert_array_equal(a.frames, b.frames)
    assert ta.equals(tb)
    assert list(ta.columns) == ["frame", "row", "col", "intensity", "width"]


def test_synth_stack_rejects_bad_sources(small_subspace):
    with pytest.raises(ParameterError):
        synth_stack([[Emitter(12, 0, 1.0, 1.0)]], small_subspace, 4, 3)
    crowded = [[Emitter(5, 5, 1.0, 1.0)] * 3]
    with pytest.raises(ParameterError):
        synth_stack(crowded, small_subspace, 4, 3, max_per_frame=2)


def test_random_truth_respects_margin():
    truth = random_truth(20, 4, 3, max_per_frame=4, margin=4, seed=1)
    assert len(truth) == 20
    for emitters in truth:
        assert 1 <= len(emitters) <= 4
        for e in emitters:
            assert 4 <= e.row < 8 and 4 <= e.col < 8


def test_zero_frame_recovers_nothing(small_smi_op):
    rec = recover_frame(np.zeros((4, 4)), small_smi_op, 0.1)
    assert rec.indices.size == 0
    assert rec.peak() is None


def test_recover_frame_checks_shape(small_smi_op):
    with pytest.raises(ShapeError):
        recover_frame(np.zeros((5, 5)), small_smi_op, 0.1)


def test_single_source_is_localized():
    sub = psf_subspace(psf_bank(count=5, width_range=(1.0, 2.0)), 3)
    op = smi_operator(sub, 8, 2)
    source = Emitter(row=8, col=7, intensity=1.0, width=1.5)
    clean = render_frame([source], sub, 8, 2)
    frame = clean + 0.01 * clean.max() * np.random.default_rng(0).standard_normal(clean.shape)
    lam = lambda_from_ratio(op, frame, 0.3)
    rec = recover_frame(frame, op, lam, SolverOptions(step_mode="bb-nonmonotone", max_iters=2000))
    assert nearest_distance(rec.peak(), [(source.row, source.col)]) <= 1


def test_wider_subspace_fits_better():
    bank = psf_bank(count=9, width_range=(1.0, 3.0))
    sub3 = psf_subspace(bank, 3)
    sub1 = sub3.truncate(1)
    source = Emitter(row=10, col=10, intensity=1.0, width=3.0)
    frame = render_frame([source], sub3, 7, 3, exact_psf=True)
    y = frame.astype(complex).ravel()
    j = source.row * 21 + source.col
    residuals = []
    for sub in (sub1, sub3):
        restricted = smi_operator(sub, 7, 3).restrict([j])
        solution = solve_group_lasso(restricted, y, 1e-8, SolverOptions(max_iters=5000))
        residuals.append(np.linalg.norm(y - restricted.forward(solution.estimate)))
    assert residuals[1] < residuals[0]


def test_recover_stack_keeps_frame_order(small_subspace):
    op = smi_operator(small_subspace, 4, 3)
    truth = [[Emitter(5, 5, 1.0, 0.9)], [], [Emitter(6, 7, 2.0, 1.1)]]
    stack, _ = synth_stack(truth, small_subspace, 4, 3)
    recs = recover_stack(stack, op, ratio=0.3, opts=SolverOptions(max_iters=300))
    assert [r.frame_index for r in recs] == [0, 1, 2]
    assert recs[1].indices.size == 0
    with pytest.raises(ParameterError):
        recover_stack(stack, op)
    with pytest.raises(ParameterError):
        recover_stack(stack, op, lam=0.1, ratio=0.3)


def test_superimpose_sums_disjoint_peaks():
    image = superimpose([_recovery([3], [1.5]), _recovery([20], [0.7], frame_index=1)])
    assert image.image.shape == (6, 6)
    assert image.image[0, 3] == 1.5
    assert image.image[3, 2] == 0.7
    assert image.image.sum() == pytest.approx(2.2)


def test_superimpose_is_order_invariant():
    recs = [_recovery([1, 7], [0.1, 0.2]), _recovery([7], [0.3]), _recovery([1, 30], [1e-3, 5.0])]
    forward = superimpose(recs).image
    backward = superimpose(recs[::-1]).image
    np.testing.assert_array_equal(forward, backward)


def test_superimpose_rejects_empty_and_mixed():
    with pytest.raises(ParameterError):
        superimpose([])
    with pytest.raises(ShapeError):
        superimpose([_recovery([1], [1.0]), _recovery([1], [1.0], side=4)])


def test_localization_table_in_nanometres():
    table = localization_table([_recovery([8], [2.0], frame_index=4)], 20.0)
    row = table.iloc[0]
    assert (row["frame"], row["row"], row["col"]) == (4, 1, 2)
    assert (row["y_nm"], row["x_nm"]) == (20.0, 40.0)


def test_frame_stack_mean_subtraction():
    stack = FrameStack(np.arange(18, dtype=float).reshape(2, 3, 3))
    centred = stack.subtract_mean()
    assert centred.mean_subtracted
    assert centred.frames.mean() == pytest.approx(0.0)
    assert not stack.mean_subtracted
    assert centred.highres_pitch_nm == pytest.approx(20.0)


def test_highres_image_must_be_nonnegative():
    with pytest.raises(ParameterError):
        HighResImage(-np.ones((2, 2)))


def test_nearest_distance():
    assert nearest_distance((3, 3), [(4, 5), (3, 2)]) == 1.0
    assert nearest_distance((0, 0), []) == float("inf")


def test_noise_sigma_for_snr():
    assert noise_sigma_for_snr(2.0, 20.0) == pytest.approx(0.2)
    assert noise_sigma_for_snr(1.0, 0.0) == pytest.approx(1.0)


def test_synth_stack_noise_follows_snr(small_subspace):
    truth = [[Emitter(5, 6, 1.0, 0.9)]] * 60
    clean, _ = synth_stack(truth, small_subspace, 4, 3)
    noisy, _ = synth_stack(truth, small_subspace, 4, 3, snr_db=20.0, seed=3)
    noise = noisy.frames - clean.frames
    assert noise.std() == pytest.approx(0.1 * clean.frames.max(), rel=0.1)
    with pytest.raises(ParameterError):
        synth_stack(truth, small_subspace, 4, 3, sigma=0.1, snr_db=20.0)


def test_localization_table_merges_neighbours():
    rec = _recovery([7, 8, 35], [1.0, 0.5, 0.2])
    merged = localization_table([rec], 20.0, merge_radius=2)
    assert list(zip(merged["row"], merged["col"])) == [(1, 1), (5, 5)]
    assert merged["intensity"].iloc[0] == 1.0
    assert len(localization_table([rec], 20.0)) == 3
    with pytest.raises(ParameterError):
        localization_table([rec], 20.0, merge_radius=-1)


@pytest.mark.slow
def test_single_source_localized_at_twenty_db():
    sub = psf_subspace(psf_bank(count=5, width_range=(1.0, 2.0)), 3)
    op = smi_operator(sub, 8, 2)
    rng = np.random.default_rng(11)
    opts = SolverOptions(step_mode="bb-nonmonotone", max_iters=2000)
    hits = 0
    for _ in range(100):
        row, col = (int(v) for v in rng.integers(6, 10, size=2))
        source = Emitter(row=row, col=col, intensity=float(rng.uniform(1.0, 2.0)), width=float(rng.uniform(1.0, 2.0)))
        clean = render_frame([source], sub, 8, 2)
        frame = clean + 0.1 * clean.max() * rng.standard_normal(clean.shape)
        rec = recover_frame(frame, op, lambda_from_ratio(op, frame, 0.3), opts)
        hits += rec.peak() is not None and nearest_distance(rec.peak(), [(row, col)]) <= 1
    assert hits >= 95
