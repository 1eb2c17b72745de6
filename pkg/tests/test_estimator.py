import numpy as np
import pytest

from conftest import noisy_dataset, random_params
from procrustean.criteria import CriterionContext, eval_M, eval_M0, eval_Mbar
from procrustean.errors import DegenerateConfiguration, DimensionMismatch, NoConvergence, SingularAlignment
from procrustean.estimator import (
    Constraints,
    OptimizerOptions,
    aligned_mean,
    closed_form_b,
    estimate_rotation_scaling,
    full_procrustes_mean,
    mean_at_section,
    partial_procrustes_mean,
    procrustes_sum_of_squares,
    section_point,
    smoothed_procrustes_mean,
)
from procrustean.geometry import ParameterVector, Similarity, act, compose, inverse, preshape, procrustes_distance, rotation
from procrustean.model import DEFAULT_BOUNDS, MeanPattern, NoiseModel, generate_dataset
from procrustean.spectral import smooth


def test_constraints_validation():
    assert Constraints().zero_sum and not Constraints().reference_first
    c = Constraints(reference_first=True)
    assert not c.zero_sum
    with pytest.raises(ValueError):
        Constraints(zero_sum=True, reference_first=True)
    with pytest.raises(ValueError):
        Constraints(A=0)
    with pytest.raises(ValueError):
        Constraints(Abar=4.0)


def test_identical_observations_stay_at_origin():
    f = MeanPattern.from_curve(21).config
    ctx = CriterionContext.from_observations(np.stack([f] * 4), 5)
    a, alpha, diag = estimate_rotation_scaling(ctx)
    assert np.all(a == 0) and np.all(alpha == 0)
    assert diag.converged and diag.iterations == 0


def test_zero_noise_recovery():
    ds = noisy_dataset(k=51, J=6, kind=None, seed=3)
    ctx = CriterionContext.from_observations(ds.observations, 25)
    res = smoothed_procrustes_mean(ctx)
    _, proj = section_point(ds.truth)
    np.testing.assert_allclose(res.params.a, proj.a, atol=1e-6)
    np.testing.assert_allclose(res.params.alpha, proj.alpha, atol=1e-6)
    np.testing.assert_allclose(res.params.b, proj.b, atol=1e-6)
    f0 = mean_at_section(ds.pattern, ds.truth)
    assert np.linalg.norm(res.mean - f0) <= 1e-6 * np.linalg.norm(ds.pattern.config)


def test_reference_first_recovery():
    ds = noisy_dataset(k=31, J=4, kind=None, seed=5)
    ctx = CriterionContext.from_observations(ds.observations, 15)
    res = smoothed_procrustes_mean(ctx, Constraints(reference_first=True))
    expected = ds.truth.right_compose(inverse(ds.truth[0]))
    np.testing.assert_allclose(res.params.to_vector(), expected.to_vector(), atol=1e-6)
    assert res.params.a[0] == 0 and res.params.alpha[0] == 0
    np.testing.assert_allclose(res.params.b[0], 0, atol=1e-12)


def test_two_observation_grid_search():
    # hand-built: a kite and a scaled, rotated, jittered copy
    x = np.array([[0.0, 2.0], [1.0, 0.5], [0.0, -1.0], [-1.0, 0.5], [0.1, 0.0]])
    y = act(Similarity(0.3, -0.4, (2.0, 1.0)), x) + np.array([[0.05, 0], [0, -0.03], [0.02, 0.02], [-0.04, 0], [0, 0.01]])
    ctx = CriterionContext.from_observations(np.stack([x, y]), 2)
    a, alpha, _ = estimate_rotation_scaling(ctx)
    s = np.arange(-1.0, 1.0 + 5e-4, 1e-3)
    t = np.arange(-np.pi / 4, np.pi / 4 + 5e-4, 1e-3)
    S, T = np.meshgrid(s, t, indexing="ij")
    # vectorised M0 for a = (s, -s), alpha = (t, -t)
    z = ctx.centered_z
    w1, w2 = np.exp(-S + 1j * T), np.exp(S - 1j * T)
    d = w1[..., None] * z[0] - w2[..., None] * z[1]
    grid = 0.5 * np.sum(np.abs(d) ** 2, axis=-1) / (2 * 5)
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    assert eval_M0(ctx, a, alpha) <= grid[i, j] + 1e-12
    assert abs(a[0] - s[i]) <= 1e-3 and abs(alpha[0] - t[j]) <= 1e-3
    np.testing.assert_allclose(a, [a[0], -a[0]], atol=1e-12)


def test_closed_form_b_properties(rng):
    ds = noisy_dataset(k=21, J=5, seed=2)
    ctx = CriterionContext.from_observations(ds.observations, 6)
    for _ in range(20):
        p = random_params(rng, 5)
        b = closed_form_b(ctx, p.a, p.alpha)
        np.testing.assert_allclose(b.sum(axis=0), 0, atol=1e-10)
        assert eval_Mbar(ctx, ParameterVector(p.a, p.alpha, b)) < 1e-12


def test_closed_form_b_matches_least_squares(rng):
    """Mbar is affine-quadratic in b: solve it on the zero-sum subspace directly."""
    ds = noisy_dataset(k=21, J=4, seed=6)
    ctx = CriterionContext.from_observations(ds.observations, 6)
    J = 4
    basis = np.linalg.svd(np.ones((1, J)))[2][1:].T  # orthonormal basis of the zero-sum subspace
    for _ in range(20):
        p = random_params(rng, J)

        def residual(c):
            b = np.stack([basis @ c[:J - 1], basis @ c[J - 1:]], axis=1)
            z = np.stack([np.exp(-p.a[j]) * (ctx.means[j] - b[j]) @ rotation(-p.alpha[j]) for j in range(J)])
            return (z - z.mean(axis=0)).ravel()

        r0 = residual(np.zeros(2 * (J - 1)))
        jac = np.stack([residual(e) - r0 for e in np.eye(2 * (J - 1))], axis=1)
        c = np.linalg.lstsq(jac, -r0, rcond=None)[0]
        b_ref = np.stack([basis @ c[:J - 1], basis @ c[J - 1:]], axis=1)
        np.testing.assert_allclose(closed_form_b(ctx, p.a, p.alpha), b_ref, atol=1e-8)


def test_closed_form_b_trivial_and_singular():
    ds = noisy_dataset(k=21, J=3, seed=1)
    obs = ds.observations - ds.observations.mean(axis=1, keepdims=True)
    ctx = CriterionContext.from_observations(obs, 5)
    np.testing.assert_allclose(closed_form_b(ctx, np.zeros(3), np.zeros(3)), 0, atol=1e-12)
    ctx2 = CriterionContext.from_observations(ds.observations[:2], 5)
    with pytest.raises(SingularAlignment):
        closed_form_b(ctx2, np.zeros(2), np.array([np.pi / 2, -np.pi / 2]))
    with pytest.raises(DimensionMismatch):
        closed_form_b(ctx, np.zeros(2), np.zeros(2))


def test_closed_form_b_section_translations():
    ds = noisy_dataset(k=21, J=5, kind=None, seed=4)
    ctx = CriterionContext.from_observations(ds.observations, 10)
    _, proj = section_point(ds.truth)
    np.testing.assert_allclose(closed_form_b(ctx, proj.a, proj.alpha), proj.b, atol=1e-10)


def test_section_point(rng):
    zero_sum = ParameterVector([0.1, -0.1], [0.2, -0.2], [[0, 0], [0, 0]])
    g0, proj = section_point(zero_sum)
    np.testing.assert_allclose(g0.params, 0, atol=1e-15)
    np.testing.assert_allclose(proj.to_vector(), zero_sum.to_vector(), atol=1e-15)
    g0, proj = section_point(random_params(rng, 1))
    np.testing.assert_allclose(proj.to_vector(), 0, atol=1e-14)
    for _ in range(50):
        truth = random_params(rng, 3)
        g0, proj = section_point(truth)
        assert abs(proj.a.sum()) <= 1e-12 and abs(proj.alpha.sum()) <= 1e-12
        assert np.max(np.abs(proj.b.sum(axis=0))) <= 1e-12
        for j in range(3):
            np.testing.assert_allclose(proj[j].params, compose(truth[j], g0).params, atol=1e-12)


def test_mean_at_section(rng):
    f = MeanPattern.from_curve(21)
    np.testing.assert_allclose(mean_at_section(f, ParameterVector.zeros(4)), f.config, atol=1e-14)
    shift = ParameterVector(np.zeros(3), np.zeros(3), np.tile([1.5, -2.0], (3, 1)))
    np.testing.assert_allclose(mean_at_section(f, shift), f.config + [1.5, -2.0], atol=1e-13)
    for _ in range(20):
        truth = random_params(rng, 4)
        m = np.mean(np.exp(truth.a)[:, None, None] * rotation(truth.alpha), axis=0)
        direct = np.exp(truth.a.mean()) * (f.config + truth.b.mean(axis=0) @ np.linalg.inv(m)) @ rotation(truth.alpha.mean())
        np.testing.assert_allclose(mean_at_section(f, truth), direct, atol=1e-12)
        # every section-projected deformation pulls its observation back onto the same configuration
        _, proj = section_point(truth)
        for j in range(4):
            y = act(truth[j], f.config)
            np.testing.assert_allclose(act(inverse(proj[j]), y), direct, atol=1e-11)


def test_identical_copies_give_smoothed_pattern():
    f = MeanPattern.from_curve(41).config
    ctx = CriterionContext.from_observations(np.stack([f] * 3), 4)
    res = smoothed_procrustes_mean(ctx)
    np.testing.assert_allclose(res.mean, smooth(f, 4), atol=1e-12)


def test_constraint_satisfaction_and_monotone_trace():
    for seed, kind in enumerate(["white", "stationary", "correlated"] * 3):
        ds = noisy_dataset(k=31, J=6, kind=kind, seed=seed)
        res = smoothed_procrustes_mean(CriterionContext.from_observations(ds.observations, 7))
        p = res.params
        assert abs(p.a.sum()) <= 1e-10 and abs(p.alpha.sum()) <= 1e-10
        assert np.max(np.abs(p.b.sum(axis=0))) <= 1e-10
        assert np.all(np.abs(p.a) <= 1.0) and np.all(np.abs(p.alpha) <= np.pi / 4)
        assert res.mean.shape == (31, 2)
        assert np.all(np.diff(res.diagnostics.trace) <= 0)
        assert res.diagnostics.converged


def test_active_bounds_reported():
    # a tiny box forces the optimum onto it
    ds = noisy_dataset(k=21, J=3, kind=None, bounds=(0.25, 0.5, 1.0), seed=7)
    ctx = CriterionContext.from_observations(ds.observations, 10)
    res = smoothed_procrustes_mean(ctx, Constraints(A=1e-3, Abar=1e-3))
    assert res.diagnostics.active_bounds
    assert np.all(np.abs(res.params.a) <= 1e-3 + 1e-15)


def test_no_convergence_strict():
    ds = noisy_dataset(k=21, J=4, seed=1)
    ctx = CriterionContext.from_observations(ds.observations, 5)
    a, alpha, diag = estimate_rotation_scaling(ctx, options=OptimizerOptions(max_iter=1))
    assert not diag.converged
    with pytest.raises(NoConvergence) as info:
        estimate_rotation_scaling(ctx, options=OptimizerOptions(max_iter=1, strict=True))
    assert info.value.diagnostics.iterations == 1


def test_needs_two_observations():
    ds = noisy_dataset(J=1)
    with pytest.raises(DimensionMismatch):
        smoothed_procrustes_mean(CriterionContext.from_observations(ds.observations, 5))


def test_smoothing_beats_raw_on_white_noise():
    pattern = MeanPattern.from_curve(101)
    noise = NoiseModel("white", 101)
    wins = 0
    for seed in range(30):
        ds = generate_dataset(pattern, 50, DEFAULT_BOUNDS, noise, seed)
        f0 = mean_at_section(pattern, ds.truth)
        errs = [np.sum((smoothed_procrustes_mean(CriterionContext.from_observations(ds.observations, lam)).mean - f0) ** 2)
                for lam in (7, 50)]
        wins += errs[0] < errs[1]
    assert wins >= 24


def test_aligned_mean_matches_definition(rng):
    ds = noisy_dataset(k=21, J=3, seed=9)
    ctx = CriterionContext.from_observations(ds.observations, 5)
    p = random_params(rng, 3)
    direct = np.mean([act(inverse(p[j]), smooth(ds.observations[j], 5)) for j in range(3)], axis=0)
    np.testing.assert_allclose(aligned_mean(ctx, p), direct, atol=1e-12)


# -- GPA baselines --------------------------------------------------------


def test_gpa_copies_give_preshape(rng):
    x = rng.normal(size=(12, 2))
    for fn in (full_procrustes_mean, partial_procrustes_mean):
        np.testing.assert_allclose(fn(np.stack([x] * 4)), preshape(x), atol=1e-12)


def test_gpa_unit_norm_and_rotation_invariance(rng):
    ds = noisy_dataset(k=31, J=8, seed=2)
    mean = full_procrustes_mean(ds.observations)
    assert np.linalg.norm(mean) == pytest.approx(1.0, abs=1e-12)
    value = procrustes_sum_of_squares(ds.observations, mean)
    for beta in (0.3, -2.0):
        assert procrustes_sum_of_squares(ds.observations, mean @ rotation(beta)) == pytest.approx(value, abs=1e-12)


def test_gpa_rotation_equivariance():
    ds = noisy_dataset(k=31, J=8, seed=3)
    beta = 0.7
    for fn, kind in ((full_procrustes_mean, "full"), (partial_procrustes_mean, "partial")):
        mean = fn(ds.observations)
        rotated_inputs = ds.observations @ rotation(beta)
        mean_r = fn(rotated_inputs)
        v0 = procrustes_sum_of_squares(ds.observations, mean, kind)
        v1 = procrustes_sum_of_squares(rotated_inputs, mean_r, kind)
        assert abs(v0 - v1) <= 1e-10
        assert procrustes_sum_of_squares(rotated_inputs, mean @ rotation(beta), kind) == pytest.approx(v0, abs=1e-10)


def test_gpa_full_minimises_criterion(rng):
    ds = noisy_dataset(k=21, J=6, seed=4)
    mean = full_procrustes_mean(ds.observations)
    best = procrustes_sum_of_squares(ds.observations, mean)
    for _ in range(50):
        other = mean + 0.05 * rng.normal(size=mean.shape)
        assert procrustes_sum_of_squares(ds.observations, other - other.mean(axis=0)) >= best - 1e-12


def test_partial_ignores_input_rotation():
    ds = noisy_dataset(k=21, J=5, seed=6)
    obs = ds.observations.copy()
    mean = partial_procrustes_mean(obs)
    obs[2] = obs[2] @ rotation(1.2)
    v0 = procrustes_sum_of_squares(ds.observations, mean, "partial")
    assert procrustes_sum_of_squares(obs, partial_procrustes_mean(obs), "partial") == pytest.approx(v0, abs=1e-10)


def test_partial_agrees_with_full_for_equal_norms(rng):
    x = preshape(rng.normal(size=(15, 2)))
    obs = []
    for _ in range(6):
        y = preshape(x + 1e-6 * rng.normal(size=x.shape)) @ rotation(rng.uniform(-1, 1))
        obs.append(y)
    full, partial = full_procrustes_mean(np.stack(obs)), partial_procrustes_mean(np.stack(obs))
    assert procrustes_distance(full, partial) <= 1e-6
    np.testing.assert_allclose(full, partial, atol=1e-6)


def test_gpa_errors():
    with pytest.raises(DegenerateConfiguration):
        full_procrustes_mean(np.stack([np.ones((5, 2)), np.eye(5, 2)]))
    with pytest.raises(DimensionMismatch):
        full_procrustes_mean(np.ones((1, 5, 2)))
    with pytest.raises(NoConvergence):
        rng = np.random.default_rng(0)
        full_procrustes_mean(rng.normal(size=(30, 15, 2)), max_iter=2)
