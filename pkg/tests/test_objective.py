import math

import numpy as np
import pytest

from smdvar.errors import DomainError
from smdvar.mirror import bregman, euclidean, gaussian_log_partition, neg_entropy
from smdvar.objective import (
    divergence_of,
    expect_finite,
    finite_kl,
    finite_linear_simplex,
    finite_quadratic,
    gaussian_nll,
    mean_divergence,
    relative_smoothness_check,
)


class TestInstances:
    def test_quadratic_optimum_is_weighted_mean(self):
        obj = finite_quadratic([[0.0], [3.0]], probs=[0.25, 0.75], curvatures=[2.0, 1.0])
        # minimizer of 0.25*2/2 (x)^2 + 0.75/2 (x-3)^2
        np.testing.assert_allclose(obj.opt, [0.75 * 3.0 / (0.5 + 0.75)], rtol=1e-14)
        np.testing.assert_allclose(obj.mean_grad(obj.opt), [0.0], atol=1e-14)
        assert (obj.rel_mu, obj.rel_L) == (1.0, 2.0)

    def test_quadratic_mean_is_expectation(self, rng):
        obj = finite_quadratic(rng.normal(size=(4, 3)), curvatures=rng.uniform(0.5, 2, 4))
        x = rng.normal(size=3)
        assert obj.mean_value(x) == pytest.approx(expect_finite(obj, lambda s: obj.value_at(s, x)), rel=1e-13)
        np.testing.assert_allclose(obj.mean_grad(x), expect_finite(obj, lambda s: obj.grad_at(s, x)), rtol=1e-12)

    def test_kl_optimum_is_geometric_mean(self):
        obj = finite_kl([[1.0, 4.0], [4.0, 1.0]])
        np.testing.assert_allclose(obj.opt, [2.0, 2.0], rtol=1e-14)
        np.testing.assert_allclose(obj.mean_grad(obj.opt), 0.0, atol=1e-14)

    def test_gaussian_nll_gradient(self):
        obj = gaussian_nll(0.5, 2.0)
        theta = np.array([0.25, -0.25])  # m = 0.5, var = 2
        np.testing.assert_allclose(obj.mean_grad(theta), 0.0, atol=1e-14)
        np.testing.assert_allclose(obj.grad_at(1.0, theta), [0.5 - 1.0, 0.25 + 2.0 - 1.0], rtol=1e-14)

    def test_gaussian_quadrature_moments(self):
        obj = gaussian_nll(1.0, 4.0)
        nodes = obj.quadrature(32)
        w = np.array([p for _, p in nodes])
        X = np.array([x for x, _ in nodes])
        assert w.sum() == pytest.approx(1.0, rel=1e-14)
        assert w @ X == pytest.approx(1.0, rel=1e-12)
        assert w @ (X - 1.0) ** 4 == pytest.approx(3 * 16.0, rel=1e-12)

    def test_invalid_constants(self):
        with pytest.raises(ValueError):
            finite_quadratic([[0.0]], probs=[0.5])
        with pytest.raises(ValueError):
            finite_kl([[0.0, 1.0]])

    def test_simplex_linear_is_flat(self):
        obj = finite_linear_simplex([[1.0, 0.0], [0.0, 1.0]])
        assert obj.rel_L == 0.0 and math.isinf(obj.max_eta())


class TestDivergences:
    def test_quadratic_divergence_is_scaled_euclidean(self, rng):
        obj = finite_quadratic(rng.normal(size=(3, 2)), curvatures=[0.5, 1.0, 2.0])
        x, y = rng.normal(size=2), rng.normal(size=2)
        for s, a in enumerate([0.5, 1.0, 2.0]):
            assert divergence_of(obj, s, x, y) == pytest.approx(a * 0.5 * float((x - y) @ (x - y)), rel=1e-12)

    def test_gaussian_nll_divergences_equal_log_partition(self, rng):
        A, obj = gaussian_log_partition(), gaussian_nll(0.2, 1.3)
        for _ in range(100):
            x, y = A.random_point(rng), A.random_point(rng)
            d = bregman(A, x, y)
            np.testing.assert_allclose(divergence_of(obj, obj.sample(rng), x, y), d, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(mean_divergence(obj, x, y), d, rtol=1e-9, atol=1e-12)


class TestRelativeSmoothness:
    def test_quadratic_euclidean_passes_with_zero_violation(self, rng):
        rep = relative_smoothness_check(finite_quadratic([[-1.0, 0.0], [1.0, 2.0]]), euclidean(2), 500, rng)
        assert rep.passed
        assert rep.max_violation <= 1e-14

    def test_gaussian_passes(self, rng):
        rep = relative_smoothness_check(gaussian_nll(), gaussian_log_partition(), 500, rng)
        assert rep.passed
        assert rep.max_violation <= 1e-12

    def test_quadratic_against_entropy_on_unit_square_fails(self, rng):
        obj = finite_quadratic([[0.2, 0.7], [0.6, 0.1]])
        rep = relative_smoothness_check(obj, neg_entropy(2), 500, rng,
                                        point_sampler=lambda r: r.uniform(0.0, 1.0, size=2))
        assert not rep.passed
        # on (0,1)^2 the entropy Hessian dominates the identity, so only mu D_h <= D_f can break
        assert rep.side == "lower"
        x, y, s = rep.worst_pair
        assert obj.rel_mu * bregman(neg_entropy(2), x, y) > divergence_of(obj, s, x, y)

    def test_scan_confirms_failure_near_boundary(self):
        h = neg_entropy(2)
        obj = finite_quadratic([[0.5, 0.5]])
        x, y = np.array([0.5, 0.5]), np.array([1e-3, 0.5])
        assert bregman(h, x, y) > divergence_of(obj, 0, x, y)

    def test_sampling_failure(self, rng):
        with pytest.raises(DomainError):
            relative_smoothness_check(finite_kl([[1.0, 2.0]]), neg_entropy(2), 5, rng,
                                      point_sampler=lambda r: -np.ones(2), max_retries=3)
