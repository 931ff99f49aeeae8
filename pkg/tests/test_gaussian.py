import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from smdvar.errors import DegenerateVariance, DomainError, OutOfBranch, QuadratureUnderflow
from smdvar.gaussian import (
    EXPERIMENT_HEADER,
    FINITE_ONLY,
    MLE_TWO_STEP_CONSTANT,
    GaussParams,
    MapRunSpec,
    d_A,
    d_A_to_truth,
    experiment_rows,
    f_eta_gaussian,
    f_gaussian,
    lemma4_bounds,
    loglog_slope,
    map_closed_form,
    map_experiment,
    mle_two_step,
    mle_two_step_constant_mc,
    mle_variance_mc,
    modified_bound,
    modified_estimator_run,
    modified_experiment,
    scale_invariance_pvalue,
    stationarity_residual,
    theorem3_bound,
    update,
)
from smdvar.mirror import bregman, gaussian_log_partition
from smdvar.objective import gaussian_nll
from smdvar.smd import replica_seed, run, smd_step

STAR = GaussParams(0.0, 1.0)


def kl_by_integration(p, q):
    """KL(N(p) || N(q)) by adaptive quadrature of the log density ratio."""
    P, Q = stats.norm(p.m, math.sqrt(p.var)), stats.norm(q.m, math.sqrt(q.var))
    val, _ = integrate.quad(lambda x: P.pdf(x) * (P.logpdf(x) - Q.logpdf(x)), -np.inf, np.inf, epsabs=1e-13)
    return val


class TestParams:
    def test_round_trips(self, rng):
        for _ in range(20):
            p = GaussParams(rng.normal(), rng.uniform(0.1, 5))
            for q in (GaussParams.from_theta(p.theta), GaussParams.from_mu(p.mu)):
                assert q.m == pytest.approx(p.m, rel=1e-12, abs=1e-14)
                assert q.var == pytest.approx(p.var, rel=1e-12)

    def test_theta_layout(self):
        np.testing.assert_allclose(GaussParams(1.0, 2.0).theta, [0.5, -0.25])
        np.testing.assert_allclose(GaussParams(1.0, 2.0).mu, [1.0, 3.0])

    def test_domain(self):
        for bad in ((0.0, 0.0), (0.0, -1.0), (math.nan, 1.0)):
            with pytest.raises(DomainError):
                GaussParams(*bad)
        with pytest.raises(DegenerateVariance):
            GaussParams.from_mu([1.0, 1.0])


class TestDivergence:
    def test_example_value(self):
        # KL(N(0,1) || N(1,2)) = (log 2 + (1 + 1)/2 - 1) / 2
        assert d_A(GaussParams(1, 2), GaussParams(0, 1)) == pytest.approx(0.5 * math.log(2), rel=1e-14)
        assert d_A(GaussParams(0, 2), GaussParams(0, 1)) == pytest.approx(0.09657, abs=1e-5)

    def test_against_integration_and_mirror(self, rng):
        A = gaussian_log_partition()
        for _ in range(10):
            a = GaussParams(rng.normal(), rng.uniform(0.3, 3))
            b = GaussParams(rng.normal(), rng.uniform(0.3, 3))
            expected = kl_by_integration(b, a)
            assert d_A(a, b) == pytest.approx(expected, rel=1e-8, abs=1e-12)
            assert bregman(A, a.theta, b.theta) == pytest.approx(expected, rel=1e-8, abs=1e-12)
            assert d_A_to_truth(b.m, b.var, a.m, a.var) == pytest.approx(d_A(a, b), rel=1e-12)

    def test_equals_excess_likelihood(self, rng):
        star = GaussParams(0.4, 1.7)
        for _ in range(10):
            p = GaussParams(rng.normal(), rng.uniform(0.2, 4))
            excess = f_gaussian(p, star.m, star.var) - f_gaussian(star, star.m, star.var)
            assert d_A(p, star) == pytest.approx(excess, rel=1e-10, abs=1e-13)


class TestUpdate:
    def test_matches_generic_mirror_step(self, rng):
        A, obj = gaussian_log_partition(), gaussian_nll()
        for _ in range(10):
            p, eta, X = GaussParams(rng.normal(), rng.uniform(0.2, 3)), rng.uniform(0.01, 0.9), rng.normal()
            q = GaussParams.from_theta(smd_step(A, obj, p.theta, eta, X))
            r = update(p, eta, X)
            assert r.m == pytest.approx(q.m, rel=1e-9, abs=1e-12)
            assert r.var == pytest.approx(q.var, rel=1e-9)

    def test_full_step_is_degenerate(self):
        with pytest.raises(DegenerateVariance):
            update(GaussParams(0, 1), 1.0, 0.3)


class TestMap:
    def test_matches_generic_run(self):
        spec = MapRunSpec(n0=4, mu0=(0.5, 2.0), n=200, seed=9)
        trace = run(spec.run_config())
        closed = map_closed_form(spec)
        for rec, p in zip(trace.records, closed):
            np.testing.assert_allclose(rec.x, p.theta, rtol=1e-9, atol=1e-12)

    def test_hand_example(self):
        spec = MapRunSpec(n0=1, mu0=(0.0, 1.0), n=2)
        path = map_closed_form(spec, samples=[1.0, -1.0])
        assert (path[1].m, path[1].var) == pytest.approx((0.5, 0.75))
        assert (path[2].m, path[2].var) == pytest.approx((0.0, 1.0))

    def test_degenerate_prior(self):
        with pytest.raises(DegenerateVariance):
            MapRunSpec(n0=2, mu0=(1.0, 0.5))
        with pytest.raises(ValueError):
            MapRunSpec(n0=0)

    def test_experiment_matches_manual_updates(self):
        n0, n, reps, seed = 3, 40, 4, 11
        curve = map_experiment(n0, n, reps, seed, mu0=(0.2, 1.5))
        D = np.zeros((reps, n + 1))
        for i in range(reps):
            X = np.random.default_rng(replica_seed(seed, i)).normal(size=n)
            p = GaussParams.from_mu((0.2, 1.5))
            D[i, 0] = d_A(STAR, p)
            for k in range(n):
                p = update(p, 1.0 / (k + n0 + 1), X[k])
                D[i, k + 1] = d_A(STAR, p)
        np.testing.assert_allclose(curve.mean, D.mean(axis=0), rtol=1e-9, atol=1e-13)


class TestTransformedObjective:
    def test_monte_carlo_at_eta_02(self):
        p, eta = GaussParams(0.3, 1.4), 0.2
        X = np.random.default_rng(3).normal(size=10**6)
        m_plus = (1 - eta) * p.m + eta * X
        v_plus = (1 - eta) * (p.var + eta * (p.m - X) ** 2)
        vals = d_A_to_truth(m_plus, v_plus, p.m, p.var) / eta
        mc = f_gaussian(p) - f_gaussian(STAR) - vals.mean()
        assert abs(f_eta_gaussian(p, eta) - mc) <= 4 * vals.std() / 1000

    def test_minimizer_is_stationary_and_in_interval(self):
        for eta in (0.05, 0.1, 0.2, 0.3):
            res = optimize.minimize(lambda z: f_eta_gaussian(GaussParams(z[0], math.exp(z[1])), eta),
                                    [0.1, 0.0], method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
            m, v = res.x[0], math.exp(res.x[1])
            assert abs(m) <= 1e-5
            assert abs(stationarity_residual(GaussParams(m, v), eta)) <= 1e-6
            lo, hi = lemma4_bounds(eta).interval
            assert lo <= v <= hi
            sigma2 = -f_eta_gaussian(GaussParams(m, v), eta) / eta
            assert sigma2 <= lemma4_bounds(eta).sigma_bound

    def test_errors(self):
        with pytest.raises(QuadratureUnderflow):
            f_eta_gaussian(STAR, 1.0)
        with pytest.raises(ValueError):
            f_eta_gaussian(STAR, 0.1, quad_nodes=8)


class TestClosedFormBounds:
    def test_lemma_bounds(self):
        b = lemma4_bounds(0.1)
        assert b.sigma_bound == pytest.approx(-math.log(0.7) / 0.2, rel=1e-14)
        assert b.sigma_bound == pytest.approx(1.78337, abs=1e-5)
        assert b.interval == pytest.approx((0.7, 1.0))
        assert lemma4_bounds(0.5) == FINITE_ONLY
        assert lemma4_bounds(1.0 / 3.0) == FINITE_ONLY
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(OutOfBranch):
                lemma4_bounds(bad)

    def test_map_bound(self):
        b = theorem3_bound(10, 4, 1.0)
        assert b.value == pytest.approx((4 + 1.5 * math.log(1 + 11 / 4)) / 14, rel=1e-14)
        assert not b.gamma_symbolic and theorem3_bound(10, 3, 1.0).gamma_symbolic
        with pytest.raises(ValueError):
            theorem3_bound(10, 0, 1.0)

    def test_modified_bound(self):
        assert modified_bound(10, 6, 1.0) == pytest.approx(2 * 6 * 5 / 90 + 0.6)
        np.testing.assert_allclose(modified_bound(np.array([10, 20]), 6, 0.0), [0.6, 0.3])


class TestModifiedEstimator:
    def test_run_matches_manual(self):
        start = GaussParams(1.0, 2.0)
        trace, bound = modified_estimator_run(6, start.theta, 30, seed=4)
        rng = np.random.default_rng(4)
        p = start
        for k in range(6, 30):
            p = update(p, 2.0 / (k + 1), rng.normal())
        np.testing.assert_allclose(trace.records[-1].x, p.theta, rtol=1e-9)
        assert bound == pytest.approx(modified_bound(30, 6, d_A(STAR, start)))

    def test_experiment_rows(self):
        curve = modified_experiment(6, 50, 8, seed=1, start=GaussParams(1.0, 2.0))
        rows = experiment_rows(curve, 6, "modified")
        assert len(EXPERIMENT_HEADER) == 7 and len(rows) == 45
        assert rows[0][0] == 6 and rows[0][5] is None and rows[-1][6] == pytest.approx(modified_bound(50, 6, curve.D0))
        mrows = experiment_rows(map_experiment(4, 5, 3), 4, "map")
        assert mrows[2][5] == pytest.approx(theorem3_bound(2, 4, 0.0).value) and mrows[2][6] is None

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            modified_experiment(5, 50, 2)

    def test_slope(self):
        n = np.arange(10, 1000)
        assert loglog_slope(n, 3.0 / n, 10, 999) == pytest.approx(-1.0, abs=1e-12)


class TestMle:
    def test_example(self):
        p, D = mle_two_step(0.0, 2.0)
        assert (p.m, p.var, D) == pytest.approx((1.0, 1.0, 0.5))
        with pytest.raises(DegenerateVariance):
            mle_two_step(1.0, 1.0)

    def test_constant(self):
        # -psi(1/2)/2 = (gamma + 2 log 2) / 2
        assert MLE_TWO_STEP_CONSTANT == pytest.approx((np.euler_gamma + 2 * math.log(2)) / 2, rel=1e-14)
        est = mle_two_step_constant_mc(200_000, seed=2)
        assert abs(est.mean - MLE_TWO_STEP_CONSTANT) <= 4 * est.stderr

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_variance_identity(self, n):
        est = mle_variance_mc(n, 100_000, seed=n)
        assert abs(est.mean - (1 - 1 / n)) <= 4 * est.stderr

    def test_scale_invariance(self):
        assert scale_invariance_pvalue(20_000, (0.0, 1.0), (3.0, 0.25), seed=1) > 0.01
