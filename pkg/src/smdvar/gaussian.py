"""Closed forms for online estimation of a 1-D Gaussian as mirror descent.

The natural parameters ``theta = (m / var, -1 / (2 var))`` and the mean
parameters ``mu = (m, m^2 + var)`` are linked by ``mu = grad A(theta)``.  A
mirror step on the negative log-likelihood with the log-partition mirror is
a convex combination in mean coordinates, so MAP estimation has a closed
form and every expectation we need is one-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import digamma

from .errors import DegenerateVariance, DomainError, OutOfBranch, QuadratureUnderflow
from .smd import RunConfig, StepSchedule, replica_seed, run
from .objective import gaussian_nll
from .mirror import gaussian_log_partition


@dataclass(frozen=True)
class GaussParams:
    """A univariate Gaussian stored as ``(m, var)`` with natural and mean views."""

    m: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.m) and math.isfinite(self.var)):
            raise DomainError(f"non-finite Gaussian parameters ({self.m}, {self.var})")
        if not self.var > 0:
            raise DomainError(f"variance must be positive, got {self.var}")

    @classmethod
    def from_theta(cls, theta) -> "GaussParams":
        t1, t2 = (float(v) for v in theta)
        if not t2 < 0:
            raise DomainError(f"theta2 must be negative, got {t2}")
        var = -0.5 / t2
        return cls(t1 * var, var)

    @classmethod
    def from_mu(cls, mu) -> "GaussParams":
        m1, m2 = (float(v) for v in mu)
        var = m2 - m1 * m1
        if not var > 0:
            raise DegenerateVariance(f"mean parameters {mu} give variance {var}")
        return cls(m1, var)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.m / self.var, -0.5 / self.var])

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.m, self.m * self.m + self.var])


def _params(p) -> GaussParams:
    return p if isinstance(p, GaussParams) else GaussParams.from_theta(p)


def d_A(tilde, theta) -> float:
    """``D_A(tilde, theta)``, i.e. ``KL(N(m, var) || N(m~, var~))``."""
    a, b = _params(tilde), _params(theta)
    return math.fsum([-0.5 * math.log(b.var / a.var), -(a.var - b.var) / (2.0 * a.var),
                      (a.m - b.m) ** 2 / (2.0 * a.var)])


def d_A_to_truth(m, var, m_star: float = 0.0, var_star: float = 1.0):
    """Vectorized ``D_A(theta_*, theta)`` for arrays of ``(m, var)``."""
    m, var = np.asarray(m, dtype=float), np.asarray(var, dtype=float)
    return -0.5 * np.log(var / var_star) - (var_star - var) / (2.0 * var_star) + (m_star - m) ** 2 / (2.0 * var_star)


def f_gaussian(p, m_star: float = 0.0, var_star: float = 1.0) -> float:
    """Expected negative log-likelihood up to the additive constant of the density."""
    p = _params(p)
    return 0.5 * math.log(2.0 * p.var) + var_star / (2.0 * p.var) + (p.m - m_star) ** 2 / (2.0 * p.var)


def update(p, eta: float, X: float) -> GaussParams:
    """One mirror step on ``f_X``: ``m+ = (1-eta) m + eta X`` and
    ``var+ = (1-eta)(var + eta (m - X)^2)``."""
    p = _params(p)
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    m = (1.0 - eta) * p.m + eta * X
    var = (1.0 - eta) * (p.var + eta * (p.m - X) ** 2)
    if not var > 0:
        raise DegenerateVariance(f"step with eta={eta} collapsed the variance")
    return GaussParams(m, var)


# ---------------------------------------------------------------------------
# MAP estimation


@dataclass(frozen=True)
class MapRunSpec:
    """A MAP run: prior weight ``n0``, prior mean parameters ``mu0`` and ``n`` samples."""

    n0: int
    mu0: tuple = (0.0, 1.0)
    n: int = 100
    m_star: float = 0.0
    var_star: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1 (use mle_two_step for the MLE)")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        GaussParams.from_mu(self.mu0)

    def draw(self) -> np.ndarray:
        """The samples ``smd.run`` would draw with this seed."""
        rng = np.random.default_rng(self.seed)
        sd = math.sqrt(self.var_star)
        return np.array([rng.normal(self.m_star, sd) for _ in range(self.n)])

    def run_config(self, record_every: int = 1) -> RunConfig:
        return RunConfig(
            mirror=gaussian_log_partition(),
            objective=gaussian_nll(self.m_star, self.var_star),
            schedule=StepSchedule.map(self.n0),
            horizon=self.n,
            seed=self.seed,
            x0=GaussParams.from_mu(self.mu0).theta,
            record_every=record_every,
        )


def map_mean_path(n0: int, mu0, samples) -> np.ndarray:
    """Mean parameters ``mu^k = (n0 mu0 + sum_{i<=k} T(X_i)) / (n0 + k)`` for ``k = 0..n``."""
    X = np.asarray(samples, dtype=float)
    T = np.column_stack([X, X * X]) if X.size else np.zeros((0, 2))
    sums = np.vstack([np.zeros(2), np.cumsum(T, axis=0)])
    k = np.arange(len(X) + 1)[:, None]
    return (n0 * np.asarray(mu0, dtype=float) + sums) / (n0 + k)


def map_closed_form(spec: MapRunSpec, samples: Optional[Sequence[float]] = None) -> list:
    """MAP iterates ``theta^0..theta^n`` as :class:`GaussParams`."""
    X = spec.draw() if samples is None else np.asarray(samples, dtype=float)
    out = []
    for k, mu in enumerate(map_mean_path(spec.n0, spec.mu0, X)):
        try:
            out.append(GaussParams.from_mu(mu))
        except DegenerateVariance as err:
            raise DegenerateVariance(f"step {k}: {err}") from None
    return out


# ---------------------------------------------------------------------------
# the transformed objective


def _gh(n_nodes: int, m_star: float, var_star: float):
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    return m_star + math.sqrt(2.0 * var_star) * nodes, weights / math.sqrt(math.pi)


def f_eta_gaussian(p, eta: float, m_star: float = 0.0, var_star: float = 1.0, quad_nodes: int = 64) -> float:
    """``f_eta(theta) - f(theta_*)`` by Gauss-Hermite quadrature.

    Uses ``(1/(2 eta)) E log((1-eta)(1 + eta (m-X)^2/var)) - 0.5 log(var_*/var)``.
    """
    if eta >= 1:
        raise QuadratureUnderflow(f"f_eta needs eta < 1, got {eta}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if quad_nodes < 16:
        raise ValueError("quad_nodes must be >= 16")
    p = _params(p)
    X, w = _gh(quad_nodes, m_star, var_star)
    inner = math.log1p(-eta) + np.log1p(eta * (p.m - X) ** 2 / p.var)
    return float(w @ inner) / (2.0 * eta) - 0.5 * math.log(var_star / p.var)


def stationarity_residual(p, eta: float, m_star: float = 0.0, var_star: float = 1.0, quad_nodes: int = 64) -> float:
    """``E[(m - X)^2 / (var + eta (m - X)^2)] - 1``, zero at the minimizer of ``f_eta``."""
    p = _params(p)
    X, w = _gh(quad_nodes, m_star, var_star)
    r2 = (p.m - X) ** 2
    return float(w @ (r2 / (p.var + eta * r2))) - 1.0


FINITE_ONLY = "FINITE_ONLY"


class GaussianVarianceBounds(NamedTuple):
    sigma_bound: float
    interval: tuple  # (lo, hi) for the minimizing variance


def lemma4_bounds(eta: float, var_star: float = 1.0):
    """``sigma^2_{*,eta} <= -log(1 - 3 eta) / (2 eta)`` and ``var_eta in [(1-3eta) var_*, var_*]``.

    For ``1/3 <= eta < 1`` only finiteness is known and :data:`FINITE_ONLY`
    is returned.
    """
    if not 0 < eta < 1:
        raise OutOfBranch(f"eta must lie in (0, 1), got {eta}")
    if eta >= 1.0 / 3.0:
        return FINITE_ONLY
    return GaussianVarianceBounds(-math.log1p(-3.0 * eta) / (2.0 * eta), ((1.0 - 3.0 * eta) * var_star, var_star))


class MapBound(NamedTuple):
    value: float
    gamma_symbolic: bool  # True when an unquantified constant is omitted (n0 <= 3)


def theorem3_bound(n: int, n0: int, D0: float) -> MapBound:
    """``(n0 D0 + 1.5 log(1 + (n+1)/n0) + Gamma) / (n + n0)``, ``Gamma = 0`` for ``n0 > 3``."""
    if n < 0 or n0 < 1 or D0 < 0:
        raise ValueError("need n >= 0, n0 >= 1 and D0 >= 0")
    value = (n0 * D0 + 1.5 * math.log1p((n + 1) / n0)) / (n + n0)
    return MapBound(value, n0 <= 3)


def modified_bound(n, n0: int, D0: float):
    """``2 n0 (n0-1) D0 / (n (n-1)) + 6 / n`` for the ``2/(k+1)`` step estimator."""
    n = np.asarray(n, dtype=float)
    out = 2.0 * n0 * (n0 - 1) * D0 / (n * (n - 1.0)) + 6.0 / n
    return float(out) if out.ndim == 0 else out


def modified_estimator_run(n0: int, theta_n0, n: int, seed: int, m_star: float = 0.0, var_star: float = 1.0):
    """Run ``n - n0`` mirror steps with ``eta_k = 2/(k+1)``, ``k = n0..n-1``.

    Returns the trace (its row ``j`` holds ``theta^{n0+j}``) and the bound on
    ``E D_A(theta_*, theta^n)``.
    """
    if n0 < 6 or n <= n0:
        raise ValueError("need n > n0 >= 6")
    start = _params(theta_n0)
    cfg = RunConfig(gaussian_log_partition(), gaussian_nll(m_star, var_star), StepSchedule.halving(n0),
                    n - n0, seed, start.theta)
    star = GaussParams(m_star, var_star)
    return run(cfg), modified_bound(n, n0, d_A(star, start))


# ---------------------------------------------------------------------------
# replica experiments (vectorized over replicas; replica i uses replica_seed(seed, i))


def _replica_samples(n: int, replicas: int, seed: int, m_star: float, var_star: float) -> np.ndarray:
    sd = math.sqrt(var_star)
    return np.stack([np.random.default_rng(replica_seed(seed, i)).normal(m_star, sd, size=n) for i in range(replicas)])


class CurveResult(NamedTuple):
    n: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicas: int
    D0: float


def _summarize(ns, D, D0) -> CurveResult:
    r = D.shape[0]
    se = D.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.zeros(D.shape[1])
    return CurveResult(np.asarray(ns), D.mean(axis=0), se, r, D0)


def map_experiment(n0: int, n: int, replicas: int, seed: int = 0, mu0=(0.0, 1.0),
                   m_star: float = 0.0, var_star: float = 1.0) -> CurveResult:
    """Replica mean of ``D_A(theta_*, theta^k)`` along MAP runs, ``k = 0..n``."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    X = _replica_samples(n, replicas, seed, m_star, var_star)
    mu0 = np.asarray(mu0, dtype=float)
    k = np.arange(n + 1)
    s1 = np.concatenate([np.zeros((replicas, 1)), np.cumsum(X, axis=1)], axis=1)
    s2 = np.concatenate([np.zeros((replicas, 1)), np.cumsum(X * X, axis=1)], axis=1)
    mu1 = (n0 * mu0[0] + s1) / (n0 + k)
    mu2 = (n0 * mu0[1] + s2) / (n0 + k)
    D = d_A_to_truth(mu1, mu2 - mu1**2, m_star, var_star)
    D0 = d_A(GaussParams(m_star, var_star), GaussParams.from_mu(mu0))
    return _summarize(k, D, D0)


def modified_experiment(n0: int, n: int, replicas: int, seed: int = 0, start=GaussParams(0.0, 1.0),
                        m_star: float = 0.0, var_star: float = 1.0) -> CurveResult:
    """Replica mean of ``D_A(theta_*, theta^k)`` for ``k = n0..n`` of the ``2/(k+1)`` estimator."""
    if n0 < 6 or n <= n0:
        raise ValueError("need n > n0 >= 6")
    start = _params(start)
    X = _replica_samples(n - n0, replicas, seed, m_star, var_star)
    m = np.full(replicas, start.m)
    var = np.full(replicas, start.var)
    D = np.empty((replicas, n - n0 + 1))
    D[:, 0] = d_A_to_truth(m, var, m_star, var_star)
    for j in range(n - n0):
        eta = 2.0 / (n0 + j + 1)
        x = X[:, j]
        var = (1.0 - eta) * (var + eta * (m - x) ** 2)
        m = (1.0 - eta) * m + eta * x
        D[:, j + 1] = d_A_to_truth(m, var, m_star, var_star)
    return _summarize(np.arange(n0, n + 1), D, d_A(GaussParams(m_star, var_star), start))


def loglog_slope(n, y, lo: float, hi: float) -> float:
    """Least-squares slope of ``log y`` against ``log n`` over ``lo <= n <= hi``."""
    n, y = np.asarray(n, dtype=float), np.asarray(y, dtype=float)
    sel = (n >= lo) & (n <= hi)
    if sel.sum() < 2:
        raise ValueError("need at least two points in the fit window")
    return float(np.polyfit(np.log(n[sel]), np.log(y[sel]), 1)[0])


# ---------------------------------------------------------------------------
# MLE from two samples


def mle_two_step(X1: float, X2: float, m_star: float = 0.0, var_star: float = 1.0) -> tuple:
    """Two-sample MLE ``((X1+X2)/2, (X1-X2)^2/4)`` and its ``D_A(theta_*, .)``."""
    if X1 == X2:
        raise DegenerateVariance("two equal samples give zero variance")
    p = GaussParams(0.5 * (X1 + X2), 0.25 * (X1 - X2) ** 2)
    return p, d_A(GaussParams(m_star, var_star), p)


MLE_TWO_STEP_CONSTANT = -0.5 * float(digamma(0.5))


class MCEstimate(NamedTuple):
    mean: float
    stderr: float
    n_draws: int


def _mc(values) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    return MCEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), values.size)


def mle_two_step_draws(n_draws: int, seed: int = 0, m_star: float = 0.0, var_star: float = 1.0) -> np.ndarray:
    """``D_A(theta_*, theta^2)`` for ``n_draws`` independent sample pairs."""
    rng = np.random.default_rng(seed)
    X = rng.normal(m_star, math.sqrt(var_star), size=(n_draws, 2))
    m = X.mean(axis=1)
    var = 0.25 * (X[:, 0] - X[:, 1]) ** 2
    return d_A_to_truth(m, var, m_star, var_star)


def mle_two_step_constant_mc(n_draws: int = 10**6, seed: int = 0, m_star: float = 0.0,
                             var_star: float = 1.0) -> MCEstimate:
    """Monte-Carlo ``E D_A(theta_*, theta^2)``; compare with :data:`MLE_TWO_STEP_CONSTANT`."""
    return _mc(mle_two_step_draws(n_draws, seed, m_star, var_star))


def mle_variance_mc(n: int, n_draws: int = 10**5, seed: int = 0, m_star: float = 0.0,
                    var_star: float = 1.0) -> MCEstimate:
    """Monte-Carlo ``E[(Sigma^(n))^2]`` of the ``n``-sample MLE (expected ``(1 - 1/n) var_*``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    X = np.random.default_rng(seed).normal(m_star, math.sqrt(var_star), size=(n_draws, n))
    return _mc(X.var(axis=1))


def scale_invariance_pvalue(n_draws: int, settings_a: tuple, settings_b: tuple, seed: int = 0) -> float:
    """Two-sample KS p-value comparing ``D_A(theta_*, theta^2)`` under two truths ``(m_*, var_*)``."""
    a = mle_two_step_draws(n_draws, replica_seed(seed, 0), *settings_a)
    b = mle_two_step_draws(n_draws, replica_seed(seed, 1), *settings_b)
    return float(stats.ks_2samp(a, b).pvalue)


# ---------------------------------------------------------------------------
# experiment table


EXPERIMENT_HEADER = ("n", "n0", "replicas", "mean_dA", "stderr", "theorem3_bound", "modified_bound")


def experiment_rows(curve: CurveResult, n0: int, kind: str) -> list:
    """Rows of the experiment CSV; ``kind`` selects which bound column is filled."""
    rows = []
    for n, mean, se in zip(curve.n, curve.mean, curve.stderr):
        t3 = theorem3_bound(int(n), n0, curve.D0).value if kind == "map" else None
        mod = modified_bound(int(n), n0, curve.D0) if kind == "modified" and n > 1 else None
        rows.append((int(n), n0, curve.replicas, float(mean), float(se), t3, mod))
    return rows
