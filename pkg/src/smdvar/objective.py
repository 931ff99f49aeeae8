"""Stochastic objective families ``f(x) = E f_xi(x)``.

A sample id is opaque: an integer index for finite supports, the realized
draw (a float) for continuous ones.  Coupled quantities (a stochastic step
and its deterministic counterpart) reuse one id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError
from .mirror import MirrorMap, bregman


@dataclass(frozen=True)
class StochasticObjective:
    """A family ``{f_xi}`` with its sampler and declared relative constants.

    ``rel_L``/``rel_mu`` are declared, never estimated: every ``f_xi`` is
    ``rel_L``-relatively smooth and ``rel_mu``-relatively strongly convex
    with respect to the paired mirror.  ``support`` lists ``(id, prob)``
    pairs for finite families; continuous families may instead provide
    ``quadrature(n)`` returning weighted nodes.
    """

    name: str
    dim: int
    sample: Callable[[np.random.Generator], Any]
    value_at: Callable[[Any, np.ndarray], float]
    grad_at: Callable[[Any, np.ndarray], np.ndarray]
    mean_value: Optional[Callable[[np.ndarray], float]] = None
    mean_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    rel_L: float = 1.0
    rel_mu: float = 0.0
    opt: Optional[np.ndarray] = None
    per_sample_opt: Optional[Callable[[Any], np.ndarray]] = None
    support: Optional[tuple] = None
    quadrature: Optional[Callable[[int], list]] = None
    format_sample: Callable[[Any], str] = repr
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.rel_mu < 0 or self.rel_mu > self.rel_L:
            raise ValueError(f"need 0 <= rel_mu <= rel_L, got mu={self.rel_mu}, L={self.rel_L}")
        if self.support is not None:
            total = math.fsum(p for _, p in self.support)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"support probabilities sum to {total}, not 1")

    @property
    def is_finite(self) -> bool:
        return self.support is not None

    def max_eta(self) -> float:
        """``1 / rel_L`` (infinite for ``rel_L = 0``)."""
        return math.inf if self.rel_L == 0 else 1.0 / self.rel_L


def expect_finite(obj: StochasticObjective, fn: Callable[[Any], Any]):
    """Exact expectation of ``fn(xi)`` over a finite support."""
    if obj.support is None:
        raise ValueError(f"{obj.name} has no finite support")
    vals = [(p, fn(s)) for s, p in obj.support]
    if np.ndim(vals[0][1]) == 0:
        return math.fsum(p * float(v) for p, v in vals)
    return sum(p * np.asarray(v, dtype=float) for p, v in vals)


def divergence_of(obj: StochasticObjective, sample, x, y) -> float:
    """``D_{f_xi}(x, y)``."""
    terms = [obj.value_at(sample, x), -obj.value_at(sample, y), *(-obj.grad_at(sample, y) * (x - y)).tolist()]
    return math.fsum(terms)


def mean_divergence(obj: StochasticObjective, x, y) -> float:
    """``D_f(x, y)`` for the mean objective."""
    if obj.mean_value is None or obj.mean_grad is None:
        raise ValueError(f"{obj.name}: mean objective unavailable")
    terms = [obj.mean_value(x), -obj.mean_value(y), *(-obj.mean_grad(y) * (x - y)).tolist()]
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# provided instances


def _uniform(n: int):
    return np.full(n, 1.0 / n)


def _support(probs):
    probs = np.asarray(probs, dtype=float)
    return tuple((i, float(p)) for i, p in enumerate(probs))


def _finite_sampler(probs):
    n = len(probs)
    if np.allclose(probs, probs[0]):
        return lambda rng: int(rng.integers(n))
    cdf = np.asarray(probs, dtype=float)
    return lambda rng: int(rng.choice(n, p=cdf))


def finite_quadratic(atoms, probs=None, curvatures=None) -> StochasticObjective:
    """``f_xi(x) = a_xi/2 ||x - c_xi||^2`` with ``xi`` drawn from a finite list.

    With unit curvatures (the default) this is 1-relatively smooth and
    strongly convex w.r.t. the Euclidean mirror and ``x_*`` is the mean.
    """
    c = np.asarray(atoms, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    n, d = c.shape
    p = _uniform(n) if probs is None else np.asarray(probs, dtype=float)
    a = np.ones(n) if curvatures is None else np.asarray(curvatures, dtype=float)
    if np.any(a <= 0):
        raise ValueError("curvatures must be positive")
    abar = float(p @ a)
    xstar = (p * a) @ c / abar

    def mean_value(x):
        diffs = x[None, :] - c
        return math.fsum((0.5 * p * a * np.einsum("ij,ij->i", diffs, diffs)).tolist())

    return StochasticObjective(
        name="finite_quadratic",
        dim=d,
        sample=_finite_sampler(p),
        value_at=lambda s, x: 0.5 * a[s] * float((x - c[s]) @ (x - c[s])),
        grad_at=lambda s, x: a[s] * (x - c[s]),
        mean_value=mean_value,
        mean_grad=lambda x: abar * x - (p * a) @ c,
        rel_L=float(a.max()),
        rel_mu=float(a.min()),
        opt=xstar,
        per_sample_opt=lambda s: c[s].copy(),
        support=_support(p),
        format_sample=str,
        meta={"atoms": c, "probs": p, "curvatures": a},
    )


def gaussian_nll(m_star: float = 0.0, var_star: float = 1.0) -> StochasticObjective:
    """Negative log-likelihood ``f_X(theta) = A(theta) - <theta, (X, X^2)>``.

    ``X ~ N(m_star, var_star)``; pairs with the Gaussian log-partition
    mirror, w.r.t. which every ``f_X`` is 1-relatively smooth and 1-relatively
    strongly convex.  ``f_X`` has no minimizer, so ``per_sample_opt`` is unknown.
    """
    if var_star <= 0:
        raise ValueError("var_star must be positive")
    mu_star = np.array([m_star, m_star**2 + var_star])
    sd = math.sqrt(var_star)

    def A(t):
        return -t[0] ** 2 / (4.0 * t[1]) - 0.5 * math.log(-t[1])

    def gradA(t):
        var = -0.5 / t[1]
        m = t[0] * var
        return np.array([m, m * m + var])

    def quadrature(n_nodes):
        nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
        xs = m_star + math.sqrt(2.0 * var_star) * nodes
        ws = weights / math.sqrt(math.pi)
        return [(float(x), float(w)) for x, w in zip(xs, ws)]

    return StochasticObjective(
        name="gaussian_nll",
        dim=2,
        sample=lambda rng: float(rng.normal(m_star, sd)),
        value_at=lambda X, t: A(t) - t[0] * X - t[1] * X * X,
        grad_at=lambda X, t: gradA(t) - np.array([X, X * X]),
        mean_value=lambda t: A(t) - float(t @ mu_star),
        mean_grad=lambda t: gradA(t) - mu_star,
        rel_L=1.0,
        rel_mu=1.0,
        opt=np.array([m_star / var_star, -0.5 / var_star]),
        quadrature=quadrature,
        meta={"m_star": m_star, "var_star": var_star},
    )


def finite_linear_simplex(atoms, probs=None) -> StochasticObjective:
    """``f_xi(x) = <xi, x>`` over the probability simplex (entropy x simplex prox path)."""
    c = np.asarray(atoms, dtype=float)
    if c.ndim == 1:
        c = c[None, :]
    n, d = c.shape
    p = _uniform(n) if probs is None else np.asarray(probs, dtype=float)
    cbar = p @ c
    return StochasticObjective(
        name="finite_linear_simplex",
        dim=d,
        sample=_finite_sampler(p),
        value_at=lambda s, x: float(c[s] @ x),
        grad_at=lambda s, x: c[s].copy(),
        mean_value=lambda x: float(cbar @ x),
        mean_grad=lambda x: cbar.copy(),
        rel_L=0.0,
        rel_mu=0.0,
        support=_support(p),
        format_sample=str,
        meta={"atoms": c, "probs": p},
    )


def finite_kl(atoms, probs=None) -> StochasticObjective:
    """Generalized KL ``f_xi(x) = sum x log(x / xi) - x + xi`` on the positive orthant.

    Each ``f_xi`` is the entropy plus a linear term, so it is 1-relatively
    smooth and strongly convex w.r.t. ``neg_entropy``.  The optimum is the
    coordinatewise geometric mean of the atoms.
    """
    c = np.asarray(atoms, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    if np.any(c <= 0):
        raise ValueError("atoms must be positive")
    n, d = c.shape
    p = _uniform(n) if probs is None else np.asarray(probs, dtype=float)
    logc = np.log(c)
    mean_log = p @ logc
    mean_c = p @ c

    def value_at(s, x):
        return math.fsum((x * (np.log(x) - logc[s]) - x + c[s]).tolist())

    def mean_value(x):
        return math.fsum((x * (np.log(x) - mean_log) - x + mean_c).tolist())

    return StochasticObjective(
        name="finite_kl",
        dim=d,
        sample=_finite_sampler(p),
        value_at=value_at,
        grad_at=lambda s, x: np.log(x) - logc[s],
        mean_value=mean_value,
        mean_grad=lambda x: np.log(x) - mean_log,
        rel_L=1.0,
        rel_mu=1.0,
        opt=np.exp(mean_log),
        per_sample_opt=lambda s: c[s].copy(),
        support=_support(p),
        format_sample=str,
        meta={"atoms": c, "probs": p},
    )


# ---------------------------------------------------------------------------


class RelSmoothnessReport(NamedTuple):
    passed: bool
    max_violation: float
    worst_pair: Optional[tuple]
    side: str  # "lower", "upper" or "" when passed
    n_pairs: int


def relative_smoothness_check(
    obj: StochasticObjective,
    h: MirrorMap,
    n_pairs: int,
    rng: np.random.Generator,
    point_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None,
    max_retries: int = 100,
) -> RelSmoothnessReport:
    """Falsify ``mu D_h <= D_{f_xi} <= L D_h`` on random interior pairs.

    A pair fails when either side is violated by more than ``1e-8 (1 + D_h)``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if obj.dim != h.dim:
        raise ValueError(f"dimension mismatch: objective {obj.dim}, mirror {h.dim}")
    sampler = point_sampler or h.random_point
    if sampler is None:
        raise ValueError(f"{h.name} has no random_point; pass point_sampler")

    def draw():
        for _ in range(max_retries):
            x = np.asarray(sampler(rng), dtype=float)
            if h.in_domain(x, h.eps_dom):
                return x
        raise DomainError(f"could not sample an interior point of {h.name} in {max_retries} tries")

    worst, worst_pair, side = 0.0, None, ""
    failed = False
    for _ in range(n_pairs):
        x, y = draw(), draw()
        s = obj.sample(rng)
        dh = bregman(h, x, y)
        df = divergence_of(obj, s, x, y)
        for name, viol in (("lower", obj.rel_mu * dh - df), ("upper", df - obj.rel_L * dh)):
            if viol > worst:
                worst, worst_pair = viol, (x, y, s)
            if viol > 1e-8 * (1.0 + dh):
                failed = True
                side = side or name
    return RelSmoothnessReport(not failed, worst, worst_pair, side if failed else "", n_pairs)
