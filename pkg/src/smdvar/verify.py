"""Randomized verification of the Bregman identities and the convergence inequalities.

Every check returns a :class:`CheckResult` whose ``max_err`` is the worst
violation found, measured relative to the size of the compared terms.  The
checks are falsification tests: they draw random instances from a seeded
generator and report the worst case.
"""

from __future__ import annotations

import math
import time
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import gaussian as gs
from .mirror import (
    MirrorMap,
    bregman,
    bregman_dual,
    conj_bregman_direct,
    euclidean,
    gaussian_log_partition,
    neg_entropy,
    symmetrized_bregman,
)
from .objective import (
    StochasticObjective,
    divergence_of,
    expect_finite,
    finite_kl,
    finite_linear_simplex,
    finite_quadratic,
    gaussian_nll,
    mean_divergence,
    relative_smoothness_check,
)
from .smd import ProxSpec, RunConfig, StepSchedule, dual_identity_residual, prox_smd_step, run, smd_step
from .variance import FEtaEstimator, f_eta_at, f_plus_star, phi_monotonicity_check, sigma_star_sq


class CheckResult(NamedTuple):
    name: str
    passed: bool
    n_cases: int
    max_err: float
    tol: float
    detail: str = ""
    seconds: float = 0.0

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name},{status},{self.n_cases},{self.max_err:.3e},{self.tol:.1e},{self.detail}"


ROW_HEADER = "check,status,cases,max_err,tol,detail"


def _rel(a: float, b: float, floor: float = 1e-12) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _excess(lhs: float, rhs: float, scale: float) -> float:
    """How much ``lhs <= rhs`` is violated, relative to ``scale``."""
    return max(0.0, (lhs - rhs) / max(1.0, scale))


def mirrors() -> dict:
    return {"euclidean": euclidean(3), "neg_entropy": neg_entropy(3), "gaussian_log_partition": gaussian_log_partition()}


# ---------------------------------------------------------------------------
# Bregman lemmas


def check_duality(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-8) -> CheckResult:
    """``D_h(x, y) = D_{h*}(grad h(y), grad h(x))`` with ``D_{h*}`` built from ``h*`` directly."""
    worst = 0.0
    for _ in range(n):
        x, y = h.random_point(rng), h.random_point(rng)
        worst = max(worst, _rel(bregman(h, x, y), conj_bregman_direct(h, h.grad(y), h.grad(x))))
    return CheckResult(f"duality[{h.name}]", worst <= tol, n, worst, tol)


def check_symmetrized(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-8) -> CheckResult:
    """``D_h(x, y) + D_h(y, x) = <grad h(x) - grad h(y), x - y>``."""
    worst = 0.0
    for _ in range(n):
        x, y = h.random_point(rng), h.random_point(rng)
        worst = max(worst, _rel(bregman(h, x, y) + bregman(h, y, x), symmetrized_bregman(h, x, y)))
    return CheckResult(f"symmetrized[{h.name}]", worst <= tol, n, worst, tol)


class _SmoothFn(NamedTuple):
    grad: Callable
    div: Callable  # D_f(x, y)
    L: float


def _random_smooth_fn(h: MirrorMap, rng: np.random.Generator) -> _SmoothFn:
    """A convex ``f`` that is ``L``-relatively smooth w.r.t. ``h``, with its exact ``D_f``.

    Euclidean: a random PSD quadratic.  Entropy: a coordinate-weighted
    entropy plus a linear term.  Gaussian: a multiple of ``A`` plus a linear
    term.  ``L`` is sometimes declared looser than the tight constant.
    """
    d = h.dim
    slack = 1.0 if rng.random() < 0.5 else float(rng.uniform(1.0, 2.0))
    if h.name == "euclidean":
        B = rng.normal(size=(d, d))
        Q = B @ B.T + 1e-3 * np.eye(d)
        b = rng.normal(size=d)
        L = float(np.linalg.eigvalsh(Q).max())
        return _SmoothFn(lambda x: Q @ x + b, lambda x, y: 0.5 * float((x - y) @ Q @ (x - y)), L * slack)
    if h.name == "neg_entropy":
        w = rng.uniform(0.1, 2.0, size=d)
        b = rng.normal(size=d)
        return _SmoothFn(lambda x: w * (np.log(x) + 1.0) + b,
                         lambda x, y: math.fsum((w * (x * np.log(x / y) - x + y)).tolist()), float(w.max()) * slack)
    a = float(rng.uniform(0.1, 2.0))
    b = rng.normal(size=d)
    return _SmoothFn(lambda x: a * h.grad(x) + b, lambda x, y: a * bregman(h, x, y), a * slack)


def check_cocoercivity(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-8) -> CheckResult:
    """``D_{h*}(grad h(x) - eta[grad f(x) - grad f(y)], grad h(x)) <= eta D_f(x, y)`` for ``eta <= 1/L``,
    together with the tighter form ``D_h(x, x^{+y}) + eta D_f(x^{+y}, y) <= eta D_f(x, y)``."""
    worst = 0.0
    for i in range(n):
        f = _random_smooth_fn(h, rng)
        x, y = h.random_point(rng), h.random_point(rng)
        eta = 1.0 / f.L if i % 4 == 0 else float(rng.uniform(0.0, 1.0)) / f.L
        q = h.grad(x)
        p = q - eta * (f.grad(x) - f.grad(y))
        rhs = eta * f.div(x, y)
        lhs = bregman_dual(h, p, q)
        xy = h.conj_grad(p)
        tight = bregman(h, x, xy) + eta * f.div(xy, y)
        worst = max(worst, _excess(lhs, rhs, 0.0) / max(rhs, 1e-300) if rhs > 0 else lhs,
                    _excess(tight, rhs, 0.0) / max(rhs, 1e-300) if rhs > 0 else tight)
    return CheckResult(f"cocoercivity[{h.name}]", worst <= tol, n, worst, tol)


def check_bias_variance(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-8, k: int = 5) -> CheckResult:
    """``E D_{h*}(X, u) = D_{h*}(E X, u) + E D_{h*}(X, E X)`` for discrete dual-space ``X``."""
    worst = 0.0
    for _ in range(n):
        X = np.array([h.grad(h.random_point(rng)) for _ in range(k)])
        w = rng.dirichlet(np.ones(k))
        u = h.grad(h.random_point(rng))
        EX = w @ X
        lhs = math.fsum(wi * conj_bregman_direct(h, xi, u) for wi, xi in zip(w, X))
        rhs = conj_bregman_direct(h, EX, u) + math.fsum(wi * conj_bregman_direct(h, xi, EX) for wi, xi in zip(w, X))
        worst = max(worst, _rel(lhs, rhs))
    return CheckResult(f"bias_variance[{h.name}]", worst <= tol, n, worst, tol)


def check_gradient_gap(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-8) -> CheckResult:
    """``D_f(x_*, x) >= L D_{h*}(grad h(x_*) + grad f(x)/L, grad h(x_*))`` when ``grad f(x_*) = 0``.

    ``f`` is shifted by a linear term so that a random point is its minimizer.
    """
    worst = 0.0
    for _ in range(n):
        f = _random_smooth_fn(h, rng)
        xs = h.random_point(rng)
        g0 = f.grad(xs)
        grad = (lambda f, g0: (lambda z: f.grad(z) - g0))(f, g0)
        x = h.random_point(rng)
        lhs = f.div(xs, x)  # linear shifts leave D_f unchanged
        q = h.grad(xs)
        p = q + grad(x) / f.L
        if not h.in_dual_range(p, h.eps_dom):
            continue
        rhs = f.L * bregman_dual(h, p, q)
        worst = max(worst, _excess(rhs, lhs, 0.0) / max(lhs, 1e-300))
    return CheckResult(f"prop8[{h.name}]", worst <= tol, n, worst, tol)


def lemma_suite(n: int = 1000, seed: int = 0, names: Optional[Sequence[str]] = None) -> list:
    checks = {
        "duality": check_duality,
        "symmetrized": check_symmetrized,
        "cocoercivity": check_cocoercivity,
        "bias_variance": check_bias_variance,
        "prop8": check_gradient_gap,
    }
    out = []
    for name in names or checks:
        for i, h in enumerate(mirrors().values()):
            t0 = time.perf_counter()
            r = checks[name](h, n, np.random.default_rng([seed, i, len(name)]))
            out.append(r._replace(seconds=time.perf_counter() - t0))
    return out


# ---------------------------------------------------------------------------
# mirror plumbing


def check_roundtrip(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-12) -> CheckResult:
    """``grad h*(grad h(x)) = x`` and chart round trips."""
    worst = 0.0
    for _ in range(n):
        x = h.random_point(rng)
        scale = np.maximum(np.abs(x), 1.0)
        worst = max(worst, float(np.max(np.abs(h.conj_grad(h.grad(x)) - x) / scale)),
                    float(np.max(np.abs(h.from_chart(h.to_chart(x)) - x) / scale)))
    return CheckResult(f"roundtrip[{h.name}]", worst <= tol, n, worst, tol)


def check_gradients(h: MirrorMap, n: int, rng: np.random.Generator, tol: float = 1e-6) -> CheckResult:
    """Central finite differences of ``h`` and ``grad h`` against ``grad h`` and ``hess h``."""
    worst = 0.0
    for _ in range(n):
        x = h.random_point(rng)
        g, H = h.grad(x), np.asarray(h.hess(x))
        for i in range(h.dim):
            e = np.zeros(h.dim)
            e[i] = 1e-6 * max(1.0, abs(x[i]))
            if h.name == "neg_entropy":
                e[i] = 1e-6 * x[i]
            if h.name == "gaussian_log_partition" and i == 1:
                e[i] = 1e-6 * abs(x[1])
            fd = (h.value(x + e) - h.value(x - e)) / (2 * e[i])
            worst = max(worst, _rel(fd, g[i], 1.0))
            fdg = (h.grad(x + e) - h.grad(x - e)) / (2 * e[i])
            worst = max(worst, float(np.max(np.abs(fdg - H[:, i]) / np.maximum(np.abs(H[:, i]), 1.0))))
    return CheckResult(f"gradients[{h.name}]", worst <= tol, n, worst, tol)


# ---------------------------------------------------------------------------
# default finite instances


def default_instances(seed: int = 0) -> dict:
    """Small finite instances with exact expectations used by the theorem checks."""
    rng = np.random.default_rng(seed)
    quad = finite_quadratic(rng.normal(size=(5, 2)), curvatures=rng.uniform(0.5, 2.0, size=5))
    kl = finite_kl(np.exp(rng.normal(scale=0.7, size=(5, 2))))
    return {"euclidean/finite_quadratic": (euclidean(2), quad), "neg_entropy/finite_kl": (neg_entropy(2), kl)}


def check_relative_smoothness(seed: int = 0, n: int = 1000) -> list:
    rng = np.random.default_rng(seed)
    pairs = dict(default_instances(seed))
    pairs["gaussian_log_partition/gaussian_nll"] = (gaussian_log_partition(), gaussian_nll(0.3, 1.7))
    out = []
    for name, (h, obj) in pairs.items():
        rep = relative_smoothness_check(obj, h, n, rng)
        out.append(CheckResult(f"relative_smoothness[{name}]", rep.passed, n, rep.max_violation, 1e-8, rep.side))
    return out


def check_gaussian_divergences(n: int = 1000, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """``D_{f_X} = D_A = D_f`` for the Gaussian likelihood, and ``D_A(theta, theta_*) = f(theta) - f(theta_*)``."""
    rng = np.random.default_rng(seed)
    A = gaussian_log_partition()
    obj = gaussian_nll(0.4, 2.0)
    star = gs.GaussParams(0.4, 2.0)
    worst = 0.0
    for _ in range(n):
        x, y = A.random_point(rng), A.random_point(rng)
        X = obj.sample(rng)
        dA = bregman(A, x, y)
        for other in (divergence_of(obj, X, x, y), mean_divergence(obj, x, y), gs.d_A(x, y)):
            worst = max(worst, abs(other - dA) / max(1.0, dA))
        lhs = gs.d_A(x, star)
        rhs = gs.f_gaussian(x, 0.4, 2.0) - gs.f_gaussian(star, 0.4, 2.0)
        worst = max(worst, abs(lhs - rhs) / max(1.0, lhs))
    return CheckResult("gaussian_divergences", worst <= tol, n, worst, tol)


# ---------------------------------------------------------------------------
# proximal steps and phi


def check_prox(n: int = 1000, seed: int = 0, tol: float = 1e-9, mw_tol: float = 1e-10) -> list:
    """Dual identity ``grad h(x+) = grad h(x) - eta (grad f_xi(x) + omega)`` and ``omega in dg(x+)``."""
    rng = np.random.default_rng(seed)
    quad = finite_quadratic(rng.normal(size=(6, 3)), curvatures=rng.uniform(0.5, 2.0, size=6))
    lin = finite_linear_simplex(rng.normal(size=(6, 4)))
    cases = [
        ("euclidean/box", euclidean(3), quad, ProxSpec.box(-0.5, 0.7)),
        ("euclidean/l1", euclidean(3), quad, ProxSpec.l1(0.3)),
        ("neg_entropy/simplex", neg_entropy(4), lin, ProxSpec.simplex()),
    ]
    out = []
    for name, h, obj, prox in cases:
        worst = sub = 0.0
        for _ in range(n):
            eta = float(rng.uniform(0.01, 1.0))
            s = obj.sample(rng)
            if prox.kind == "simplex":
                x = rng.dirichlet(np.ones(h.dim))
            elif prox.kind == "box":
                x = rng.uniform(prox.lower, prox.upper, size=h.dim)
            else:
                x = rng.normal(size=h.dim)
            xp, om = prox_smd_step(h, obj, prox, x, eta, s)
            worst = max(worst, dual_identity_residual(h, x, xp, eta, obj.grad_at(s, x), om))
            sub = max(sub, _subgradient_violation(prox, xp, om))
        out.append(CheckResult(f"prox_dual_identity[{name}]", worst <= tol and sub <= tol, n, max(worst, sub), tol))
    # multiplicative weights closed form
    h, worst = neg_entropy(4), 0.0
    for _ in range(n):
        x = rng.dirichlet(np.ones(4))
        eta = float(rng.uniform(0.01, 1.0))
        s = lin.sample(rng)
        w = x * np.exp(-eta * lin.grad_at(s, x))
        xp, _ = prox_smd_step(h, lin, ProxSpec.simplex(), x, eta, s)
        worst = max(worst, float(np.max(np.abs(xp - w / w.sum()) / (w / w.sum()))))
    out.append(CheckResult("prox_multiplicative_weights", worst <= mw_tol, n, worst, mw_tol))
    return out


def _subgradient_violation(prox: ProxSpec, xp: np.ndarray, om: np.ndarray) -> float:
    if prox.kind == "box":
        inside = (xp > prox.lower) & (xp < prox.upper)
        bad = np.where(inside, np.abs(om), 0.0)
        bad = np.maximum(bad, np.where(xp <= prox.lower, np.maximum(om, 0.0), 0.0))
        bad = np.maximum(bad, np.where(xp >= prox.upper, np.maximum(-om, 0.0), 0.0))
        return float(bad.max())
    if prox.kind == "l1":
        nz = xp != 0
        bad = np.where(nz, np.abs(om - prox.lam * np.sign(xp)), np.maximum(np.abs(om) - prox.lam, 0.0))
        return float(bad.max() / max(prox.lam, 1.0))
    # simplex: omega must be constant across coordinates (the normal cone of the affine hull)
    return float(np.ptp(om) / max(1.0, float(np.abs(om).max())))


def check_phi(n: int = 100, seed: int = 0, grid_size: int = 20, rel_tol: float = 1e-4) -> list:
    """``phi(eta) = D_h(x, x+)/eta`` is nondecreasing and its slope is ``D_h(x+, x)/eta^2``."""
    rng = np.random.default_rng(seed)
    cases = dict(default_instances(seed))
    cases["gaussian_log_partition/gaussian_nll"] = (gaussian_log_partition(), gaussian_nll(0.0, 1.0))
    out = []
    for name, (h, obj) in cases.items():
        top = 0.9 if h.name == "gaussian_log_partition" else 1.0 / obj.rel_L
        etas = np.geomspace(1e-3 * top, top, grid_size)
        worst, mono = 0.0, True
        for _ in range(n):
            x = h.random_point(rng)
            rep = phi_monotonicity_check(h, obj, x, obj.sample(rng), etas, rel_tol)
            worst = max(worst, rep.max_slope_rel_err)
            mono = mono and rep.monotone
        out.append(CheckResult(f"phi_monotone[{name}]", mono and worst <= rel_tol, n, worst, rel_tol,
                               "" if mono else "not monotone"))
    return out


# ---------------------------------------------------------------------------
# convergence inequalities with exact expectations


def _exact_expect(obj: StochasticObjective, fn) -> float:
    return expect_finite(obj, fn)


def check_theorem_steps(h: MirrorMap, obj: StochasticObjective, eta: float, horizon: int = 1000, seed: int = 0,
                        tol: float = 1e-9, x0=None, label: str = "") -> list:
    """Per-step strongly convex inequality, the summed convex inequality and the ``f_+`` variant.

    Along one SMD path, with conditional expectations computed exactly over
    the finite support at every iterate ``x = x^t``:

    * ``eta [f_eta(x) - f_eta^*] + E D_h(x_*, x+) <= (1 - eta mu) D_h(x_*, x) + eta^2 sigma^2``;
    * ``eta sum_{k<=t} [f_eta(x^k) - f_eta^* + D_f(x_*, x^k)] <= D_h(x_*, x^0) + M_{t+1} + (t+1) eta^2 sigma^2``
      where ``M`` is the martingale ``sum_k D_h(x_*, x^{k+1}) - E_k D_h(x_*, x^{k+1})``
      (its expectation is the convex-case theorem);
    * ``eta [E f_xi(x+) - f_+^*] + E D_h(x_*, x+) <= (1 - eta mu) D_h(x_*, x) + (f(x_*) - f_+^*)`` for ``eta <= 1/L``.
    """
    if obj.support is None or obj.opt is None:
        raise ValueError("theorem checks need a finite instance with a known optimum")
    est = FEtaEstimator("exact", eta)
    sig = sigma_star_sq(h, obj, eta, est)
    fstar, f_eta_star, s2 = sig.f_star, sig.f_eta_star, sig.value
    xs = np.asarray(obj.opt, dtype=float)
    mu = obj.rel_mu
    check_plus = eta <= obj.max_eta() * (1 + 1e-12)
    f_plus = f_plus_star(h, obj, eta, est).value.value if check_plus else None

    x0 = h.random_point(np.random.default_rng(seed + 1)) if x0 is None else x0
    trace = run(RunConfig(h, obj, StepSchedule.constant(eta), horizon, seed, x0))
    if trace.aborted:
        raise trace.error
    D0 = bregman(h, xs, trace.records[0].x)
    w1 = w2 = w3 = 0.0
    lhs_sum = mart = 0.0
    for t, rec in enumerate(trace.records[:-1]):
        x = rec.x
        d_now = bregman(h, xs, x)
        e_next = _exact_expect(obj, lambda s: bregman(h, xs, smd_step(h, obj, x, eta, s)))
        fe = f_eta_at(est, h, obj, x).value
        lhs = eta * (fe - f_eta_star) + e_next
        rhs = (1 - eta * mu) * d_now + eta**2 * s2
        w1 = max(w1, _excess(lhs, rhs, abs(rhs) + abs(lhs)))

        lhs_sum += eta * (fe - f_eta_star + mean_divergence(obj, xs, x))
        mart += bregman(h, xs, trace.records[t + 1].x) - e_next
        rhs_sum = D0 + mart + (t + 1) * eta**2 * s2
        w2 = max(w2, _excess(lhs_sum, rhs_sum, abs(lhs_sum) + abs(D0) + abs(mart)))

        if check_plus:
            ef = _exact_expect(obj, lambda s: obj.value_at(s, smd_step(h, obj, x, eta, s)))
            lhs3 = eta * (ef - f_plus) + e_next
            rhs3 = (1 - eta * mu) * d_now + (fstar - f_plus)
            w3 = max(w3, _excess(lhs3, rhs3, abs(lhs3) + abs(rhs3)))
    n = len(trace.records) - 1
    tag = f"[{label or obj.name},eta={eta:.4g}]"
    out = [
        CheckResult(f"thm_sc_step{tag}", w1 <= tol, n, w1, tol),
        CheckResult(f"thm_convex_sum{tag}", w2 <= tol, n, w2, tol),
    ]
    if check_plus:
        out.append(CheckResult(f"fplus_step{tag}", w3 <= tol, n, w3, tol))
    return out


class QuadMoments(NamedTuple):
    mean: np.ndarray
    sq: float  # E ||x||^2


def quadratic_expected_path(obj: StochasticObjective, eta: float, x0, horizon: int) -> list:
    """Exact ``(E x^k, E ||x^k||^2)`` of Euclidean SMD on a finite quadratic (affine random recursion)."""
    c, p, a = obj.meta["atoms"], obj.meta["probs"], obj.meta["curvatures"]
    r = 1.0 - eta * a
    m, q = np.asarray(x0, dtype=float), float(np.dot(x0, x0))
    out = [QuadMoments(m, q)]
    cc = np.einsum("ij,ij->i", c, c)
    for _ in range(horizon):
        q = float(p @ (r**2 * q + 2 * r * eta * a * (c @ m) + (eta * a) ** 2 * cc))
        m = float(p @ r) * m + (p * eta * a) @ c
        out.append(QuadMoments(m, q))
    return out


def check_theorems_in_expectation(obj: StochasticObjective, eta: float, horizon: int = 1000, x0=None,
                                  tol: float = 1e-9) -> list:
    """Expected-value forms on a Euclidean finite quadratic via exact moment propagation.

    Chained strongly convex bound at every ``T``:
    ``E D(x_*, x^{T+1}) + eta (E f_eta(x^T) - f_eta^*) <= (1 - eta mu)^{T+1} D(x_*, x^0) + eta sigma^2 / mu``
    and the averaged convex bound
    ``(1/(T+1)) sum_k E[f_eta(x^k) - f_eta^* + D_f(x_*, x^k)] <= D(x_*, x^0)/(eta (T+1)) + eta sigma^2``.
    """
    if obj.name != "finite_quadratic":
        raise ValueError("moment propagation is implemented for finite_quadratic")
    h = euclidean(obj.dim)
    c, p, a = obj.meta["atoms"], obj.meta["probs"], obj.meta["curvatures"]
    xs = np.asarray(obj.opt, dtype=float)
    abar = float(p @ a)
    sig = sigma_star_sq(h, obj, eta, FEtaEstimator("exact", eta))
    s2, f_eta_star = sig.value, sig.f_eta_star
    x0 = np.zeros(obj.dim) + 1.5 if x0 is None else np.asarray(x0, dtype=float)
    path = quadratic_expected_path(obj, eta, x0, horizon + 1)
    k_eta = 0.5 * p * a * (1.0 - eta * a)  # f_eta(x) = sum_i k_i ||x - c_i||^2
    cc = np.einsum("ij,ij->i", c, c)

    def e_sqdist(mm: QuadMoments, z):
        return mm.sq - 2 * float(z @ mm.mean) + float(z @ z)

    def e_f_eta(mm: QuadMoments):
        return float(k_eta.sum() * mm.sq - 2 * (k_eta @ c) @ mm.mean + k_eta @ cc)

    mu = obj.rel_mu
    D0 = 0.5 * float((x0 - xs) @ (x0 - xs))
    w1 = w2 = 0.0
    acc = 0.0
    for T in range(horizon + 1):
        lhs = 0.5 * e_sqdist(path[T + 1], xs) + eta * (e_f_eta(path[T]) - f_eta_star)
        rhs = (1 - eta * mu) ** (T + 1) * D0 + eta * s2 / mu
        w1 = max(w1, _excess(lhs, rhs, abs(lhs) + abs(rhs)))
        acc += e_f_eta(path[T]) - f_eta_star + 0.5 * abar * e_sqdist(path[T], xs)
        lhs2, rhs2 = acc / (T + 1), D0 / (eta * (T + 1)) + eta * s2
        w2 = max(w2, _excess(lhs2, rhs2, abs(lhs2) + abs(rhs2)))
    tag = f"[eta={eta:.4g}]"
    return [CheckResult(f"thm_sc_expected{tag}", w1 <= tol, horizon + 1, w1, tol),
            CheckResult(f"thm_convex_expected{tag}", w2 <= tol, horizon + 1, w2, tol)]


def theorem_suite(horizon: int = 1000, seed: int = 0) -> list:
    out = []
    for label, (h, obj) in default_instances(seed).items():
        for eta in (0.1, 0.5 / obj.rel_L):
            out.extend(check_theorem_steps(h, obj, eta, horizon, seed, label=label))
            if obj.name == "finite_quadratic":
                out.extend(check_theorems_in_expectation(obj, eta, horizon))
    return out


# ---------------------------------------------------------------------------
# selector front end


def _per_mirror(fn, n):
    def go(seed):
        return [fn(h, n, np.random.default_rng([seed, i])) for i, h in enumerate(mirrors().values())]
    return go


SUITES: dict = {
    "duality": _per_mirror(check_duality, 1000),
    "symmetrized": _per_mirror(check_symmetrized, 1000),
    "cocoercivity": _per_mirror(check_cocoercivity, 1000),
    "bias_variance": _per_mirror(check_bias_variance, 1000),
    "prop8": _per_mirror(check_gradient_gap, 1000),
    "roundtrip": _per_mirror(check_roundtrip, 1000),
    "gradients": _per_mirror(check_gradients, 200),
    "relative_smoothness": lambda seed: check_relative_smoothness(seed),
    "gaussian_divergences": lambda seed: [check_gaussian_divergences(seed=seed)],
    "phi": lambda seed: check_phi(seed=seed),
    "prox": lambda seed: check_prox(seed=seed),
    "theorems": lambda seed: theorem_suite(seed=seed),
}


def run_suite(selector: str = "all", seed: int = 0) -> list:
    """Run one named suite, or every suite for ``"all"``."""
    names = list(SUITES) if selector == "all" else [selector]
    out = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown check {name!r}; choose from all, {', '.join(SUITES)}")
        t0 = time.perf_counter()
        res = SUITES[name](seed)
        dt = time.perf_counter() - t0
        out.extend(r._replace(seconds=dt / len(res)) for r in res)
    return out
