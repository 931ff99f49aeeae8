"""Estimation of ``f_eta``, the variance ``sigma^2_{*,eta}`` and competing variances.

``f_eta(x) = f(x) - E[D_h(x, x+)] / eta`` where ``x+`` is a stochastic mirror
step from ``x``.  Its infimum defines

    sigma^2_{*,eta} = (f(x_*) - inf f_eta) / eta,

which is computed by derivative-free minimization of ``f_eta``.  The other
quantities in this module are upper bounds on it (or, for the grid-based
suprema, lower bounds of the corresponding supremum-type definitions).

Expectations are exact for finite supports, Gauss-Hermite for objectives
that expose ``quadrature``, or Monte Carlo.  Monte Carlo uses common random
numbers: every expectation drawn with the same estimator reuses the same
sample stream, so comparisons across ``x``, ``eta`` and coupled pairs
``(x+, bar x+)`` are noise-free in the sample realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    DualRangeError,
    NonFinite,
    SingularHessian,
    StepSizeTooLarge,
    UnknownPerSampleOpt,
)
from .mirror import MirrorMap, bregman, bregman_dual
from .objective import StochasticObjective, mean_divergence
from .smd import det_step, smd_step


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0
    flag: str = "exact"
    skipped: int = 0


@dataclass(frozen=True)
class FEtaEstimator:
    """How expectations over ``xi`` are evaluated.

    ``mode`` is ``"exact"`` (finite support), ``"mc"`` (``n_samples`` draws
    from ``default_rng(seed)``) or ``"quadrature"`` (``n_nodes`` weighted
    nodes from the objective).
    """

    mode: str
    eta: float
    n_samples: int = 10_000
    n_nodes: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "mc", "quadrature"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.mode == "mc" and self.n_samples < 100:
            raise ValueError("Monte Carlo estimation needs n_samples >= 100")
        if self.mode == "quadrature" and self.n_nodes < 8:
            raise ValueError("quadrature needs n_nodes >= 8")

    @classmethod
    def auto(cls, obj: StochasticObjective, eta: float, **kw) -> "FEtaEstimator":
        """Exact for finite supports, quadrature when available, otherwise Monte Carlo."""
        if obj.support is not None:
            return cls("exact", eta, **kw)
        if obj.quadrature is not None:
            return cls("quadrature", eta, **kw)
        return cls("mc", eta, **kw)

    def with_eta(self, eta: float) -> "FEtaEstimator":
        return FEtaEstimator(self.mode, eta, self.n_samples, self.n_nodes, self.seed)

    @property
    def flag(self) -> str:
        return {"exact": "exact", "mc": "mc", "quadrature": "quadrature"}[self.mode]

    def nodes(self, obj: StochasticObjective) -> list:
        if self.mode == "exact":
            if obj.support is None:
                raise ValueError(f"exact expectations need a finite support ({obj.name})")
            return list(obj.support)
        if self.mode == "quadrature":
            if obj.quadrature is None:
                raise ValueError(f"{obj.name} provides no quadrature rule")
            return obj.quadrature(self.n_nodes)
        rng = np.random.default_rng(self.seed)
        w = 1.0 / self.n_samples
        return [(obj.sample(rng), w) for _ in range(self.n_samples)]

    def expect(self, obj: StochasticObjective, fn: Callable[[Any], float]) -> Estimate:
        """``E fn(xi)``; Monte Carlo skips draws raising ``DualRangeError`` and counts them."""
        nodes = self.nodes(obj)
        if self.mode != "mc":
            return Estimate(math.fsum(w * fn(s) for s, w in nodes), 0.0, self.flag)
        vals, skipped = [], 0
        for s, _ in nodes:
            try:
                vals.append(fn(s))
            except DualRangeError:
                skipped += 1
        if not vals:
            raise DualRangeError("every Monte Carlo draw left the dual range", eta=self.eta)
        v = np.asarray(vals, dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.inf
        return Estimate(float(v.mean()), se, "mc", skipped)


def merge_estimates(estimates: Sequence[Estimate], weights: Optional[Sequence[float]] = None) -> Estimate:
    """Weighted average of independent replicate estimates with combined standard error."""
    w = np.ones(len(estimates)) if weights is None else np.asarray(weights, dtype=float)
    vals = np.array([e.value for e in estimates])
    ses = np.array([e.stderr for e in estimates])
    tot = w.sum()
    flags = {e.flag for e in estimates}
    return Estimate(
        float(w @ vals / tot),
        float(math.sqrt(float((w**2) @ (ses**2))) / tot),
        flags.pop() if len(flags) == 1 else "mc",
        int(sum(e.skipped for e in estimates)),
    )


# ---------------------------------------------------------------------------
# f_eta and its minimization


def f_eta_at(est: FEtaEstimator, h: MirrorMap, obj: StochasticObjective, x) -> Estimate:
    """``f(x) - E[D_h(x, x+(eta, xi))] / eta``."""
    if obj.mean_value is None:
        raise ValueError(f"{obj.name}: mean objective unavailable")
    x = h.check_point(x)
    eta = est.eta
    e = est.expect(obj, lambda s: bregman(h, x, smd_step(h, obj, x, eta, s)))
    return Estimate(obj.mean_value(x) - e.value / eta, e.stderr / eta, e.flag, e.skipped)


def pattern_search(
    fun: Callable[[np.ndarray], float],
    z0,
    step: float = 0.5,
    tol: float = 1e-7,
    max_evals: int = 100_000,
) -> tuple[np.ndarray, float, int, bool]:
    """Hooke-Jeeves pattern search with a halving mesh.

    Returns ``(z, f(z), evaluations, converged)``; ``converged`` is False
    when the budget ran out before the mesh shrank below ``tol``.
    """
    z = np.array(z0, dtype=float)
    evals = 0

    def f(v):
        nonlocal evals
        evals += 1
        try:
            out = float(fun(v))
        except (DualRangeError, DomainError, NonFinite, FloatingPointError, OverflowError, ValueError):
            return math.inf
        return out if math.isfinite(out) else math.inf

    def explore(base, fbase, r):
        best, fbest = base.copy(), fbase
        for i in range(len(base)):
            for sgn in (1.0, -1.0):
                cand = best.copy()
                cand[i] += sgn * r
                fc = f(cand)
                if fc < fbest:
                    best, fbest = cand, fc
                    break
        return best, fbest

    fz = f(z)
    if not math.isfinite(fz):
        raise DomainError(f"pattern search started at an invalid point {z}")
    r = step
    while r > tol and evals < max_evals:
        zn, fn = explore(z, fz, r)
        if fn < fz:
            while evals < max_evals:
                zp = zn + (zn - z)
                z, fz = zn, fn
                zt, ft = explore(zp, f(zp), r)
                if ft < fz:
                    zn, fn = zt, ft
                else:
                    break
        else:
            r *= 0.5
    return z, fz, evals, r <= tol


class MinimizeResult(NamedTuple):
    x: np.ndarray
    value: Estimate
    hit_boundary: bool
    converged: bool
    n_evals: int


def _minimize_over_domain(
    fun: Callable[[np.ndarray], Estimate],
    h: MirrorMap,
    starts: Sequence[np.ndarray],
    tol: float,
    max_evals: int,
    boundary_margin: Optional[float],
) -> MinimizeResult:
    best = None
    total = 0
    for x0 in starts:
        z, _, n, ok = pattern_search(lambda c: fun(h.from_chart(c)).value, h.to_chart(x0), tol=tol,
                                     max_evals=max(1, max_evals - total))
        total += n
        x = h.from_chart(z)
        val = fun(x)
        if best is None or val.value < best[1].value:
            best = (x, val, ok)
        if total >= max_evals:
            break
    x, val, ok = best
    margin = h.eps_dom if boundary_margin is None else boundary_margin
    hit = h.boundary_distance(x) <= margin
    return MinimizeResult(x, val, hit, ok, total)


def _starts(h: MirrorMap, obj: StochasticObjective, x_init) -> list:
    starts = []
    if x_init is not None:
        starts.append(h.check_point(x_init))
    if obj.opt is not None:
        xs = h.check_point(obj.opt)
        if not any(np.array_equal(xs, s) for s in starts):
            starts.append(xs)
    if not starts:
        raise ValueError("need x_init when the optimum is unknown")
    return starts


def minimize_f_eta(
    est: FEtaEstimator,
    h: MirrorMap,
    obj: StochasticObjective,
    x_init=None,
    tol: float = 1e-7,
    max_evals: int = 100_000,
    boundary_margin: Optional[float] = None,
) -> MinimizeResult:
    """Numerical minimizer ``x_eta`` of ``f_eta``.

    Pattern search in the mirror's chart coordinates, restarted from
    ``x_init`` and from ``x_*`` when known; the best point wins.
    ``hit_boundary`` is set when ``x_eta`` lies within the domain margin.
    """
    if h.dim > 8:
        raise ValueError("minimize_f_eta is meant for dimension <= 8")
    return _minimize_over_domain(lambda x: f_eta_at(est, h, obj, x), h, _starts(h, obj, x_init), tol, max_evals,
                                 boundary_margin)


def optimal_value(h: MirrorMap, obj: StochasticObjective, x_init=None, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """``(x_*, f(x_*))``: the declared optimum, or a numerical one when unknown."""
    if obj.opt is not None:
        return np.asarray(obj.opt, dtype=float), obj.mean_value(obj.opt)
    res = _minimize_over_domain(lambda x: Estimate(obj.mean_value(x)), h, _starts(h, obj, x_init), tol, 100_000,
                                None)
    return res.x, res.value.value


class SigmaStar(NamedTuple):
    value: float
    stderr: float
    flag: str
    x_eta: np.ndarray
    f_eta_star: float
    f_star: float
    hit_boundary: bool
    converged: bool


def sigma_star_sq(
    h: MirrorMap,
    obj: StochasticObjective,
    eta: float,
    est: Optional[FEtaEstimator] = None,
    x_init=None,
    tol: float = 1e-7,
    max_evals: int = 100_000,
) -> SigmaStar:
    """``(f(x_*) - min f_eta) / eta``, with the Monte Carlo error of ``f_eta(x_eta)`` propagated."""
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    _, fstar = optimal_value(h, obj, x_init)
    res = minimize_f_eta(est, h, obj, x_init, tol, max_evals)
    flag = "boundary-hit" if res.hit_boundary else res.value.flag
    return SigmaStar((fstar - res.value.value) / eta, res.value.stderr / eta, flag, res.x, res.value.value, fstar,
                     res.hit_boundary, res.converged)


# ---------------------------------------------------------------------------
# bounds


def _check_eta(obj: StochasticObjective, eta: float, factor: float = 1.0):
    limit = obj.max_eta() / factor
    if eta > limit * (1 + 1e-12):
        raise StepSizeTooLarge(f"eta={eta} exceeds {limit} for {obj.name} (rel_L={obj.rel_L})")


def f_plus_star(
    h: MirrorMap,
    obj: StochasticObjective,
    eta: float,
    est: Optional[FEtaEstimator] = None,
    x_init=None,
    tol: float = 1e-7,
    max_evals: int = 100_000,
) -> MinimizeResult:
    """Minimizer of ``x -> E f_xi(x+)`` (the function value after one stochastic step)."""
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)

    def after_step(x):
        return est.expect(obj, lambda s: obj.value_at(s, smd_step(h, obj, x, eta, s)))

    return _minimize_over_domain(after_step, h, _starts(h, obj, x_init), tol, max_evals, None)


def bound_maml(
    h: MirrorMap,
    obj: StochasticObjective,
    eta: float,
    est: Optional[FEtaEstimator] = None,
    x_init=None,
    tol: float = 1e-7,
    max_evals: int = 100_000,
) -> Estimate:
    """``(f(x_*) - min_x E f_xi(x+)) / eta``; requires ``eta <= 1/L``."""
    _check_eta(obj, eta)
    _, fstar = optimal_value(h, obj, x_init)
    res = f_plus_star(h, obj, eta, est, x_init, tol, max_evals)
    return Estimate((fstar - res.value.value) / eta, res.value.stderr / eta, res.value.flag, res.value.skipped)


def bound_function_diff(obj: StochasticObjective, eta: float, est: Optional[FEtaEstimator] = None) -> Estimate:
    """``(f(x_*) - E f_xi(x_*^xi)) / eta``; finite but grows like ``1/eta``."""
    if obj.per_sample_opt is None:
        raise UnknownPerSampleOpt(f"{obj.name}: per-sample minimizers are unknown")
    if obj.opt is None:
        raise ValueError(f"{obj.name}: optimum unknown")
    _check_eta(obj, eta)
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    e = est.expect(obj, lambda s: obj.value_at(s, obj.per_sample_opt(s)))
    return Estimate((obj.mean_value(obj.opt) - e.value) / eta, e.stderr / eta, e.flag, e.skipped)


def bound_grad_at_opt(
    h: MirrorMap, obj: StochasticObjective, eta: float, x_eta, est: Optional[FEtaEstimator] = None
) -> Estimate:
    """``E[D_h(bar x_eta+, x_eta+)] / eta^2`` with one ``xi`` per coupled pair."""
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    x = h.check_point(x_eta)
    xbar = det_step(h, obj, x, eta)
    e = est.expect(obj, lambda s: bregman(h, xbar, smd_step(h, obj, x, eta, s)))
    return Estimate(e.value / eta**2, e.stderr / eta**2, e.flag, e.skipped)


def bound_deh(
    h: MirrorMap, obj: StochasticObjective, eta: float, x_eta, est: Optional[FEtaEstimator] = None
) -> Estimate:
    """``E[D_{h*}(grad h(x_eta) - 2 eta grad f_xi(x_*), grad h(x_eta))] / (2 eta^2)``.

    The computable form of the gradients-at-optimum bound, valid for
    ``eta <= 1/(2L)``; equals ``E ||grad f_xi(x_*)||^2`` for the Euclidean mirror.
    """
    if obj.opt is None:
        raise ValueError(f"{obj.name}: optimum unknown")
    _check_eta(obj, eta, 2.0)
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    q = h.grad(h.check_point(x_eta))
    xs = np.asarray(obj.opt, dtype=float)

    def term(s):
        p = q - 2.0 * eta * obj.grad_at(s, xs)
        if not h.in_dual_range(p, h.eps_dom):
            raise DualRangeError("doubled step from x_eta left the dual range", eta=eta)
        return bregman_dual(h, p, q)

    e = est.expect(obj, term)
    return Estimate(e.value / (2 * eta**2), e.stderr / (2 * eta**2), e.flag, e.skipped)


def _grid_max(grid, per_point) -> Estimate:
    if len(grid) == 0:
        raise ValueError("grid must be nonempty")
    best = None
    for x in grid:
        e = per_point(x)
        if best is None or e.value > best.value:
            best = e
    return Estimate(best.value, best.stderr, "grid-lower-bound", best.skipped)


def sigma_sym_on_grid(
    h: MirrorMap, obj: StochasticObjective, eta: float, grid: Sequence, est: Optional[FEtaEstimator] = None
) -> Estimate:
    """Grid maximum of ``E[D_h(x+, bar x+) + D_h(bar x+, x+)] / eta^2``.

    Only a lower bound of the supremum over the whole domain, which is
    typically infinite.
    """
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)

    def at(x):
        x = h.check_point(x)
        xbar = det_step(h, obj, x, eta)

        def term(s):
            xp = smd_step(h, obj, x, eta, s)
            return bregman(h, xp, xbar) + bregman(h, xbar, xp)

        e = est.expect(obj, term)
        return Estimate(e.value / eta**2, e.stderr / eta**2, e.flag, e.skipped)

    return _grid_max(grid, at)


def sigma_tilde_on_grid(
    h: MirrorMap, obj: StochasticObjective, eta: float, grid: Sequence, est: Optional[FEtaEstimator] = None
) -> Estimate:
    """Grid maximum of ``(E[D_h(x, x+)] / eta - D_f(x_*, x)) / eta`` (a lower bound of the sup)."""
    if obj.opt is None:
        raise ValueError(f"{obj.name}: optimum unknown")
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    xs = np.asarray(obj.opt, dtype=float)

    def at(x):
        x = h.check_point(x)
        e = est.expect(obj, lambda s: bregman(h, x, smd_step(h, obj, x, eta, s)))
        val = (e.value / eta - mean_divergence(obj, xs, x)) / eta
        return Estimate(val, e.stderr / eta**2, e.flag, e.skipped)

    return _grid_max(grid, at)


def limit_variance(h: MirrorMap, obj: StochasticObjective, est: Optional[FEtaEstimator] = None) -> Estimate:
    """Small step-size limit ``0.5 E ||grad f_xi(x_*)||^2`` in the metric ``(hess h(x_*))^{-1}``."""
    if obj.opt is None:
        raise ValueError(f"{obj.name}: optimum unknown")
    xs = h.check_point(obj.opt)
    H = np.asarray(h.hess(xs), dtype=float)
    try:
        if not np.isfinite(np.linalg.cond(H)) or np.linalg.cond(H) > 1e14:
            raise SingularHessian(f"hess h(x_*) is numerically singular (cond={np.linalg.cond(H):.3g})")
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError as err:
        raise SingularHessian(str(err)) from err
    est = FEtaEstimator.auto(obj, 1.0) if est is None else est

    def term(s):
        g = obj.grad_at(s, xs)
        return 0.5 * float(g @ Hinv @ g)

    return est.expect(obj, term)


# ---------------------------------------------------------------------------
# monotonicity of phi(eta) = D_h(x, x+(eta)) / eta


class PhiReport(NamedTuple):
    passed: bool
    monotone: bool
    max_slope_rel_err: float
    etas: np.ndarray
    phi: np.ndarray


def phi_monotonicity_check(
    h: MirrorMap, obj: StochasticObjective, x, sample, eta_list: Sequence[float], rel_tol: float = 1e-4
) -> PhiReport:
    """Check that ``phi(eta) = D_h(x, x+)/eta`` is nondecreasing along ``eta_list``.

    Also compares a central finite difference of ``phi`` at each grid
    midpoint with the exact slope ``D_h(x+, x) / eta^2``.
    """
    etas = np.asarray(eta_list, dtype=float)
    if np.any(np.diff(etas) <= 0) or etas[0] <= 0:
        raise ValueError("eta_list must be positive and increasing")
    x = h.check_point(x)

    def phi(eta):
        return bregman(h, x, smd_step(h, obj, x, eta, sample)) / eta

    vals = np.array([phi(e) for e in etas])
    scale = max(1.0, float(np.max(np.abs(vals))))
    monotone = bool(np.all(np.diff(vals) >= -1e-13 * scale))
    worst = 0.0
    for a, b in zip(etas[:-1], etas[1:]):
        mid = 0.5 * (a + b)
        d = 1e-4 * mid
        fd = (phi(mid + d) - phi(mid - d)) / (2 * d)
        exact = bregman(h, smd_step(h, obj, x, mid, sample), x) / mid**2
        err = abs(fd - exact)
        rel = err / abs(exact) if abs(exact) > 1e-12 else (0.0 if err <= 1e-10 else math.inf)
        worst = max(worst, rel)
    return PhiReport(monotone and worst <= rel_tol, monotone, worst, etas, vals)


# ---------------------------------------------------------------------------
# reports


REPORT_QUANTITIES = ("sigma_star_sq", "maml", "function_diff", "grad_at_opt", "deh", "limit_rhs", "sym_on_grid",
                     "tilde_on_grid")


@dataclass
class VarianceReport:
    eta: float
    sigma_star_sq: Estimate
    x_eta: np.ndarray
    hit_boundary: bool
    bounds: dict = field(default_factory=dict)
    unavailable: dict = field(default_factory=dict)

    def rows(self) -> list:
        out = [(self.eta, "sigma_star_sq", self.sigma_star_sq)]
        out.extend((self.eta, name, self.bounds[name]) for name in REPORT_QUANTITIES if name in self.bounds)
        return out


def variance_report(
    h: MirrorMap,
    obj: StochasticObjective,
    eta: float,
    est: Optional[FEtaEstimator] = None,
    grid: Sequence = (),
    x_init=None,
    tol: float = 1e-7,
    max_evals: int = 100_000,
) -> VarianceReport:
    """Every variance quantity at one step size.

    The sym/tilde grids always include ``x_eta`` (and ``x_*`` when known).
    Quantities whose preconditions fail are listed in ``unavailable``.
    """
    est = FEtaEstimator.auto(obj, eta) if est is None else est.with_eta(eta)
    s = sigma_star_sq(h, obj, eta, est, x_init, tol, max_evals)
    rep = VarianceReport(eta, Estimate(s.value, s.stderr, s.flag), s.x_eta, s.hit_boundary)
    full_grid = [s.x_eta, *([obj.opt] if obj.opt is not None else []), *grid]
    jobs = {
        "maml": lambda: bound_maml(h, obj, eta, est, x_init, tol, max_evals),
        "function_diff": lambda: bound_function_diff(obj, eta, est),
        "grad_at_opt": lambda: bound_grad_at_opt(h, obj, eta, s.x_eta, est),
        "deh": lambda: bound_deh(h, obj, eta, s.x_eta, est),
        "limit_rhs": lambda: limit_variance(h, obj, est),
        "sym_on_grid": lambda: sigma_sym_on_grid(h, obj, eta, full_grid, est),
        "tilde_on_grid": lambda: sigma_tilde_on_grid(h, obj, eta, full_grid, est),
    }
    for name, job in jobs.items():
        try:
            rep.bounds[name] = job()
        except (StepSizeTooLarge, UnknownPerSampleOpt, DualRangeError, SingularHessian, ValueError) as err:
            rep.unavailable[name] = str(err)
    return rep


def report_csv(reports: Sequence[VarianceReport]) -> str:
    """``eta,quantity,value,stderr,flag`` rows for a list of reports."""
    lines = ["eta,quantity,value,stderr,flag"]
    for rep in reports:
        for eta, name, e in rep.rows():
            lines.append(f"{eta!r},{name},{float(e.value)!r},{float(e.stderr)!r},{e.flag}")
    return "\n".join(lines) + "\n"
