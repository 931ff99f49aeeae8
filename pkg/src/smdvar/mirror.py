"""Mirror maps, their conjugates, and Bregman divergences.

A mirror map is a twice differentiable, strictly convex potential ``h`` on a
convex domain ``C``.  Points are plain 1-D float arrays.  Every instance
carries a closed-form inverse gradient ``conj_grad`` (``grad h*``) so the
dual-form mirror step ``x+ = grad h*(grad h(x) - eta g)`` is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, DualRangeError, NonFinite

EPS_DOM = 1e-12

# a divergence below -NEG_TOL * scale is reported as NonFinite, above it is clamped to 0
NEG_TOL = 1e-12


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Convert ``x`` to a finite 1-D float array."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"points must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite coordinates: {arr}")
    return arr


def _identity(x):
    return np.array(x, dtype=float)


@dataclass(frozen=True)
class MirrorMap:
    """A mirror potential ``h`` with everything SMD needs to step and measure.

    ``in_domain(x, margin)`` tests strict-interior membership with a margin;
    ``in_dual_range(p, margin)`` tests whether ``p`` is a gradient of ``h``.
    ``divergence`` is an optional closed form for ``D_h`` that avoids the
    cancellation of the generic formula.  ``to_chart``/``from_chart`` map
    the interior of ``C`` onto an unconstrained space (used by the
    derivative-free minimizer).
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    conj_grad: Callable[[np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray, float], bool]
    in_dual_range: Callable[[np.ndarray, float], bool]
    conj_value: Optional[Callable[[np.ndarray], float]] = None
    divergence: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    to_chart: Callable[[np.ndarray], np.ndarray] = _identity
    from_chart: Callable[[np.ndarray], np.ndarray] = _identity
    boundary_distance: Callable[[np.ndarray], float] = lambda x: math.inf
    random_point: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    eps_dom: float = EPS_DOM
    conj_tol: float = 0.0  # 0 means closed form
    meta: dict = field(default_factory=dict, compare=False)

    def check_point(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        if not self.in_domain(x, self.eps_dom):
            raise DomainError(f"{self.name}: point {x} is outside the domain interior")
        return x

    def check_dual(self, p) -> np.ndarray:
        p = as_point(p, self.dim)
        if not self.in_dual_range(p, self.eps_dom):
            raise DualRangeError(f"{self.name}: dual point {p} is outside the range of grad h")
        return p

    def mirror_step(self, x: np.ndarray, direction: np.ndarray, eta: float) -> np.ndarray:
        """Return ``grad h*(grad h(x) - eta * direction)``."""
        p = self.grad(x) - eta * np.asarray(direction, dtype=float)
        if not np.all(np.isfinite(p)) or not self.in_dual_range(p, self.eps_dom):
            raise DualRangeError(f"{self.name}: mirror step left the dual range", eta=eta)
        return self.conj_grad(p)


def _clamp(d: float, scale: float) -> float:
    if not math.isfinite(d):
        raise NonFinite(f"Bregman divergence is not finite ({d})")
    if d < 0.0:
        if d >= -NEG_TOL * (1.0 + scale):
            return 0.0
        raise NonFinite(f"Bregman divergence is negative beyond rounding ({d})")
    return d


def _generic_divergence(h: MirrorMap, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    hx, hy = float(h.value(x)), float(h.value(y))
    lin = -h.grad(y) * (x - y)
    terms = [hx, -hy, *lin.tolist()]
    return math.fsum(terms), max(abs(t) for t in terms)


def bregman(h: MirrorMap, x, y) -> float:
    """``D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>``."""
    x = h.check_point(x)
    y = h.check_point(y)
    if h.divergence is not None:
        d = float(h.divergence(x, y))
        return _clamp(d, 0.0)
    d, scale = _generic_divergence(h, x, y)
    return _clamp(d, scale)


def bregman_dual(h: MirrorMap, p, q) -> float:
    """``D_{h*}(p, q)``, evaluated through duality as ``D_h(grad h*(q), grad h*(p))``."""
    p = h.check_dual(p)
    q = h.check_dual(q)
    return bregman(h, h.conj_grad(q), h.conj_grad(p))


def conj_bregman_direct(h: MirrorMap, p, q) -> float:
    """``D_{h*}(p, q)`` from the conjugate potential itself (independent of ``bregman``)."""
    if h.conj_value is None:
        raise NotImplementedError(f"{h.name} has no closed-form conjugate value")
    p = h.check_dual(p)
    q = h.check_dual(q)
    terms = [float(h.conj_value(p)), -float(h.conj_value(q)), *(-h.conj_grad(q) * (p - q)).tolist()]
    return _clamp(math.fsum(terms), max(abs(t) for t in terms))


def symmetrized_bregman(h: MirrorMap, x, y) -> float:
    """``<grad h(x) - grad h(y), x - y> = D_h(x, y) + D_h(y, x)``."""
    x = h.check_point(x)
    y = h.check_point(y)
    prods = (h.grad(x) - h.grad(y)) * (x - y)
    return _clamp(math.fsum(prods.tolist()), 0.0)


# ---------------------------------------------------------------------------
# provided instances


def euclidean(dim: int = 1) -> MirrorMap:
    """``h = 0.5 ||x||^2`` on ``R^d``; mirror descent is plain gradient descent."""

    def in_domain(x, margin):
        return bool(np.all(np.isfinite(x)))

    return MirrorMap(
        name="euclidean",
        dim=dim,
        value=lambda x: 0.5 * float(x @ x),
        grad=lambda x: np.array(x, dtype=float),
        hess=lambda x: np.eye(len(x)),
        conj_grad=lambda p: np.array(p, dtype=float),
        in_domain=in_domain,
        in_dual_range=in_domain,
        conj_value=lambda p: 0.5 * float(p @ p),
        divergence=lambda x, y: 0.5 * float((x - y) @ (x - y)),
        random_point=lambda rng: rng.normal(size=dim),
    )


def neg_entropy(dim: int = 2) -> MirrorMap:
    """``h(x) = sum x_i log x_i`` on the positive orthant."""

    def in_domain(x, margin):
        return bool(np.all(np.isfinite(x)) and np.all(x > margin))

    def in_dual_range(p, margin):
        # exp(p - 1) must neither overflow nor underflow below the margin
        return bool(np.all(np.isfinite(p)) and np.all(p < 700.0) and np.all(np.exp(p - 1.0) > margin))

    def divergence(x, y):
        return math.fsum((x * np.log(x / y) - x + y).tolist())

    return MirrorMap(
        name="neg_entropy",
        dim=dim,
        value=lambda x: float(np.sum(x * np.log(x))),
        grad=lambda x: np.log(x) + 1.0,
        hess=lambda x: np.diag(1.0 / x),
        conj_grad=lambda p: np.exp(np.asarray(p, dtype=float) - 1.0),
        in_domain=in_domain,
        in_dual_range=in_dual_range,
        conj_value=lambda p: float(np.sum(np.exp(p - 1.0))),
        divergence=divergence,
        to_chart=np.log,
        from_chart=np.exp,
        boundary_distance=lambda x: float(np.min(x)),
        random_point=lambda rng: np.exp(rng.normal(size=dim)),
    )


def _gauss_moments(theta):
    var = -0.5 / theta[1]
    return theta[0] * var, var


def gaussian_log_partition() -> MirrorMap:
    """Log-partition ``A`` of the 1-D Gaussian in natural parameters.

    ``A(theta) = -theta1^2 / (4 theta2) - 0.5 log(-theta2)`` on
    ``Theta = R x (-inf, 0)``; ``grad A(theta) = (m, m^2 + var)``.
    """

    def value(t):
        return -t[0] ** 2 / (4.0 * t[1]) - 0.5 * math.log(-t[1])

    def grad(t):
        m, var = _gauss_moments(t)
        return np.array([m, m * m + var])

    def hess(t):
        t1, t2 = t
        off = t1 / (2.0 * t2**2)
        return np.array([[-0.5 / t2, off], [off, -(t1**2) / (2.0 * t2**3) + 0.5 / t2**2]])

    def conj_grad(mu):
        var = mu[1] - mu[0] ** 2
        return np.array([mu[0] / var, -0.5 / var])

    def conj_value(mu):
        var = mu[1] - mu[0] ** 2
        return -0.5 - 0.5 * math.log(2.0 * var)

    def in_domain(t, margin):
        return bool(np.all(np.isfinite(t)) and t[1] < -margin)

    def in_dual_range(mu, margin):
        return bool(np.all(np.isfinite(mu)) and mu[1] - mu[0] ** 2 > margin)

    def divergence(a, b):
        # D_A(a, b) written in (m, var) of both arguments
        ma, va = _gauss_moments(a)
        mb, vb = _gauss_moments(b)
        return math.fsum([-0.5 * math.log(vb / va), -(va - vb) / (2.0 * va), (ma - mb) ** 2 / (2.0 * va)])

    def to_chart(t):
        m, var = _gauss_moments(t)
        return np.array([m, math.log(var)])

    def from_chart(c):
        var = math.exp(c[1])
        return np.array([c[0] / var, -0.5 / var])

    def random_point(rng):
        return from_chart(np.array([rng.normal(), rng.normal(scale=0.7)]))

    return MirrorMap(
        name="gaussian_log_partition",
        dim=2,
        value=value,
        grad=grad,
        hess=hess,
        conj_grad=conj_grad,
        in_domain=in_domain,
        in_dual_range=in_dual_range,
        conj_value=conj_value,
        divergence=divergence,
        to_chart=to_chart,
        from_chart=from_chart,
        boundary_distance=lambda t: float(-t[1]),
        random_point=random_point,
    )


def with_numerical_inverse(
    name: str,
    dim: int,
    value: Callable,
    grad: Callable,
    hess: Callable,
    in_domain: Callable[[np.ndarray, float], bool],
    start: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-12,
    max_iter: int = 100,
    **kwargs,
) -> MirrorMap:
    """Build a user mirror whose ``grad h*`` is found by damped Newton iterations.

    ``start(p)`` supplies an in-domain initial guess for the inverse of ``p``.
    The stated tolerance ``tol`` bounds ``||grad h(x) - p||`` relative to
    ``1 + ||p||``; a dual point is in range iff Newton reaches it.
    """

    def solve(p):
        p = np.asarray(p, dtype=float)
        x = np.asarray(start(p), dtype=float)
        target = tol * (1.0 + np.linalg.norm(p))
        for _ in range(max_iter):
            r = grad(x) - p
            if np.linalg.norm(r) <= target:
                return x
            dx = np.linalg.solve(hess(x), r)
            step = 1.0
            while not in_domain(x - step * dx, EPS_DOM):
                step *= 0.5
                if step < 1e-30:
                    raise DualRangeError(f"{name}: Newton inversion stalled at the boundary")
            x = x - step * dx
        if np.linalg.norm(grad(x) - p) <= target:
            return x
        raise DualRangeError(f"{name}: Newton inversion did not converge")

    def in_dual_range(p, margin):
        if not np.all(np.isfinite(p)):
            return False
        try:
            solve(p)
        except (DualRangeError, np.linalg.LinAlgError):
            return False
        return True

    return MirrorMap(
        name=name,
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        conj_grad=solve,
        in_domain=in_domain,
        in_dual_range=in_dual_range,
        conj_tol=tol,
        **kwargs,
    )
