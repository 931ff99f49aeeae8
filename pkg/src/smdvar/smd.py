"""Stochastic mirror descent: steps, schedules, proximal steps and traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DualRangeError, SMDError, UnknownMeanGradient, UnsupportedProxPair
from .mirror import MirrorMap, as_point, bregman
from .objective import StochasticObjective

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replica_seed(root: int, index: int) -> int:
    """Seed of replica ``index``: ``splitmix64(root XOR index)``."""
    return splitmix64((int(root) ^ int(index)) & _MASK64)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes indexed by the 0-based step number ``k`` (``x^k -> x^{k+1}``).

    * ``constant``: ``eta``.
    * ``map``: ``1 / (k + n0 + 1)``, which reproduces the MAP estimator
      ``(n0 mu0 + sum T(X_i)) / (n0 + n)`` after ``n`` steps.
    * ``halving``: ``2 / (k0 + k + 1)``, i.e. ``2 / (j + 1)`` with ``j = k0 + k``
      the absolute iteration counter of a run started at ``j = k0``.
    """

    kind: str
    eta: Optional[float] = None
    n0: Optional[int] = None
    k0: Optional[int] = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.eta is None or not 0 < self.eta <= 1:
                raise ValueError(f"constant step size must lie in (0, 1], got {self.eta}")
        elif self.kind == "map":
            if self.n0 is None or self.n0 < 1:
                raise ValueError("MAP schedule requires n0 >= 1")
        elif self.kind == "halving":
            if self.k0 is None or self.k0 < 1:
                raise ValueError("halving schedule requires k0 >= 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls("constant", eta=float(eta))

    @classmethod
    def map(cls, n0: int) -> "StepSchedule":
        return cls("map", n0=int(n0))

    @classmethod
    def halving(cls, k0: int) -> "StepSchedule":
        return cls("halving", k0=int(k0))

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.eta
        if self.kind == "map":
            return 1.0 / (k + self.n0 + 1)
        return 2.0 / (self.k0 + k + 1)


# ---------------------------------------------------------------------------
# proximal terms


@dataclass(frozen=True)
class ProxSpec:
    """A regularizer ``g`` with a closed-form mirror prox.

    ``box``: indicator of ``[lower, upper]``; ``l1``: ``lam ||x||_1``;
    ``simplex``: indicator of the probability simplex.
    """

    kind: str
    lower: Any = -math.inf
    upper: Any = math.inf
    lam: float = 0.0

    SUPPORTED = {("euclidean", "box"), ("euclidean", "l1"), ("neg_entropy", "simplex")}

    @classmethod
    def box(cls, lower=-math.inf, upper=math.inf) -> "ProxSpec":
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def l1(cls, lam: float) -> "ProxSpec":
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        return cls("l1", lam=float(lam))

    @classmethod
    def simplex(cls) -> "ProxSpec":
        return cls("simplex")

    def value(self, x: np.ndarray) -> float:
        if self.kind == "box":
            return 0.0 if np.all((x >= self.lower) & (x <= self.upper)) else math.inf
        if self.kind == "l1":
            return self.lam * float(np.abs(x).sum())
        return 0.0 if abs(x.sum() - 1.0) <= 1e-9 and np.all(x >= 0) else math.inf


def _check_pair(h: MirrorMap, prox: ProxSpec):
    if (h.name, prox.kind) not in ProxSpec.SUPPORTED:
        raise UnsupportedProxPair(f"no closed-form prox for mirror {h.name!r} with g={prox.kind!r}")


# ---------------------------------------------------------------------------
# steps


def smd_step(h: MirrorMap, obj: StochasticObjective, x, eta: float, sample) -> np.ndarray:
    """One stochastic mirror step ``grad h*(grad h(x) - eta grad f_xi(x))``."""
    x = h.check_point(x)
    return h.mirror_step(x, obj.grad_at(sample, x), eta)


def det_step(h: MirrorMap, obj: StochasticObjective, x, eta: float) -> np.ndarray:
    """The deterministic mirror step, using the mean gradient."""
    if obj.mean_grad is None:
        raise UnknownMeanGradient(f"{obj.name} has no mean gradient")
    x = h.check_point(x)
    return h.mirror_step(x, obj.mean_grad(x), eta)


def prox_smd_step(
    h: MirrorMap, obj: StochasticObjective, prox: Optional[ProxSpec], x, eta: float, sample
) -> tuple[np.ndarray, np.ndarray]:
    """Proximal mirror step and the subgradient ``omega in dg(x+)`` it realizes.

    The pair satisfies ``grad h(x+) = grad h(x) - eta (grad f_xi(x) + omega)``.
    """
    if prox is None:
        return smd_step(h, obj, x, eta, sample), np.zeros(h.dim)
    _check_pair(h, prox)
    x = h.check_point(x)
    g = obj.grad_at(sample, x)
    if prox.kind == "simplex":
        if abs(x.sum() - 1.0) > 1e-9:
            raise ValueError("simplex prox requires a point on the simplex")
        a = np.log(x) - eta * g
        lse = logsumexp(a)
        xp = np.exp(a - lse)
        return xp, np.full(h.dim, lse / eta)
    z = x - eta * g
    if prox.kind == "box":
        if np.any(x < prox.lower) or np.any(x > prox.upper):
            raise ValueError("box prox requires a point inside the box")
        xp = np.clip(z, prox.lower, prox.upper)
    else:
        xp = np.sign(z) * np.maximum(np.abs(z) - eta * prox.lam, 0.0)
    return xp, (z - xp) / eta


def dual_identity_residual(h: MirrorMap, x, x_plus, eta: float, grad, omega=None) -> float:
    """Relative residual of ``grad h(x+) + eta omega = grad h(x) - eta grad``."""
    gx = h.grad(np.asarray(x, dtype=float))
    lhs = h.grad(np.asarray(x_plus, dtype=float))
    if omega is not None:
        lhs = lhs + eta * np.asarray(omega)
    return float(np.linalg.norm(lhs - (gx - eta * np.asarray(grad))) / (1.0 + np.linalg.norm(gx)))


# ---------------------------------------------------------------------------
# runs and traces


@dataclass
class RunConfig:
    mirror: MirrorMap
    objective: StochasticObjective
    schedule: StepSchedule
    horizon: int
    seed: int
    x0: Any
    record_every: int = 1
    prox: Optional[ProxSpec] = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        self.x0 = self.mirror.check_point(self.x0)


@dataclass
class TraceRecord:
    k: int
    eta: Optional[float]  # step size that produced x^k (None at k = 0)
    sample: Any
    x: np.ndarray
    dual: np.ndarray  # grad h(x^k); the mean parameters for the Gaussian mirror
    bregman_to_opt: Optional[float]
    f_gap: Optional[float]


@dataclass
class Trace:
    dim: int
    records: list = field(default_factory=list)
    error: Optional[SMDError] = None
    sample_format: Any = repr

    @property
    def aborted(self) -> bool:
        return self.error is not None

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.k for r in self.records])

    @property
    def iterates(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def duals(self) -> np.ndarray:
        return np.array([r.dual for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records])

    def to_csv(self, fh=None) -> str:
        """Serialize as ``k,eta,sample,x_0..x_{d-1},bregman_to_opt,f_gap``.

        Unknown quantities are empty fields; floats use ``repr`` (round-trip exact).
        """
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "eta", "sample", *(f"x_{i}" for i in range(self.dim)), "bregman_to_opt", "f_gap"])
        for r in self.records:
            w.writerow(
                [
                    r.k,
                    "" if r.eta is None else repr(float(r.eta)),
                    "" if r.sample is None else self.sample_format(r.sample),
                    *(repr(float(v)) for v in r.x),
                    "" if r.bregman_to_opt is None else repr(float(r.bregman_to_opt)),
                    "" if r.f_gap is None else repr(float(r.f_gap)),
                ]
            )
        return buf.getvalue() if fh is None else ""


def read_trace_csv(text: str) -> dict:
    """Parse a trace CSV into float columns (``nan`` for empty fields)."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        if name == "sample":
            out[name] = [row[j] for row in body]
        else:
            out[name] = np.array([float(row[j]) if row[j] != "" else np.nan for row in body])
    return out


def _record(cfg: RunConfig, k, eta, sample, x) -> TraceRecord:
    h, obj = cfg.mirror, cfg.objective
    dist = gap = None
    if obj.opt is not None:
        dist = bregman(h, obj.opt, x)
        if obj.mean_value is not None:
            gap = obj.mean_value(x) - obj.mean_value(obj.opt)
    return TraceRecord(k, eta, sample, np.array(x, dtype=float), h.grad(x), dist, gap)


def run(cfg: RunConfig) -> Trace:
    """Run SMD for ``cfg.horizon`` steps from ``cfg.x0``.

    Deterministic given ``cfg.seed``: one ``objective.sample`` draw per step.
    Step 0 and the final step are always recorded.  A ``DualRangeError``
    stops the run; the partial trace is returned with ``trace.error`` set
    (the error carries the failing step index).
    """
    rng = np.random.default_rng(cfg.seed)
    h, obj = cfg.mirror, cfg.objective
    trace = Trace(dim=h.dim, sample_format=obj.format_sample)
    x = cfg.x0
    trace.records.append(_record(cfg, 0, None, None, x))
    for k in range(cfg.horizon):
        eta = cfg.schedule(k)
        s = obj.sample(rng)
        try:
            x, _ = prox_smd_step(h, obj, cfg.prox, x, eta, s)
        except DualRangeError as err:
            err.step = k
            err.eta = eta
            trace.error = err
            break
        if (k + 1) % cfg.record_every == 0 or k + 1 == cfg.horizon:
            trace.records.append(_record(cfg, k + 1, eta, s, x))
    return trace


def run_replicas(cfg: RunConfig, replicas: int, root_seed: Optional[int] = None) -> list:
    """Independent runs seeded by :func:`replica_seed` from ``root_seed`` (default ``cfg.seed``)."""
    root = cfg.seed if root_seed is None else root_seed
    out = []
    for i in range(replicas):
        c = RunConfig(cfg.mirror, cfg.objective, cfg.schedule, cfg.horizon, replica_seed(root, i), cfg.x0,
                      cfg.record_every, cfg.prox)
        out.append(run(c))
    return out
