"""Named (mirror, objective) pairs available to the command line."""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional

import numpy as np

from .gaussian import GaussParams
from .mirror import MirrorMap, euclidean, gaussian_log_partition, neg_entropy
from .objective import StochasticObjective, finite_kl, finite_linear_simplex, finite_quadratic, gaussian_nll


class Pair(NamedTuple):
    mirror: MirrorMap
    objective: StochasticObjective
    x0: np.ndarray  # default starting point
    prox: Optional[str]  # the regularizer this pair is meant for, if any


class Entry(NamedTuple):
    description: str
    build: Callable[[dict], Pair]


def _atoms(problem: dict, default):
    a = np.asarray(problem.get("atoms", default), dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _quadratic(problem: dict) -> Pair:
    atoms = _atoms(problem, [[-1.0, 0.0], [1.0, 0.5], [0.5, -1.0], [0.0, 2.0]])
    obj = finite_quadratic(atoms, problem.get("probs"), problem.get("curvatures"))
    return Pair(euclidean(obj.dim), obj, np.ones(obj.dim), None)


def _kl(problem: dict) -> Pair:
    atoms = _atoms(problem, [[0.5, 2.0], [1.0, 1.0], [3.0, 0.4]])
    obj = finite_kl(atoms, problem.get("probs"))
    return Pair(neg_entropy(obj.dim), obj, np.ones(obj.dim), None)


def _simplex(problem: dict) -> Pair:
    atoms = np.asarray(problem.get("atoms", [[1.0, 0.0, 0.5], [0.0, 1.0, 0.2], [0.3, 0.3, 0.0]]), dtype=float)
    obj = finite_linear_simplex(atoms, problem.get("probs"))
    return Pair(neg_entropy(obj.dim), obj, np.full(obj.dim, 1.0 / obj.dim), "simplex")


def _gaussian(problem: dict) -> Pair:
    m, v = float(problem.get("m_star", 0.0)), float(problem.get("var_star", 1.0))
    return Pair(gaussian_log_partition(), gaussian_nll(m, v), GaussParams(m, v).theta, None)


REGISTRY = {
    "euclidean/finite_quadratic": Entry("quadratics a/2 ||x - c||^2 over finite atoms, Euclidean mirror", _quadratic),
    "neg_entropy/finite_kl": Entry("generalized KL to finite atoms, entropy mirror", _kl),
    "neg_entropy/finite_linear_simplex": Entry("linear losses on the simplex, entropy mirror with simplex prox",
                                               _simplex),
    "gaussian_log_partition/gaussian_nll": Entry("Gaussian negative log-likelihood, log-partition mirror", _gaussian),
}


def build(pair: str, problem: Optional[dict] = None) -> Pair:
    if pair not in REGISTRY:
        raise KeyError(f"unknown pair {pair!r}")
    return REGISTRY[pair].build(problem or {})
