"""Synthetic Tweedie datasets with known log-mean functions.

Model 1 is a step in one variable, Model 2 a two-hill surface in two
variables, and the random function generator draws a sum of twenty
randomly oriented Gaussian bumps over ten standard normal inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tweedie
from .data import Dataset

PHI = 0.5
RHO = 1.5


def model1_F(x):
    return 0.5 * (np.asarray(x, dtype=np.float64) > 0.5)


def model2_F(x1, x2):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    return np.exp(-5 * (1 - x1) ** 2 + x2 ** 2) + np.exp(-5 * x1 ** 2 + (1 - x2) ** 2)


def gen_model1(n, seed, phi=PHI, rho=RHO):
    """x ~ U(0, 1), F = 0.5 * 1{x > 0.5}, y ~ Tw(exp F, phi, rho), w = 1."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    F = model1_F(x)
    y = tweedie.sample(np.exp(F), phi, rho, rng=rng)
    return Dataset(x[:, None], y, None), F


def gen_model2(n, seed, phi=PHI, rho=RHO):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    F = model2_F(X[:, 0], X[:, 1])
    y = tweedie.sample(np.exp(F), phi, rho, rng=rng)
    return Dataset(X, y, None), F


@dataclass(frozen=True)
class RfgSpec:
    p: int = 10
    n_terms: int = 20
    phi: float = 1.0
    rho: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.n_terms < 1:
            raise ValueError("p and n_terms must be positive")


@dataclass
class RfgTerm:
    coef: float
    subset: np.ndarray      # 0-based input indices, length p_k
    mean: np.ndarray
    V: np.ndarray
    U: np.ndarray
    d: np.ndarray

    def __call__(self, X):
        z = X[:, self.subset] - self.mean
        return np.exp(-0.5 * np.einsum("ij,jk,ik->i", z, self.V, z))


def random_orthonormal(k, rng):
    """QR of a standard Gaussian matrix with the signs fixed so diag(R) > 0."""
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


@dataclass
class RandomFunction:
    spec: RfgSpec
    terms: list = field(default_factory=list)

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64)
        return sum(t.coef * t(X) for t in self.terms)


def draw_rfg_function(spec: RfgSpec, rng=None) -> RandomFunction:
    """Draw the target function.

    Per term, in this order: coefficient b ~ U[-1, 1]; r ~ Exp(mean 2) by
    inverse CDF, size p_k = min(floor(2.5 + r), p); a random permutation
    whose first p_k entries select the inputs; mean ~ N(0, I); sqrt of the
    eigenvalues ~ U[0.1, 2]; a random orthonormal eigenbasis.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    terms = []
    for _ in range(spec.n_terms):
        b = rng.uniform(-1.0, 1.0)
        r = -2.0 * np.log1p(-rng.uniform())
        pk = int(min(np.floor(2.5 + r), spec.p))
        subset = rng.permutation(spec.p)[:pk]
        mean = rng.standard_normal(pk)
        d = rng.uniform(0.1, 2.0, size=pk) ** 2
        U = random_orthonormal(pk, rng)
        terms.append(RfgTerm(b, subset, mean, (U * d) @ U.T, U, d))
    return RandomFunction(spec, terms)


def gen_rfg(n, spec: RfgSpec, function: RandomFunction | None = None, rng=None):
    """Draw the function (unless given), then x ~ N(0, I_p) and y ~ Tw(exp F, phi, rho).

    Everything comes from one generator seeded by ``spec.seed`` unless
    ``rng`` is passed. Returns (dataset, true F, function).
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    if function is None:
        function = draw_rfg_function(spec, rng)
    X = rng.standard_normal((n, spec.p))
    F = function(X)
    y = tweedie.sample(np.exp(F), spec.phi, spec.rho, rng=rng)
    return Dataset(X, y, None), F, function
