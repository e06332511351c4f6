"""Tweedie compound Poisson distribution for 1 < rho < 2.

Density evaluation, the boosting loss and its negative gradient on the log
scale, the (lambda, alpha, gamma) reparametrization, and exact sampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


def _check_rho(rho):
    if not 1.0 < rho < 2.0:
        raise ValueError(f"rho must lie in (1, 2), got {rho}")


@dataclass(frozen=True)
class TweedieParams:
    """Mean ``mu``, dispersion ``phi`` and index ``rho`` of Tw(mu, phi, rho)."""

    mu: float
    phi: float
    rho: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        _check_rho(self.rho)

    @property
    def variance(self) -> float:
        return self.phi * self.mu ** self.rho


@dataclass(frozen=True)
class CompoundPoissonParams:
    """Poisson rate ``lam`` and gamma shape/scale of the claim sizes."""

    lam: float
    alpha: float
    gamma: float

    def __post_init__(self):
        for name in ("lam", "alpha", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class WeightedObservation:
    y: float
    w: float
    f: float

    def __post_init__(self):
        if not self.y >= 0:
            raise ValueError("y must be nonnegative")
        if not self.w > 0:
            raise ValueError("w must be positive")
        if not np.isfinite(self.f):
            raise ValueError("f must be finite")


def to_compound_poisson(p: TweedieParams) -> CompoundPoissonParams:
    mu, phi, rho = p.mu, p.phi, p.rho
    lam = mu ** (2.0 - rho) / (phi * (2.0 - rho))
    alpha = (2.0 - rho) / (rho - 1.0)
    gamma = phi * (rho - 1.0) * mu ** (rho - 1.0)
    return CompoundPoissonParams(lam, alpha, gamma)


def from_compound_poisson(c: CompoundPoissonParams) -> TweedieParams:
    rho = (c.alpha + 2.0) / (c.alpha + 1.0)
    mu = c.lam * c.alpha * c.gamma
    phi = c.lam ** (1.0 - rho) * (c.alpha * c.gamma) ** (2.0 - rho) / (2.0 - rho)
    return TweedieParams(mu, phi, rho)


def log_series_normalizer(z, phi, rho):
    """log a(z, phi, rho) for z > 0, where a = (1/z) * sum_t W_t.

    Vectorized over ``z`` and ``phi``. The Wright-type series is summed in
    log space outward from its largest term.
    """
    _check_rho(rho)
    z = np.asarray(z, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("log_series_normalizer requires z > 0")
    if np.any(phi <= 0):
        raise ValueError("phi must be positive")
    shape = np.broadcast(z, phi).shape
    zb = np.ascontiguousarray(np.broadcast_to(z, shape).ravel())
    pb = np.ascontiguousarray(np.broadcast_to(phi, shape).ravel())
    out = kernels.log_wright_series(zb, pb, float(rho)) - np.log(zb)
    out = out.reshape(shape)
    return out if shape else float(out)


def log_density(z, mu, phi, rho):
    """Elementwise log f(z | mu, phi, rho); ``phi`` may be per observation."""
    _check_rho(rho)
    z, mu, phi = np.broadcast_arrays(
        np.asarray(z, dtype=np.float64),
        np.asarray(mu, dtype=np.float64),
        np.asarray(phi, dtype=np.float64))
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    theta = mu ** (1.0 - rho) / (1.0 - rho)
    kappa = mu ** (2.0 - rho) / (2.0 - rho)
    out = (z * theta - kappa) / phi
    pos = z > 0
    if np.any(pos):
        out = np.array(out, dtype=np.float64)
        out[pos] += log_series_normalizer(z[pos], phi[pos], rho)
    return out if out.ndim else float(out)


def tweedie_log_density(z: float, p: TweedieParams) -> float:
    return float(log_density(z, p.mu, p.phi, p.rho))


def loglik(y, mu, phi, rho, w=None):
    """Sum of log densities with per-observation dispersion phi / w."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    return float(np.sum(log_density(y, mu, phi / w, rho)))


def loss(y, w, f, rho):
    """Negative log-likelihood kernel Psi on the log-mean scale (elementwise)."""
    f = np.asarray(f, dtype=np.float64)
    return w * (-y * np.exp((1.0 - rho) * f) / (1.0 - rho)
                + np.exp((2.0 - rho) * f) / (2.0 - rho))


def neg_gradient(y, w, f, rho):
    """-dPsi/dF, elementwise."""
    f = np.asarray(f, dtype=np.float64)
    return w * (y * np.exp((1.0 - rho) * f) - np.exp((2.0 - rho) * f))


def loss_psi(obs: WeightedObservation, rho: float) -> float:
    return float(loss(obs.y, obs.w, obs.f, rho))


def obs_neg_gradient(obs: WeightedObservation, rho: float) -> float:
    return float(neg_gradient(obs.y, obs.w, obs.f, rho))


def sample(mu, phi, rho, w=1.0, rng=None, size=None):
    """Draw from Tw(mu, phi / w, rho) as a Poisson sum of gamma variables.

    The sum of N iid Gamma(alpha, gamma) draws is drawn directly as
    Gamma(N * alpha, gamma), which is exact.
    """
    _check_rho(rho)
    rng = np.random.default_rng(rng)
    mu, phi_w = np.broadcast_arrays(
        np.asarray(mu, dtype=np.float64),
        np.asarray(phi, dtype=np.float64) / np.asarray(w, dtype=np.float64))
    if size is not None:
        mu = np.broadcast_to(mu, size)
        phi_w = np.broadcast_to(phi_w, size)
    lam = mu ** (2.0 - rho) / (phi_w * (2.0 - rho))
    alpha = (2.0 - rho) / (rho - 1.0)
    scale = phi_w * (rho - 1.0) * mu ** (rho - 1.0)
    counts = np.asarray(rng.poisson(lam))
    out = np.zeros(np.shape(lam))
    pos = counts > 0
    out[pos] = rng.gamma(counts[pos] * alpha, np.broadcast_to(scale, out.shape)[pos])
    return out if out.ndim else float(out)


def sample_tweedie(p: TweedieParams, w: float, rng) -> float:
    return float(sample(p.mu, p.phi, p.rho, w=w, rng=rng))
