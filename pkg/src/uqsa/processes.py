"""Markov process specifications evaluated at a fixed parameter value.

Each spec carries the parameter vector ``theta`` it was built at together with
the derivatives needed for Fisher information computations.  Specs are
immutable; build a new one to move in parameter space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def _freeze(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _labels(values, n):
    if values is None:
        values = np.arange(n, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != n:
        raise ValueError("one label per state is required")
    return _freeze(values)


def _stationary_from_generator(gen):
    """Solve pi @ gen = 0 with sum(pi) = 1."""
    n = gen.shape[0]
    a = np.vstack([gen.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < n:
        raise ValueError("stationary distribution is not unique")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _check_dist(p, n, what):
    p = np.asarray(p, dtype=float)
    if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"{what} must be a probability vector of length {n}")
    return _freeze(p)


@dataclass(frozen=True)
class DTMCSpec:
    """Finite-state discrete-time chain with transition matrix ``matrix``.

    ``grad_log[x, y, :]`` is the parameter gradient of ``log p(x, y)``; entries
    with ``p(x, y) = 0`` are ignored.  ``values`` maps state indices to labels
    seen by observables.
    """

    matrix: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grad_log: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    initial: Optional[np.ndarray] = None
    slowest_rate: Optional[float] = None

    def __post_init__(self):
        p = np.array(self.matrix, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("transition probabilities must be finite and nonnegative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("transition matrix rows must sum to 1")
        n = p.shape[0]
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "matrix", _freeze(p))
        object.__setattr__(self, "theta", _freeze(theta))
        if self.grad_log is not None:
            g = np.asarray(self.grad_log, dtype=float)
            if g.shape != (n, n, theta.size):
                raise ValueError(f"grad_log must have shape {(n, n, theta.size)}")
            object.__setattr__(self, "grad_log", _freeze(np.where(p[..., None] > 0, g, 0.0)))
        object.__setattr__(self, "values", _labels(self.values, n))
        if self.initial is not None:
            object.__setattr__(self, "initial", _check_dist(self.initial, n, "initial"))

    @property
    def n_states(self):
        return self.matrix.shape[0]

    def stationary(self):
        return _stationary_from_generator(self.matrix - np.eye(self.n_states))


@dataclass(frozen=True)
class CTMCSpec:
    """Finite-state jump process with rates ``rates[x, x']`` (diagonal ignored).

    Exit rates are the row sums and jump probabilities the normalized rows.
    ``grad_log[x, x', :]`` is the parameter gradient of ``log c(x, x')``.
    """

    rates: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grad_log: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    initial: Optional[np.ndarray] = None
    slowest_rate: Optional[float] = None

    def __post_init__(self):
        r = np.array(self.rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("rate matrix must be square")
        np.fill_diagonal(r, 0.0)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("rates must be finite and nonnegative")
        n = r.shape[0]
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "rates", _freeze(r))
        object.__setattr__(self, "theta", _freeze(theta))
        if self.grad_log is not None:
            g = np.asarray(self.grad_log, dtype=float)
            if g.shape != (n, n, theta.size):
                raise ValueError(f"grad_log must have shape {(n, n, theta.size)}")
            if np.any(~np.isfinite(g[r > 0])):
                raise ValueError("non-finite rate gradient on a positive rate")
            object.__setattr__(self, "grad_log", _freeze(np.where(r[..., None] > 0, g, 0.0)))
        object.__setattr__(self, "values", _labels(self.values, n))
        if self.initial is not None:
            object.__setattr__(self, "initial", _check_dist(self.initial, n, "initial"))

    @property
    def n_states(self):
        return self.rates.shape[0]

    @property
    def exit_rates(self):
        return self.rates.sum(axis=1)

    def jump_probs(self):
        lam = self.exit_rates
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(lam[:, None] > 0, self.rates / lam[:, None], 0.0)

    def generator(self):
        return self.rates - np.diag(self.exit_rates)

    def stationary(self):
        return _stationary_from_generator(self.generator())


@dataclass(frozen=True)
class SDESpec:
    """Diffusion dX = a(X) dt + sigma(X) dB on R^d.

    ``drift(x)`` maps an ``(n, d)`` array to ``(n, d)``; ``diffusion`` is either
    a constant ``(d, d)`` matrix or a callable returning ``(n, d, d)``.
    ``grad_drift(x)`` returns ``(n, d, k)``.  Parameters listed in
    ``diffusion_params`` enter the diffusion coefficient, whose derivative
    ``grad_diffusion(x)`` has shape ``(n, d, d, k)``.
    """

    drift: Callable
    diffusion: object
    dim: int = 1
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grad_drift: Optional[Callable] = None
    grad_diffusion: Optional[Callable] = None
    diffusion_params: tuple = ()
    stationary_sampler: Optional[Callable] = None
    slowest_rate: Optional[float] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "theta", _freeze(theta))
        object.__setattr__(self, "diffusion_params", tuple(int(i) for i in self.diffusion_params))
        if not callable(self.diffusion):
            s = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
            if s.shape != (self.dim, self.dim):
                raise ValueError(f"diffusion must be {self.dim}x{self.dim}")
            object.__setattr__(self, "diffusion", _freeze(s))

    def as_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.dim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"states must have shape (n, {self.dim})")
        return x

    def sigma(self, x):
        x = self.as_points(x)
        if callable(self.diffusion):
            return np.asarray(self.diffusion(x), dtype=float)
        return np.broadcast_to(self.diffusion, (x.shape[0], self.dim, self.dim))

    def covariance(self, x):
        s = self.sigma(x)
        return s @ np.swapaxes(s, -1, -2)

    def sample_stationary(self, rng, n):
        if self.stationary_sampler is None:
            raise ValueError("no stationary sampler for this diffusion")
        return self.as_points(self.stationary_sampler(rng, n))


def check_invertible(cov, limit=1e12):
    cond = np.linalg.cond(cov)
    if np.any(~np.isfinite(cond)) or np.any(cond > limit):
        raise np.linalg.LinAlgError("diffusion matrix is singular on the probe points")


@dataclass(frozen=True)
class EulerChain:
    """Euler-Maruyama discretization of an SDE viewed as a chain on R^d.

    The kernel is N(x + a(x) dt, sigma sigma^T(x) dt).
    """

    sde: SDESpec
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def theta(self):
        return self.sde.theta

    def mean(self, x):
        x = self.sde.as_points(x)
        return x + self.sde.drift(x) * self.dt

    def cov(self, x):
        return self.sde.covariance(x) * self.dt

    def step(self, x, rng):
        x = self.sde.as_points(x)
        xi = rng.standard_normal(x.shape)
        return self.mean(x) + np.einsum("nij,nj->ni", self.sde.sigma(x), xi) * math.sqrt(self.dt)

    def sample_stationary(self, rng, n):
        return self.sde.sample_stationary(rng, n)

    def log_kernel(self, x, y):
        x = self.sde.as_points(x)
        r = self.sde.as_points(y) - self.mean(x)
        s = self.cov(x)
        _, logdet = np.linalg.slogdet(s)
        quad = np.einsum("ni,ni->n", r, np.linalg.solve(s, r[..., None])[..., 0])
        return -0.5 * (quad + logdet + self.sde.dim * math.log(2 * math.pi))

    def grad_log_kernel(self, x, y):
        """Parameter gradient of log p(x, y), shape (n, k)."""
        sde = self.sde
        x = sde.as_points(x)
        r = sde.as_points(y) - self.mean(x)
        s = self.cov(x)
        sinv_r = np.linalg.solve(s, r[..., None])[..., 0]
        k = sde.theta.size
        out = np.zeros((x.shape[0], k))
        if sde.grad_drift is not None:
            dm = np.asarray(sde.grad_drift(x), dtype=float) * self.dt
            out += np.einsum("nik,ni->nk", dm, sinv_r)
        if sde.diffusion_params:
            if sde.grad_diffusion is None:
                raise ValueError("grad_diffusion is required for diffusion parameters")
            sig = sde.sigma(x)
            dsig = np.asarray(sde.grad_diffusion(x), dtype=float)
            for j in sde.diffusion_params:
                ds = (dsig[..., j] @ np.swapaxes(sig, -1, -2)
                      + sig @ np.swapaxes(dsig[..., j], -1, -2)) * self.dt
                sinv_ds = np.linalg.solve(s, ds)
                out[:, j] += 0.5 * (np.einsum("ni,nij,nj->n", sinv_r, ds, sinv_r)
                                    - np.trace(sinv_ds, axis1=1, axis2=2))
        return out

    def kernel_relent(self, other: "EulerChain", x):
        """KL(this kernel at x || other kernel at x) for each row of x."""
        x = self.sde.as_points(x)
        m1, m2 = self.mean(x), other.mean(x)
        s1, s2 = self.cov(x), other.cov(x)
        d = self.sde.dim
        s2inv_s1 = np.linalg.solve(s2, s1)
        dm = m2 - m1
        quad = np.einsum("ni,ni->n", dm, np.linalg.solve(s2, dm[..., None])[..., 0])
        _, ld1 = np.linalg.slogdet(s1)
        _, ld2 = np.linalg.slogdet(s2)
        return 0.5 * (np.trace(s2inv_s1, axis1=1, axis2=2) + quad - d + ld2 - ld1)
