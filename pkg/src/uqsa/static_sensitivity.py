"""Fisher information and sensitivity bounds for parametric families.

For a family ``p(theta)`` the sensitivity of ``E[f]`` in a unit direction
``v`` equals ``Cov(f, v . grad log p)`` and is controlled by

    |S_{f,v}| <= sqrt(Var f) * sqrt(v^T F v)

with ``F`` the Fisher information matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .rng import run_chunks


class Estimate(NamedTuple):
    value: float
    stderr: float


def unit(v) -> np.ndarray:
    """Normalize a direction; zero or non-finite directions are rejected."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0:
        raise ValueError("direction must be a nonzero finite vector")
    return v / norm


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric positive semidefinite information matrix.

    Infinite diagonal entries flag parameters whose perturbation makes the
    measures mutually singular; their off-diagonal entries are stored as 0.
    """

    entries: np.ndarray
    provenance: str = "static"
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("Fisher matrix must be square")
        if self.provenance not in ("static", "path", "path_euler"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        inf = np.isinf(np.diag(m))
        fin = ~inf
        block = m[np.ix_(fin, fin)]
        if not np.all(np.isfinite(block)):
            raise ValueError("non-finite Fisher entries outside flagged directions")
        scale = max(1.0, float(np.abs(block).max())) if block.size else 1.0
        if np.abs(block - block.T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("Fisher matrix is not symmetric")
        block = 0.5 * (block + block.T)
        if block.size and np.linalg.eigvalsh(block).min() < -1e-8 * scale:
            raise ValueError("Fisher matrix is not positive semidefinite")
        out = np.zeros_like(m)
        out[np.ix_(fin, fin)] = block
        out[inf, inf] = np.inf
        out.setflags(write=False)
        object.__setattr__(self, "entries", out)
        if self.stderr is not None:
            se = np.array(self.stderr, dtype=float)
            se.setflags(write=False)
            object.__setattr__(self, "stderr", se)

    @property
    def dim(self):
        return self.entries.shape[0]

    def quad(self, v) -> float:
        """v^T F v; infinite when v touches a flagged direction."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != (self.dim,):
            raise ValueError(f"direction must have length {self.dim}")
        inf = np.isinf(np.diag(self.entries))
        if np.any(v[inf] != 0):
            return math.inf
        fin = ~inf
        block = self.entries[np.ix_(fin, fin)]
        return float(max(v[fin] @ block @ v[fin], 0.0))


@dataclass(frozen=True)
class ParametricFamily:
    """Family of densities ``p(theta, x)`` wrt a fixed reference measure.

    ``log_density(theta, x)`` and ``grad_log_density(theta, x)`` act on a
    batch of samples (leading axis); the gradient has shape ``(n, k)``.
    ``sampler(theta, rng, n)`` draws ``n`` samples.  Finite families may give
    ``support`` for exact sums and 1-d continuous ones a ``domain`` for
    quadrature; ``fisher(theta)`` is an optional closed form.
    """

    dim_theta: int
    log_density: Callable
    grad_log_density: Callable
    sampler: Callable
    support: Optional[np.ndarray] = None
    domain: Optional[tuple] = None
    fisher: Optional[Callable] = None
    name: str = ""


def _scores(fam, theta, x):
    g = np.asarray(fam.grad_log_density(theta, x), dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[1] != fam.dim_theta:
        raise ValueError("gradient has the wrong number of components")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite score")
    return g


def fim_monte_carlo(fam: ParametricFamily, theta, n_samples: int, seed: int = 0,
                    workers: int = 1, threads=None) -> FisherMatrix:
    """Sample mean of score outer products with per-entry standard errors."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    theta = np.asarray(theta, dtype=float)
    k = fam.dim_theta

    def job(rng, n, _):
        g = _scores(fam, theta, fam.sampler(theta, rng, n))
        outer = g[:, :, None] * g[:, None, :]
        return outer.sum(axis=0), (outer ** 2).sum(axis=0)

    parts = run_chunks(job, n_samples, seed, workers, threads)
    s1 = np.zeros((k, k))
    s2 = np.zeros((k, k))
    for a, b in parts:
        s1 += a
        s2 += b
    mean = s1 / n_samples
    var = np.maximum(s2 / n_samples - mean ** 2, 0.0) * n_samples / (n_samples - 1)
    mean = 0.5 * (mean + mean.T)
    return FisherMatrix(mean, "static", np.sqrt(var / n_samples))


def relative_entropy_family(fam: ParametricFamily, theta_q, theta_p) -> float:
    """R(P^theta_q || P^theta_p) by exact summation or quadrature."""
    tq = np.asarray(theta_q, dtype=float)
    tp = np.asarray(theta_p, dtype=float)
    if fam.support is not None:
        x = np.asarray(fam.support)
        lq = np.asarray(fam.log_density(tq, x), dtype=float)
        lp = np.asarray(fam.log_density(tp, x), dtype=float)
        q = np.exp(lq)
        pos = q > 0
        if np.any(~np.isfinite(lp[pos])):
            raise FloatingPointError("non-finite density ratio")
        return float(np.sum(q[pos] * (lq[pos] - lp[pos])))
    if fam.domain is not None:
        def integrand(x):
            xx = np.array([x])
            lq = float(fam.log_density(tq, xx)[0])
            lp = float(fam.log_density(tp, xx)[0])
            if lq == -math.inf:
                return 0.0
            return math.exp(lq) * (lq - lp)

        val, _ = integrate.quad(integrand, fam.domain[0], fam.domain[1],
                                epsabs=1e-15, epsrel=1e-12, limit=400)
        return float(val)
    raise ValueError("family needs a finite support or a 1-d domain")


def relent_quadratic_check(fam: ParametricFamily, theta, v, eps: float, fim=None):
    """Return (R(P^{theta+eps v} || P^theta), eps^2/2 v^T F v)."""
    theta = np.asarray(theta, dtype=float)
    v = unit(v)
    if fim is None:
        if fam.fisher is None:
            raise ValueError("a Fisher matrix is required")
        fim = FisherMatrix(fam.fisher(theta))
    if eps == 0:
        return 0.0, 0.0
    re = relative_entropy_family(fam, theta + eps * v, theta)
    return re, 0.5 * eps * eps * fim.quad(v)


def sensitivity_index_lr(fam: ParametricFamily, theta, v, f, n: int, seed: int = 0) -> Estimate:
    """Likelihood-ratio estimate of d/de E_{theta + e v}[f] at e = 0."""
    if n < 2:
        raise ValueError("need at least two samples")
    theta = np.asarray(theta, dtype=float)
    v = unit(v)
    x = fam.sampler(theta, np.random.default_rng(seed), n)
    fx = np.asarray(f(x), dtype=float).reshape(n)
    score = _scores(fam, theta, x) @ v
    terms = (fx - fx.mean()) * score
    return Estimate(float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(n)))


def sensitivity_index_fd(fam: ParametricFamily, theta, v, f, eps: float, n: int,
                         seed: int = 0) -> Estimate:
    """Central finite difference with common random numbers."""
    theta = np.asarray(theta, dtype=float)
    v = unit(v)
    xp = fam.sampler(theta + eps * v, np.random.default_rng(seed), n)
    xm = fam.sampler(theta - eps * v, np.random.default_rng(seed), n)
    d = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)).reshape(n) / (2 * eps)
    return Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(n)))


def sensitivity_bound_static(var_f: float, fim: FisherMatrix, v) -> float:
    if not var_f >= 0:
        raise ValueError("variance must be nonnegative")
    q = fim.quad(unit(v))
    if q == 0 or var_f == 0:
        return 0.0
    return float(math.sqrt(var_f) * math.sqrt(q))


def expfam_sufficient_bound(hess_f, k_idx: int, l_idx: int):
    """Bound on the sensitivity of E[t_k] to theta_l for an exponential family.

    Returns ``(sqrt(H_kk H_ll), k_idx == l_idx)``.
    """
    h = np.asarray(hess_f, dtype=float)
    a, b = h[k_idx, k_idx], h[l_idx, l_idx]
    if a < 0 or b < 0:
        raise ValueError("Hessian diagonal must be nonnegative")
    if k_idx == l_idx:
        return float(a), True
    return float(math.sqrt(a * b)), False


@dataclass(frozen=True)
class SensitivityRecord:
    observable: str
    direction: tuple
    index: Optional[float]
    index_stderr: Optional[float]
    bound: float
    mode: str
