"""Example models with closed-form reference values.

* :class:`BirthDeath` - immigration/death jump process, Poisson stationary law.
* :class:`OUModel` - Ornstein-Uhlenbeck diffusion and its Euler chain.
* :class:`LogNormalDecay` - failure probability of a randomly decaying ODE.
* :class:`ExpFamily` - exponential families in natural parameters.
* :class:`TwoStateChain` / :class:`FixedChain` - small discrete-time chains.

The ``*_reference`` functions evaluate the closed forms only; nothing in them
is estimated by simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .processes import CTMCSpec, DTMCSpec, EulerChain, SDESpec
from .static_sensitivity import ParametricFamily

INF = math.inf


def _first(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] if x.ndim >= 2 else x


# ---------------------------------------------------------------------------
# birth/death
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BirthDeath:
    """Births at rate ``k1``, deaths at rate ``k2 * x``; parameters ``(k1, k2)``."""

    k1: float = 2.0
    k2: float = 1.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")

    @property
    def theta(self):
        return np.array([self.k1, self.k2])

    @property
    def mean(self):
        return self.k1 / self.k2

    def default_n_max(self):
        lam = self.mean
        return int(math.ceil(lam + 12.0 * math.sqrt(lam) + 25.0))

    def ctmc(self, n_max: Optional[int] = None) -> CTMCSpec:
        """Jump process truncated at ``n_max`` (births blocked there).

        The default cap leaves Poisson tail mass far below double precision.
        """
        n = self.default_n_max() if n_max is None else int(n_max)
        x = np.arange(n + 1)
        rates = np.zeros((n + 1, n + 1))
        grad = np.zeros((n + 1, n + 1, 2))
        rates[x[:-1], x[:-1] + 1] = self.k1
        grad[x[:-1], x[:-1] + 1, 0] = 1.0 / self.k1
        rates[x[1:], x[1:] - 1] = self.k2 * x[1:]
        grad[x[1:], x[1:] - 1, 1] = 1.0 / self.k2
        init = stats.poisson.pmf(x, self.mean)
        return CTMCSpec(rates, self.theta, grad, values=x.astype(float),
                        initial=init / init.sum(), slowest_rate=self.k2)

    def stationary_family(self) -> ParametricFamily:
        n_max = self.default_n_max()

        def lam(th):
            return th[0] / th[1]

        def log_density(th, x):
            x = _first(x)
            return stats.poisson.logpmf(x, lam(th))

        def grad(th, x):
            x = _first(x)
            d = np.array([1.0 / th[1], -th[0] / th[1] ** 2])
            return (x / lam(th) - 1.0)[:, None] * d[None, :]

        def sampler(th, rng, n):
            return stats.poisson.ppf(rng.random(n), lam(th)).astype(float)

        def fisher(th):
            k1, k2 = th
            return np.array([[1.0 / (k1 * k2), -1.0 / k2 ** 2],
                             [-1.0 / k2 ** 2, k1 / k2 ** 3]])

        return ParametricFamily(2, log_density, grad, sampler,
                                support=np.arange(4 * n_max, dtype=float),
                                fisher=fisher, name="poisson_stationary")

    def observables(self):
        lam = self.mean
        return {"f1": lambda x: _first(x), "f2": lambda x: (_first(x) - lam) ** 2}


@dataclass(frozen=True)
class BDReference:
    k1: float
    k2: float
    stationary_fim: np.ndarray
    path_fim: np.ndarray
    variance: dict
    iat: dict
    index: dict
    static_bound: dict
    path_bound: dict

    def acf(self, name, t):
        lam, k2 = self.k1 / self.k2, self.k2
        t = np.abs(np.asarray(t, dtype=float))
        if name == "f1":
            return lam * np.exp(-k2 * t)
        if name == "f2":
            return lam * np.exp(-k2 * t) + 2.0 * lam ** 2 * np.exp(-2.0 * k2 * t)
        raise KeyError(name)


def bd_reference(k1: float = 2.0, k2: float = 1.0) -> BDReference:
    lam = k1 / k2
    stat = np.array([[1.0 / (k1 * k2), -1.0 / k2 ** 2], [-1.0 / k2 ** 2, k1 / k2 ** 3]])
    path = np.array([[1.0 / k1, 0.0], [0.0, k1 / k2 ** 2]])
    variance = {"f1": lam, "f2": lam + 2.0 * lam ** 2}
    iat = {"f1": 2.0 * k1 / k2 ** 2, "f2": 2.0 * (k1 / k2 ** 2 + k1 ** 2 / k2 ** 3)}
    index = {("f1", "k1"): 1.0 / k2, ("f1", "k2"): -k1 / k2 ** 2,
             ("f2", "k1"): 1.0 / k2, ("f2", "k2"): -k1 / k2 ** 2}
    static_bound = {
        ("f1", "k1"): 1.0 / k2,
        ("f1", "k2"): k1 / k2 ** 2,
        ("f2", "k1"): math.sqrt(1.0 + 2.0 * lam) / k2,
        ("f2", "k2"): k1 / k2 ** 2 * math.sqrt(1.0 + 2.0 * lam),
    }
    path_bound = {
        ("f1", "k1"): math.sqrt(2.0) / k2,
        ("f1", "k2"): math.sqrt(2.0) * k1 / k2 ** 2,
        ("f2", "k1"): math.sqrt(2.0) / k2 * math.sqrt(1.0 + lam),
        ("f2", "k2"): math.sqrt(2.0) * k1 / k2 ** 2 * math.sqrt(1.0 + lam),
    }
    return BDReference(k1, k2, stat, path, variance, iat, index, static_bound, path_bound)


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OUModel:
    """dX = -alpha (X - beta) dt + gamma dB; parameters ``(alpha, beta, gamma)``."""

    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 0):
            raise ValueError("alpha and gamma must be positive")

    @property
    def theta(self):
        return np.array([self.alpha, self.beta, self.gamma])

    @property
    def variance(self):
        return self.gamma ** 2 / (2.0 * self.alpha)

    def sde(self) -> SDESpec:
        a, b, g = self.alpha, self.beta, self.gamma
        sd = math.sqrt(self.variance)

        def drift(x):
            return -a * (x - b)

        def grad_drift(x):
            out = np.zeros(x.shape + (3,))
            out[..., 0] = -(x - b)
            out[..., 1] = a
            return out

        def grad_diffusion(x):
            out = np.zeros((x.shape[0], 1, 1, 3))
            out[..., 2] = 1.0
            return out

        def sampler(rng, n):
            return (b + sd * rng.standard_normal(n))[:, None]

        return SDESpec(drift, np.array([[g]]), 1, self.theta, grad_drift, grad_diffusion,
                       diffusion_params=(2,), stationary_sampler=sampler, slowest_rate=a)

    def euler_chain(self, dt: float) -> EulerChain:
        return EulerChain(self.sde(), dt)

    def stationary_family(self) -> ParametricFamily:
        def moments(th):
            return th[1], th[2] ** 2 / (2.0 * th[0])

        def log_density(th, x):
            m, s = moments(th)
            return stats.norm.logpdf(_first(x), m, math.sqrt(s))

        def grad(th, x):
            a, b, g = th
            m, s = moments(th)
            r = _first(x) - m
            d_s = -0.5 / s + 0.5 * r ** 2 / s ** 2
            return np.stack([d_s * (-g ** 2 / (2.0 * a ** 2)), r / s, d_s * (g / a)], axis=1)

        def sampler(th, rng, n):
            m, s = moments(th)
            return m + math.sqrt(s) * stats.norm.ppf(rng.random(n))

        def fisher(th):
            a, b, g = th
            return np.array([[1.0 / (2.0 * a ** 2), 0.0, -1.0 / (a * g)],
                             [0.0, 2.0 * a / g ** 2, 0.0],
                             [-1.0 / (a * g), 0.0, 2.0 / g ** 2]])

        return ParametricFamily(3, log_density, grad, sampler, domain=(-np.inf, np.inf),
                                fisher=fisher, name="ou_stationary")


@dataclass(frozen=True)
class OUReference:
    alpha: float
    beta: float
    gamma: float
    dt: float
    variance: float
    iat: float
    iat_euler: float
    stationary_fim: np.ndarray
    path_fim: np.ndarray
    euler_fim: np.ndarray
    index: dict
    static_bound: dict
    path_bound: dict
    euler_bound: dict

    def acf(self, t):
        return self.variance * np.exp(-self.alpha * np.abs(np.asarray(t, dtype=float)))

    def acf_euler(self, n):
        return self.variance * (1.0 - self.alpha * self.dt) ** np.abs(np.asarray(n))


def ou_reference(alpha: float = 1.0, beta: float = 0.0, gamma: float = 1.0,
                 dt: float = 0.01) -> OUReference:
    """Closed forms for f(x) = x.

    The Euler columns average over the continuous-time stationary law, which
    keeps them free of O(dt) corrections.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, g = alpha, gamma
    var = g ** 2 / (2.0 * a)
    iat = g ** 2 / a ** 2
    stat = OUModel(a, beta, g).stationary_family().fisher(np.array([a, beta, g]))
    path = np.diag([1.0 / (2.0 * a), a ** 2 / g ** 2, INF])
    euler = np.diag([1.0 / (2.0 * a), a ** 2 / g ** 2, 2.0 / (g ** 2 * dt)])
    names = ("alpha", "beta", "gamma")
    index = {"alpha": 0.0, "beta": 1.0, "gamma": 0.0}

    def bounds(tau, diag):
        return {n: (INF if math.isinf(d) else math.sqrt(tau) * math.sqrt(d))
                for n, d in zip(names, diag)}

    return OUReference(a, beta, g, dt, var, iat, iat, stat, path, euler, index,
                       bounds(var, np.diag(stat)), bounds(iat, np.diag(path)),
                       bounds(iat, np.diag(euler)))


# ---------------------------------------------------------------------------
# log-normal decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogNormalDecay:
    """u(t) = u0 exp(-X t) with X ~ N(mu, sigma^2); observable 1{u(t) > threshold}."""

    u0: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0
    threshold: float = 10.0
    t: float = 1.0

    def __post_init__(self):
        if not (self.u0 > 0 and self.sigma > 0 and self.threshold > 0 and self.t > 0):
            raise ValueError("u0, sigma, threshold and t must be positive")

    @property
    def scale(self):
        """Standard deviation of log u(t)."""
        return self.sigma * self.t

    @property
    def cut(self):
        """Threshold for y = log u - log u0 + mu t, which is N(0, scale^2)."""
        return math.log(self.threshold) - math.log(self.u0) + self.mu * self.t

    def family(self) -> ParametricFamily:
        """Law of u(t) as a family in (mu, sigma), sampled through log u."""
        u0, t = self.u0, self.t

        def log_density(th, u):
            w = np.log(_first(u))
            return stats.norm.logpdf(w, math.log(u0) - th[0] * t, th[1] * t) - w

        def grad(th, u):
            mu, sg = th
            y = np.log(_first(u)) - math.log(u0) + mu * t
            return np.stack([-y / (sg ** 2 * t), (y ** 2 - sg ** 2 * t ** 2) / (sg ** 3 * t ** 2)],
                            axis=1)

        def sampler(th, rng, n):
            return u0 * np.exp(-(th[0] + th[1] * stats.norm.ppf(rng.random(n))) * t)

        def fisher(th):
            return np.diag([1.0 / th[1] ** 2, 2.0 / th[1] ** 2])

        return ParametricFamily(2, log_density, grad, sampler, domain=(0.0, np.inf),
                                fisher=fisher, name="lognormal_decay")


def failure_probability(m: LogNormalDecay) -> float:
    return float(stats.norm.sf(m.cut / m.scale))


def indicator_variance(m: LogNormalDecay) -> float:
    # (1 - erf^2) / 4 written as sf * cdf to avoid cancellation in the tails
    z = m.cut / m.scale
    return float(stats.norm.sf(z) * stats.norm.cdf(z))


@dataclass(frozen=True)
class LogNormalSensitivity:
    S_mu: float
    S_sigma: float
    fim_mu: float
    fim_sigma: float
    variance: float
    bound_mu: float
    bound_sigma: float


def _quad(func, lo, hi):
    out = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=1e-8, limit=500, full_output=True)
    if len(out) > 3:
        # scipy appends a warning message when the requested accuracy is missed
        raise ArithmeticError(f"quadrature did not converge: {out[3]}")
    return float(out[0])


def lognormal_sensitivities(m: LogNormalDecay) -> LogNormalSensitivity:
    """Sensitivity indices and bounds by adaptive quadrature in y = log u - log u0 + mu t."""
    s, t, sg = m.scale, m.t, m.sigma
    dens = stats.norm(0.0, s).pdf
    cut = m.cut
    s_mu = -_quad(lambda y: y / (sg ** 2 * t) * dens(y), cut, np.inf)
    s_sigma = _quad(lambda y: (y * y - s * s) / (sg ** 3 * t ** 2) * dens(y), cut, np.inf)
    f11 = _quad(lambda y: (y / (sg ** 2 * t)) ** 2 * dens(y), -np.inf, np.inf)
    f22 = _quad(lambda y: ((y * y - s * s) / (sg ** 3 * t ** 2)) ** 2 * dens(y), -np.inf, np.inf)
    var = indicator_variance(m)
    return LogNormalSensitivity(s_mu, s_sigma, f11, f22, var,
                                math.sqrt(var) * math.sqrt(f11), math.sqrt(var) * math.sqrt(f22))


def ode_figure(sigmas=(1.0, 2.0), t_grid=None, u0=1.0, mu=1.0, threshold=10.0):
    """Rows (sigma, t, S_mu, bound_mu, S_sigma, bound_sigma) on a time grid."""
    if t_grid is None:
        t_grid = np.arange(0.5, 10.0 + 1e-9, 0.25)
    rows = []
    for sg in sigmas:
        for t in t_grid:
            r = lognormal_sensitivities(LogNormalDecay(u0, mu, float(sg), threshold, float(t)))
            rows.append((float(sg), float(t), r.S_mu, r.bound_mu, r.S_sigma, r.bound_sigma))
    return rows


# ---------------------------------------------------------------------------
# exponential families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpFamily:
    """p(x) = k(x) exp(theta . t(x) - F(theta))."""

    name: str
    dim: int
    log_normalizer: Callable
    grad_log_normalizer: Callable
    hess_log_normalizer: Callable
    sufficient: Callable
    log_carrier: Callable
    sampler: Callable
    stat_cov: Optional[Callable] = None
    support: Optional[np.ndarray] = None
    domain: Optional[tuple] = None

    def log_density(self, theta, x):
        theta = np.asarray(theta, dtype=float)
        return self.sufficient(x) @ theta - self.log_normalizer(theta) + self.log_carrier(x)

    def parametric_family(self) -> ParametricFamily:
        return ParametricFamily(
            self.dim, self.log_density,
            lambda th, x: self.sufficient(x) - self.grad_log_normalizer(np.asarray(th, float)),
            self.sampler, support=self.support, domain=self.domain,
            fisher=lambda th: self.hess_log_normalizer(np.asarray(th, float)), name=self.name)

    def bregman(self, theta, eps) -> float:
        """R(P^theta || P^{theta + eps}) via the log-normalizer."""
        theta = np.asarray(theta, dtype=float)
        eps = np.asarray(eps, dtype=float)
        return float(self.log_normalizer(theta + eps) - self.log_normalizer(theta)
                     - eps @ self.grad_log_normalizer(theta))


def gaussian_expfam() -> ExpFamily:
    """Normal law with t(x) = (x, x^2) and theta = (m / s2, -1 / (2 s2))."""

    def F(th):
        return -th[0] ** 2 / (4.0 * th[1]) - 0.5 * math.log(-2.0 * th[1]) + 0.5 * math.log(2 * math.pi)

    def dF(th):
        return np.array([-th[0] / (2.0 * th[1]), th[0] ** 2 / (4.0 * th[1] ** 2) - 0.5 / th[1]])

    def d2F(th):
        a, b = th
        return np.array([[-0.5 / b, a / (2.0 * b ** 2)],
                         [a / (2.0 * b ** 2), -a ** 2 / (2.0 * b ** 3) + 0.5 / b ** 2]])

    def moments(th):
        s2 = -0.5 / th[1]
        return th[0] * s2, s2

    def cov(th):
        m, s2 = moments(th)
        return np.array([[s2, 2.0 * m * s2], [2.0 * m * s2, 2.0 * s2 ** 2 + 4.0 * m ** 2 * s2]])

    def t(x):
        x = _first(x)
        return np.stack([x, x * x], axis=-1)

    def sampler(th, rng, n):
        m, s2 = moments(th)
        return m + math.sqrt(s2) * stats.norm.ppf(rng.random(n))

    return ExpFamily("gaussian", 2, F, dF, d2F, t, lambda x: np.zeros(np.shape(_first(x))),
                     sampler, cov, domain=(-np.inf, np.inf))


def poisson_expfam() -> ExpFamily:
    """Poisson law with t(x) = x and theta = log(rate)."""

    def F(th):
        return math.exp(th[0])

    def t(x):
        return _first(x)[..., None]

    def sampler(th, rng, n):
        return stats.poisson.ppf(rng.random(n), math.exp(th[0])).astype(float)

    return ExpFamily("poisson", 1, F, lambda th: np.array([math.exp(th[0])]),
                     lambda th: np.array([[math.exp(th[0])]]), t,
                     lambda x: -special.gammaln(_first(x) + 1.0), sampler,
                     lambda th: np.array([[math.exp(th[0])]]),
                     support=np.arange(200, dtype=float))


def bernoulli_expfam() -> ExpFamily:
    """Bernoulli law with t(x) = x and theta = logit(p)."""

    def F(th):
        return float(np.logaddexp(0.0, th[0]))

    def p(th):
        return float(special.expit(th[0]))

    def t(x):
        return _first(x)[..., None]

    def sampler(th, rng, n):
        return (rng.random(n) < p(th)).astype(float)

    return ExpFamily("bernoulli", 1, F, lambda th: np.array([p(th)]),
                     lambda th: np.array([[p(th) * (1.0 - p(th))]]), t,
                     lambda x: np.zeros(np.shape(_first(x))), sampler,
                     lambda th: np.array([[p(th) * (1.0 - p(th))]]),
                     support=np.array([0.0, 1.0]))


@dataclass(frozen=True)
class ExpFamReference:
    theta: np.ndarray
    index: np.ndarray
    covariance: np.ndarray
    fim: np.ndarray
    bound: np.ndarray
    equality: np.ndarray


def expfam_reference(fam: ExpFamily, theta) -> ExpFamReference:
    """Sensitivities of E[t_k] to theta_l, Cov(t), Fisher matrix and their bounds.

    The sensitivity matrix and the Fisher matrix are the Hessian of the
    log-normalizer; the covariance comes from the family's moment formula when
    one is given.
    """
    theta = np.asarray(theta, dtype=float)
    hess = np.asarray(fam.hess_log_normalizer(theta), dtype=float)
    if hess.shape != (fam.dim, fam.dim):
        raise ValueError("Hessian unavailable or misshaped")
    cov = hess if fam.stat_cov is None else np.asarray(fam.stat_cov(theta), dtype=float)
    diag = np.diag(hess)
    if np.any(diag < 0):
        raise ValueError("Hessian diagonal must be nonnegative")
    bound = np.sqrt(np.outer(diag, diag))
    np.fill_diagonal(bound, diag)
    return ExpFamReference(theta, hess.copy(), cov, hess.copy(), bound, np.eye(fam.dim, dtype=bool))


# ---------------------------------------------------------------------------
# small discrete-time chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStateChain:
    """P = [[1 - a, a], [b, 1 - b]] with parameters ``(a, b)``."""

    a: float = 0.1
    b: float = 0.2

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise ValueError("a and b must lie in (0, 1)")

    @property
    def theta(self):
        return np.array([self.a, self.b])

    @property
    def matrix(self):
        return np.array([[1 - self.a, self.a], [self.b, 1 - self.b]])

    def dtmc(self) -> DTMCSpec:
        a, b = self.a, self.b
        g = np.zeros((2, 2, 2))
        g[0, 0, 0], g[0, 1, 0] = -1.0 / (1 - a), 1.0 / a
        g[1, 0, 1], g[1, 1, 1] = 1.0 / b, -1.0 / (1 - b)
        pi = np.array([b, a]) / (a + b)
        return DTMCSpec(self.matrix, self.theta, g, values=[0.0, 1.0], initial=pi,
                        slowest_rate=a + b)

    def stationary_family(self) -> ParametricFamily:
        def pi1(th):
            return th[0] / (th[0] + th[1])

        def dpi1(th):
            s = (th[0] + th[1]) ** 2
            return np.array([th[1] / s, -th[0] / s])

        def log_density(th, x):
            x = _first(x)
            p = pi1(th)
            return np.where(x > 0.5, math.log(p), math.log(1 - p))

        def grad(th, x):
            x = _first(x)
            p = pi1(th)
            return (np.where(x > 0.5, 1.0 / p, -1.0 / (1 - p)))[:, None] * dpi1(th)[None, :]

        def sampler(th, rng, n):
            return (rng.random(n) < pi1(th)).astype(float)

        def fisher(th):
            p, d = pi1(th), dpi1(th)
            return np.outer(d, d) / (p * (1 - p))

        return ParametricFamily(2, log_density, grad, sampler, support=np.array([0.0, 1.0]),
                                fisher=fisher, name="two_state_stationary")


@dataclass(frozen=True)
class FixedChain:
    """Chain whose kernel does not depend on its single nominal parameter."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))

    @property
    def theta(self):
        return np.zeros(1)

    def dtmc(self) -> DTMCSpec:
        p = np.asarray(self.matrix, dtype=float)
        n = p.shape[0]
        spec = DTMCSpec(p, self.theta, np.zeros((n, n, 1)))
        try:
            init = spec.stationary()
        except ValueError:
            init = np.full(n, 1.0 / n)
        return DTMCSpec(p, self.theta, np.zeros((n, n, 1)), initial=init)

    def stationary_family(self) -> ParametricFamily:
        spec = self.dtmc()
        pi = spec.initial
        cum = np.cumsum(pi)

        def log_density(th, x):
            return np.log(pi[np.asarray(_first(x), dtype=int)])

        def grad(th, x):
            return np.zeros((np.shape(_first(x))[0], 1))

        def sampler(th, rng, n):
            return np.minimum(np.searchsorted(cum, rng.random(n) * cum[-1], side="right"),
                              pi.size - 1).astype(float)

        return ParametricFamily(1, log_density, grad, sampler,
                                support=np.arange(pi.size, dtype=float),
                                fisher=lambda th: np.zeros((1, 1)), name="fixed_chain")
