"""Path-space information for stationary Markov processes.

Relative entropy rates, path Fisher information, integrated autocorrelation
times and the path-space analogues of the goal-oriented and sensitivity
bounds.  Finite-state quantities are computed by exact summation over the
stationary law; ensemble arguments switch to ergodic averages.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .divergence import AnalyticCGF, CGFHandle, GoalDivergence, check_representation, xi_bounds
from .processes import CTMCSpec, DTMCSpec, EulerChain, SDESpec, check_invertible
from .rng import run_chunks
from .simulate import ACF, PathEnsemble
from .static_sensitivity import Estimate, FisherMatrix, unit

__all__ = [
    "DTMCSpec", "CTMCSpec", "SDESpec", "EulerChain", "PathEnsemble",
    "rer_dtmc", "path_relent_dtmc", "pfim_dtmc", "rer_ctmc", "rer_ctmc_lform", "pfim_ctmc",
    "path_fim_transient", "rer_sde", "pfim_sde", "iat_finite", "iat_infinite", "iat_batch",
    "iat_exact_dtmc", "iat_exact_ctmc",
    "path_xi_bounds", "pf_eigen_cgf", "PerronFrobeniusCGF", "xi_infinite",
    "path_sens_bound_stationary", "path_sens_bound_transient", "path_sens_bound_infinite",
    "path_sens_bound_uniform", "cramer_rao_path",
]


def _kl_rows(q, p):
    """Row-wise KL(q[x] || p[x]); +inf where absolute continuity fails."""
    out = np.zeros(q.shape[0])
    for x in range(q.shape[0]):
        pos = q[x] > 0
        if np.any(p[x, pos] == 0):
            out[x] = math.inf
        else:
            out[x] = np.sum(q[x, pos] * np.log(q[x, pos] / p[x, pos]))
    return np.maximum(out, 0.0)


def _weighted(weights, terms):
    pos = weights > 0
    if np.any(np.isinf(terms[pos])):
        return math.inf
    return float(weights[pos] @ terms[pos])


def _mean_se(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(samples.shape[1:], np.nan)
    return samples.mean(axis=0), se


# ---------------------------------------------------------------------------
# discrete time
# ---------------------------------------------------------------------------


def rer_dtmc(q, p, nu=None, samples=None) -> float:
    """Relative entropy rate sum_x nu(x) KL(q(x, .) || p(x, .)).

    ``q`` and ``p`` are finite :class:`DTMCSpec` or :class:`EulerChain`.  For
    Euler chains ``samples`` are draws from the stationary law of ``q``.
    """
    if isinstance(q, EulerChain):
        if samples is None:
            raise ValueError("stationary samples are required for continuous-state chains")
        return float(max(np.mean(q.kernel_relent(p, samples)), 0.0))
    if q.n_states != p.n_states:
        raise ValueError("chains have different state spaces")
    nu = q.stationary() if nu is None else np.asarray(nu, dtype=float)
    return max(_weighted(nu, _kl_rows(q.matrix, p.matrix)), 0.0)


def path_relent_dtmc(q: DTMCSpec, p: DTMCSpec, nu, mu, T: int) -> float:
    """R(Q_[0,T] || P_[0,T]) = T * RER + R(nu || mu) with nu stationary for q."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    pos = nu > 0
    if np.any(mu[pos] == 0):
        return math.inf
    init = float(np.sum(nu[pos] * np.log(nu[pos] / mu[pos])))
    return T * rer_dtmc(q, p, nu) + init


def pfim_dtmc(spec, n_samples: Optional[int] = None, seed: int = 0, ensemble=None,
              workers: int = 1, threads=None) -> FisherMatrix:
    """Path Fisher information of a chain.

    Finite chains: exact ``E_mu[sum_y p grad log p grad log p^T]`` (or the
    ergodic average along ``ensemble``).  Euler chains: Monte Carlo over
    stationary ``x`` and one kernel step ``y``, divided by ``dt`` so the result
    is a rate per unit time.
    """
    if isinstance(spec, EulerChain):
        if n_samples is None or n_samples < 2:
            raise ValueError("n_samples >= 2 is required for Euler chains")

        def job(rng, n, _):
            x = spec.sample_stationary(rng, n)
            y = spec.step(x, rng)
            g = spec.grad_log_kernel(x, y)
            return g[:, :, None] * g[:, None, :]

        outer = np.concatenate(run_chunks(job, n_samples, seed, workers, threads))
        mean, se = _mean_se(outer)
        return FisherMatrix(0.5 * (mean + mean.T) / spec.dt, "path_euler", se / spec.dt)

    if spec.grad_log is None:
        raise ValueError("transition log-gradients are required")
    g = spec.grad_log
    local = np.einsum("xy,xyi,xyj->xij", spec.matrix, g, g)
    if ensemble is not None:
        mean, se = _mean_se(_path_avg(ensemble, local))
        return FisherMatrix(0.5 * (mean + mean.T), "path", se)
    mu = spec.stationary()
    return FisherMatrix(np.einsum("x,xij->ij", mu, local), "path")


def _path_avg(ens: PathEnsemble, per_state):
    return ens.time_averages(per_state, by_index=True)


# ---------------------------------------------------------------------------
# continuous time, finite state
# ---------------------------------------------------------------------------


def _ctmc_terms(q: CTMCSpec, p: CTMCSpec):
    if q.n_states != p.n_states:
        raise ValueError("processes have different state spaces")
    cq, cp = q.rates, p.rates
    terms = np.zeros(q.n_states)
    for x in range(q.n_states):
        pos = cq[x] > 0
        if np.any(cp[x, pos] == 0):
            terms[x] = math.inf
            continue
        terms[x] = (np.sum(cq[x, pos] * np.log(cq[x, pos] / cp[x, pos]))
                    - (cq[x].sum() - cp[x].sum()))
    return terms


def _ctmc_lform_terms(q: CTMCSpec, p: CTMCSpec):
    cq, cp = q.rates, p.rates
    terms = np.zeros(q.n_states)
    for x in range(q.n_states):
        if np.any((cq[x] > 0) & (cp[x] == 0)):
            terms[x] = math.inf
            continue
        pos = cp[x] > 0
        delta = cq[x, pos] / cp[x, pos] - 1.0
        # l(z) = z log z - z + 1 written in terms of z - 1 to keep precision
        ell = np.where(delta > -1.0, (1.0 + delta) * np.log1p(np.maximum(delta, -1.0 + 1e-300))
                       - delta, 1.0)
        terms[x] = np.sum(cp[x, pos] * ell)
    return terms


def rer_ctmc(q: CTMCSpec, p: CTMCSpec, mu=None, ensemble: Optional[PathEnsemble] = None):
    """Relative entropy rate of jump process ``q`` wrt ``p``.

    ``sum_x mu(x) [sum_x' c_q log(c_q / c_p) - (lambda_q(x) - lambda_p(x))]``
    with ``mu`` stationary for ``q``.  With ``ensemble`` (paths of ``q``) the
    stationary sum is replaced by time averages and an :class:`Estimate` is
    returned.
    """
    terms = _ctmc_terms(q, p)
    if ensemble is not None:
        if np.any(np.isinf(terms)):
            return Estimate(math.inf, 0.0)
        mean, se = _mean_se(_path_avg(ensemble, terms))
        return Estimate(float(mean), float(se))
    mu = q.stationary() if mu is None else np.asarray(mu, dtype=float)
    return max(_weighted(mu, terms), 0.0)


def rer_ctmc_lform(q: CTMCSpec, p: CTMCSpec, mu=None) -> float:
    """Same rate written as ``sum mu c_p l(c_q / c_p)``, ``l(z) = z log z - z + 1``."""
    if q.n_states != p.n_states:
        raise ValueError("processes have different state spaces")
    mu = q.stationary() if mu is None else np.asarray(mu, dtype=float)
    return _weighted(mu, _ctmc_lform_terms(q, p))


def _ctmc_local_fim(spec: CTMCSpec):
    if spec.grad_log is None:
        raise ValueError("rate log-gradients are required")
    g = spec.grad_log
    return np.einsum("xy,xyi,xyj->xij", spec.rates, g, g)


def pfim_ctmc(spec: CTMCSpec, mu=None, ensemble: Optional[PathEnsemble] = None) -> FisherMatrix:
    """Path Fisher information ``E_mu[sum_x' c grad log c grad log c^T]``."""
    local = _ctmc_local_fim(spec)
    if ensemble is not None:
        mean, se = _mean_se(_path_avg(ensemble, local))
        return FisherMatrix(0.5 * (mean + mean.T), "path", se)
    mu = spec.stationary() if mu is None else np.asarray(mu, dtype=float)
    return FisherMatrix(np.einsum("x,xij->ij", mu, local), "path")


def path_fim_transient(spec: CTMCSpec, ensemble: PathEnsemble) -> FisherMatrix:
    """Fisher information of the path law on [0, T] (initial law held fixed).

    Each path's score is the sum of jump log-rate gradients minus the time
    integral of ``sum_x' grad c(x, x')``; the result is the mean outer product
    and is *not* divided by ``T``.
    """
    if spec.grad_log is None:
        raise ValueError("rate log-gradients are required")
    comp = np.einsum("xy,xyi->xi", spec.rates, spec.grad_log)
    scores = []
    for t, s in zip(ensemble.times, ensemble.states):
        s = np.asarray(s, dtype=np.int64)
        hold = np.diff(np.append(t, ensemble.horizon))
        jumps = spec.grad_log[s[:-1], s[1:]].sum(axis=0)
        scores.append(jumps - hold @ comp[s])
    scores = np.array(scores)
    outer = scores[:, :, None] * scores[:, None, :]
    mean, se = _mean_se(outer)
    return FisherMatrix(0.5 * (mean + mean.T), "path", se)


# ---------------------------------------------------------------------------
# diffusions
# ---------------------------------------------------------------------------


def _expect(values, weights):
    values = np.asarray(values, dtype=float)
    if weights is None:
        return values.mean(axis=0)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w / w.sum(), values, axes=(0, 0))


def rer_sde(q: SDESpec, p: SDESpec, samples, weights=None) -> float:
    """``E_nu[0.5 |a - b|^2_{Sigma^-1}]`` over stationary samples of ``q``.

    Returns ``inf`` when the diffusion coefficients differ, since the two path
    laws are then mutually singular.
    """
    x = q.as_points(samples)
    cq, cp = q.covariance(x), p.covariance(x)
    if not np.allclose(cq, cp, rtol=1e-13, atol=0.0):
        return math.inf
    check_invertible(cq)
    u = q.drift(x) - p.drift(x)
    quad = np.einsum("ni,ni->n", u, np.linalg.solve(cq, u[..., None])[..., 0])
    return float(0.5 * _expect(quad, weights))


def pfim_sde(spec: SDESpec, samples, weights=None) -> FisherMatrix:
    """``E[(grad a)^T Sigma^-1 (grad a)]``; diffusion parameters are flagged infinite."""
    if spec.grad_drift is None:
        raise ValueError("drift gradient is required")
    x = spec.as_points(samples)
    cov = spec.covariance(x)
    check_invertible(cov)
    ga = np.asarray(spec.grad_drift(x), dtype=float)
    local = np.einsum("nik,nil->nkl", ga, np.linalg.solve(cov, ga))
    mean = _expect(local, weights)
    se = None
    if weights is None and x.shape[0] > 1:
        se = local.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    m = 0.5 * (mean + mean.T)
    for j in spec.diffusion_params:
        m[j, :] = 0.0
        m[:, j] = 0.0
        m[j, j] = math.inf
    return FisherMatrix(m, "path", se)


# ---------------------------------------------------------------------------
# integrated autocorrelation time
# ---------------------------------------------------------------------------


def _acf_values(acf):
    if isinstance(acf, ACF):
        return acf.values, acf.dt
    return np.asarray(acf, dtype=float), None


def _cutoff(values):
    neg = np.flatnonzero(values[1:] < 0)
    return values.size if neg.size == 0 else int(neg[0]) + 1


def iat_finite(acf, T: int, dt: Optional[float] = None, truncate: bool = True) -> float:
    """``dt * (A(0) + 2 sum_{k=1}^{T} (1 - k/T) A(k))``.

    ``acf`` holds autocovariances at lags ``0, 1, ...`` (or is an
    :class:`ACF`).  With ``truncate`` the sum stops before the first negative
    lag.
    """
    values, acf_dt = _acf_values(acf)
    step = dt if dt is not None else (acf_dt if acf_dt is not None else 1.0)
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    if values.size < T:
        raise ValueError(f"T={T} exceeds the {values.size} available lags")
    stop = T
    if truncate:
        stop = min(stop, _cutoff(values))
    k = np.arange(1, stop)
    return float(step * (values[0] + 2.0 * np.sum((1.0 - k / T) * values[1:stop])))


def iat_infinite(acf, dt: Optional[float] = None, truncate: bool = True) -> Estimate:
    """``dt * (A(0) + 2 sum_{k>=1} A(k))`` with initial-positive-sequence truncation.

    For a continuous-time process sampled at spacing ``dt`` this is the
    trapezoid rule for the integral of the autocovariance over the real line.
    The standard error uses the per-path autocovariances of an :class:`ACF`
    with the same cutoff.
    """
    values, acf_dt = _acf_values(acf)
    step = dt if dt is not None else (acf_dt if acf_dt is not None else 1.0)
    stop = _cutoff(values) if truncate else values.size
    tau = step * (values[0] + 2.0 * values[1:stop].sum())
    se = math.nan
    if isinstance(acf, ACF) and acf.per_path is not None and acf.per_path.shape[0] > 1:
        pp = acf.per_path
        per = step * (pp[:, 0] + 2.0 * pp[:, 1:stop].sum(axis=1))
        se = float(per.std(ddof=1) / math.sqrt(pp.shape[0]))
    return Estimate(float(tau), se)


def iat_batch(time_averages, T: float) -> Estimate:
    """``T * Var(F_T)`` from independent per-path time averages."""
    fa = np.asarray(time_averages, dtype=float)
    n = fa.size
    if n < 2:
        raise ValueError("need at least two paths")
    v = fa.var(ddof=1)
    return Estimate(float(T * v), float(T * v * math.sqrt(2.0 / (n - 1))))


def _centered(values, pi):
    f = np.asarray(values, dtype=float).reshape(-1)
    if f.size != pi.size:
        raise ValueError("observable must give one value per state")
    return f - pi @ f


def iat_exact_dtmc(spec: DTMCSpec, f_values) -> float:
    """Per-step IAT of a finite ergodic chain from its fundamental matrix."""
    pi = spec.stationary()
    f = _centered(f_values, pi)
    n = spec.n_states
    g = np.linalg.solve(np.eye(n) - spec.matrix + np.outer(np.ones(n), pi), f)
    return float(pi @ (f * (2.0 * g - f)))


def iat_exact_ctmc(spec: CTMCSpec, f_values) -> float:
    """``2 int_0^inf A(t) dt`` for a finite jump process via the Poisson equation."""
    pi = spec.stationary()
    f = _centered(f_values, pi)
    n = spec.n_states
    g = np.linalg.solve(np.outer(np.ones(n), pi) - spec.generator(), f)
    return float(2.0 * pi @ (f * g))


# ---------------------------------------------------------------------------
# goal-oriented bounds on path space
# ---------------------------------------------------------------------------


class _ScaledCGF(CGFHandle):
    """c -> L(c T) / T for the CGF L of a time average."""

    def __init__(self, h: CGFHandle, T: float):
        self._h, self._T = h, float(T)
        self.mean = h.mean
        self.domain = (h.domain[0] / self._T, h.domain[1] / self._T)
        self.phi_sup = None if h.phi_sup is None else h.phi_sup / self._T
        self.upper_gap, self.lower_gap = h.upper_gap, h.lower_gap

    def cgf(self, c):
        return self._h.cgf(c * self._T) / self._T

    def dcgf(self, c):
        return self._h.dcgf(c * self._T)

    def d2cgf(self, c):
        d2 = self._h.d2cgf(c * self._T)
        return None if d2 is None else d2 * self._T

    def phi(self, c):
        return self._h.phi(c * self._T) / self._T

    def mirrored(self):
        return _ScaledCGF(self._h.mirrored(), self._T)


def path_xi_bounds(h: CGFHandle, T: float, path_relent: Optional[float] = None, *,
                   rer: Optional[float] = None, initial_relent: float = 0.0) -> GoalDivergence:
    """Goal-oriented bounds for a time-averaged observable on [0, T].

    ``h`` is the CGF of the time average ``F`` under ``P``; the bound uses the
    scaled CGF ``c -> log E exp(c T (F - E F)) / T`` with budget
    ``path_relent / T`` or, for stationary processes, ``rer + initial_relent / T``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if path_relent is not None and rer is not None:
        raise ValueError("give either path_relent or rer, not both")
    if path_relent is None:
        if rer is None:
            raise ValueError("give path_relent or rer")
        rho2 = rer + initial_relent / T
    else:
        rho2 = path_relent / T
    return xi_bounds(_ScaledCGF(h, T), rho2)


def _check_irreducible(p):
    n_comp, _ = connected_components(p > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise ValueError("transition matrix is reducible")


def _pf_vectors(m, tol=1e-12, max_iter=100000):
    """Perron root with right and left eigenvectors by shifted power iteration."""
    n = m.shape[0]
    shifted = m + np.eye(n)
    r = np.full(n, 1.0 / n)
    l = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        r_new = shifted @ r
        l_new = l @ shifted
        lam_new = r_new.sum() / r.sum()
        r_new /= r_new.sum()
        l_new /= l_new.sum()
        done = (np.abs(r_new - r).max() <= tol and np.abs(l_new - l).max() <= tol
                and abs(lam_new - lam) <= tol * lam_new)
        r, l, lam = r_new, l_new, lam_new
        if done:
            # two-sided Rayleigh quotient: error is the product of the vector errors
            return float(l @ m @ r / (l @ r)), r, l
    raise ArithmeticError("power iteration stagnated")


def pf_eigen_cgf(P, f, c: float) -> float:
    """``log lambda(P diag(exp(c f)))``, the limiting scaled CGF of ergodic averages."""
    P = np.asarray(P, dtype=float)
    _check_irreducible(P)
    f = np.asarray(f, dtype=float)
    lam, _, _ = _pf_vectors(P * np.exp(c * (f - f.max() if c > 0 else f - f.min()))[None, :])
    shift = c * (f.max() if c > 0 else f.min())
    return float(math.log(lam) + shift)


def _phi_limit(P, f):
    # c L'(c) - L(c) tends to -log rho(P restricted to argmax f)
    top = np.flatnonzero(f >= f.max())
    rho = float(np.max(np.abs(np.linalg.eigvals(P[np.ix_(top, top)]))))
    return -math.log(rho) if rho > 0 else math.inf


class PerronFrobeniusCGF(AnalyticCGF):
    """Centered limiting CGF ``log lambda(c) - c E_pi f`` of a finite chain."""

    def __init__(self, P, f):
        P = np.asarray(P, dtype=float)
        _check_irreducible(P)
        self.P = P
        self.f = np.asarray(f, dtype=float)
        pi = DTMCSpec(P).stationary()
        mean = float(pi @ self.f)
        super().__init__(self._cgf_c, self._dcgf_c, mean=mean,
                         phi_sup=_phi_limit(P, self.f), phi_sup_minus=_phi_limit(P, -self.f),
                         upper_gap=float(self.f.max()) - mean, lower_gap=float(self.f.min()) - mean)

    def _tilted(self, c):
        top = self.f.max() if c > 0 else self.f.min()
        m = self.P * np.exp(c * (self.f - top))[None, :]
        lam, r, l = _pf_vectors(m)
        return lam, r, l, top

    def _cgf_c(self, c):
        lam, _, _, top = self._tilted(c)
        return math.log(lam) + c * (top - self.mean)

    def _dcgf_c(self, c):
        _, r, l, _ = self._tilted(c)
        w = l * r
        return float(w @ self.f / w.sum()) - self.mean

    def mirrored(self):
        return PerronFrobeniusCGF(self.P, -self.f)


def xi_infinite(h: CGFHandle, rer: float) -> GoalDivergence:
    """Infinite-time goal-oriented bounds from a limiting CGF and an entropy rate.

    The optimizer result is cross-checked against a plain bisection of the
    representation ``L'(phi^{-1}(rer))``.
    """
    gd = xi_bounds(h, rer)
    check_representation(h, gd)
    return gd


# ---------------------------------------------------------------------------
# path sensitivity bounds
# ---------------------------------------------------------------------------


def _root_product(a, b):
    if a == 0 or b == 0:
        return 0.0
    return float(math.sqrt(a) * math.sqrt(b))


def path_sens_bound_stationary(tau_T: float, F_path: FisherMatrix, F_mu: FisherMatrix,
                               T: float, v) -> float:
    """``sqrt(tau_T) sqrt(v^T (F_path + F_mu / T) v)`` for a stationary start."""
    if not tau_T >= 0:
        raise ValueError("variance term must be nonnegative")
    if not T > 0:
        raise ValueError("T must be positive")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.any(v):
        return 0.0
    v = unit(v)
    return _root_product(tau_T, F_path.quad(v) + F_mu.quad(v) / T)


def path_sens_bound_transient(tau_T: float, F_T: FisherMatrix, T: float, v) -> float:
    """``sqrt(tau_T) sqrt(v^T F(P_[0,T]) v / T)`` with the finite-horizon path FIM."""
    if not tau_T >= 0:
        raise ValueError("variance term must be nonnegative")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.any(v):
        return 0.0
    return _root_product(tau_T, F_T.quad(unit(v)) / T)


def path_sens_bound_infinite(tau: float, F_path: FisherMatrix, v) -> float:
    if not tau >= 0:
        raise ValueError("IAT must be nonnegative")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.any(v):
        return 0.0
    return _root_product(tau, F_path.quad(unit(v)))


def path_sens_bound_uniform(C: float, F_path: FisherMatrix, v) -> float:
    if not C >= 0:
        raise ValueError("C must be nonnegative")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if C == 0 or not np.any(v):
        return 0.0
    q = F_path.quad(unit(v))
    return float(C * math.sqrt(q)) if q > 0 else 0.0


def cramer_rao_path(psi_prime: float, F_path: float) -> float:
    """Lower bound ``psi'^2 / F`` on the IAT of an estimator with mean derivative psi'."""
    if not F_path > 0:
        raise ValueError("Fisher information must be positive")
    return float(psi_prime ** 2 / F_path)
