"""Divergences between probability measures and goal-oriented error bounds.

For an observable ``f`` and two measures ``Q`` and ``P`` the weak error
``E_Q[f] - E_P[f]`` is bracketed by ``xi_minus <= gap <= xi_plus`` where

    xi_plus = inf_{c > 0} (L(c) + rho2) / c,

``L`` is the cumulant generating function of ``f - E_P[f]`` under ``P`` and
``rho2 = R(Q || P)``.  The infimum is attained at the root ``c*`` of
``phi(c) = c L'(c) - L(c) = rho2`` and then ``xi_plus = L'(c*)``.  The lower
bound is obtained by running the same problem on ``-f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize


class SolverError(ArithmeticError):
    """Raised when a scalar solve fails to converge or loses monotonicity."""


# ---------------------------------------------------------------------------
# discrete measures and classical divergences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDist:
    """Probability vector on a finite, labelled support."""

    probs: np.ndarray
    support: Optional[Sequence] = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d vector")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("probs must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probs sum to {probs.sum()!r}, not 1")
        support = tuple(range(probs.size)) if self.support is None else tuple(self.support)
        if len(support) != probs.size:
            raise ValueError("support and probs have different lengths")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "support", support)

    def values(self, f) -> np.ndarray:
        """Observable evaluated on the support (callable or precomputed array)."""
        if callable(f):
            return np.array([f(x) for x in self.support], dtype=float)
        vals = np.asarray(f, dtype=float)
        if vals.shape != self.probs.shape:
            raise ValueError("observable values do not match the support")
        return vals

    def expect(self, f) -> float:
        return float(self.probs @ self.values(f))

    def variance(self, f) -> float:
        vals = self.values(f)
        m = self.probs @ vals
        return float(self.probs @ (vals - m) ** 2)


def _aligned(q: DiscreteDist, p: DiscreteDist):
    if q.probs.size != p.probs.size:
        raise ValueError(
            f"supports have different lengths ({q.probs.size} vs {p.probs.size})"
        )
    return q.probs, p.probs


def relative_entropy(q: DiscreteDist, p: DiscreteDist) -> float:
    """R(q || p) in nats; +inf when q is not absolutely continuous wrt p."""
    qp, pp = _aligned(q, p)
    pos = qp > 0
    if np.any(pp[pos] == 0):
        return math.inf
    return float(max(np.sum(qp[pos] * np.log(qp[pos] / pp[pos])), 0.0))


def chi_squared(q: DiscreteDist, p: DiscreteDist) -> float:
    """Chi-squared divergence sum (q/p - 1)^2 p."""
    qp, pp = _aligned(q, p)
    if np.any(pp[qp > 0] == 0):
        return math.inf
    pos = pp > 0
    return float(np.sum((qp[pos] - pp[pos]) ** 2 / pp[pos]))


def total_variation(q: DiscreteDist, p: DiscreteDist) -> float:
    qp, pp = _aligned(q, p)
    return float(0.5 * np.abs(qp - pp).sum())


# ---------------------------------------------------------------------------
# cumulant generating functions
# ---------------------------------------------------------------------------


class CGFHandle:
    """Centered cumulant generating function L(c) = log E[exp(c (f - E f))].

    Subclasses provide ``cgf`` and ``dcgf``; ``d2cgf`` is optional and enables
    Newton steps in the root solver.  ``phi_sup`` is the supremum of
    ``phi(c) = c L'(c) - L(c)`` over ``c > 0`` when it is known (``None``
    otherwise) and ``upper_gap`` is ``ess sup f - E f`` for bounded ``f``.
    """

    mean: float = 0.0
    domain: tuple = (-math.inf, math.inf)
    phi_sup: Optional[float] = None
    upper_gap: Optional[float] = None
    lower_gap: Optional[float] = None

    def cgf(self, c: float) -> float:
        raise NotImplementedError

    def dcgf(self, c: float) -> float:
        raise NotImplementedError

    def d2cgf(self, c: float) -> Optional[float]:
        return None

    def phi(self, c: float) -> float:
        return c * self.dcgf(c) - self.cgf(c)

    def mirrored(self) -> "CGFHandle":
        """Handle of the CGF of ``-f``."""
        raise NotImplementedError


class EmpiricalCGF(CGFHandle):
    """CGF of a finitely supported (weighted) sample.

    With ``weights`` the handle is exact for the discrete law that puts mass
    ``weights[i]`` on ``samples[i]``; without them the samples are equally
    weighted.
    """

    def __init__(self, samples, weights=None):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if weights is None:
            w = np.full(x.size, 1.0 / x.size)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape != x.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite, nonnegative and match samples")
            if w.sum() <= 0:
                raise ValueError("weights sum to zero")
            keep = w > 0
            x, w = x[keep], w[keep] / w[keep].sum()
        self.samples = x
        self.weights = w
        if x.max() == x.min():
            self.mean = float(x[0])
        else:
            self.mean = float(w @ x)
        self._y = x - self.mean
        self._logw = np.log(w)
        self._ymax = float(self._y.max())
        self._ymin = float(self._y.min())
        top_mass = float(w[x == x.max()].sum())
        self.phi_sup = -math.log(top_mass) if top_mass < 1.0 else 0.0
        self.upper_gap = self._ymax
        self.lower_gap = self._ymin

    def _tilt(self, c):
        # shift by the extreme value so every exponent is <= 0
        top = self._ymax if c >= 0 else self._ymin
        b = c * (self._y - top)
        a = b + self._logw
        m = a.max()
        log_z = m + math.log(np.exp(a - m).sum())
        pi = np.exp(a - log_z)
        return top, b, log_z, pi

    def cgf(self, c):
        c = float(c)
        if c == 0.0:
            return 0.0
        top, _, log_z, _ = self._tilt(c)
        return log_z + c * top

    def dcgf(self, c):
        _, _, _, pi = self._tilt(float(c))
        return float(pi @ self._y)

    def d2cgf(self, c):
        _, _, _, pi = self._tilt(float(c))
        d = pi @ self._y
        return float(pi @ (self._y - d) ** 2)

    def phi(self, c):
        c = float(c)
        if c == 0.0:
            return 0.0
        # relative entropy of the tilted law wrt the base law
        _, b, log_z, pi = self._tilt(c)
        return max(float(pi @ (b - log_z)), 0.0)

    def mirrored(self):
        return EmpiricalCGF(-self.samples, self.weights)


class AnalyticCGF(CGFHandle):
    """CGF given by closed-form callables on an open domain.

    Evaluations outside ``domain`` return ``inf`` (overflow sentinel).
    ``phi_sup`` applies to ``c > 0`` and ``phi_sup_minus`` to ``c < 0``.
    """

    def __init__(self, cgf: Callable, dcgf: Callable, d2cgf: Optional[Callable] = None,
                 domain=(-math.inf, math.inf), mean=0.0, phi_sup=None, phi_sup_minus=None,
                 upper_gap=None, lower_gap=None):
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < 0.0 < hi:
            raise ValueError("domain must contain 0 in its interior")
        self._cgf, self._dcgf, self._d2cgf = cgf, dcgf, d2cgf
        self.domain = (lo, hi)
        self.mean = float(mean)
        self.phi_sup = phi_sup
        self.phi_sup_minus = phi_sup_minus
        self.upper_gap = upper_gap
        self.lower_gap = lower_gap

    def _inside(self, c):
        return self.domain[0] < c < self.domain[1]

    def cgf(self, c):
        c = float(c)
        if c == 0.0:
            return 0.0
        if not self._inside(c):
            return math.inf
        return float(self._cgf(c))

    def dcgf(self, c):
        c = float(c)
        if not self._inside(c):
            return math.inf if c > 0 else -math.inf
        return float(self._dcgf(c))

    def d2cgf(self, c):
        if self._d2cgf is None or not self._inside(float(c)):
            return None
        return float(self._d2cgf(float(c)))

    def phi(self, c):
        c = float(c)
        if c == 0.0:
            return 0.0
        if not self._inside(c):
            return math.inf
        return c * float(self._dcgf(c)) - float(self._cgf(c))

    def mirrored(self):
        d2 = None if self._d2cgf is None else (lambda c: self._d2cgf(-c))
        return AnalyticCGF(
            lambda c: self._cgf(-c),
            lambda c: -self._dcgf(-c),
            d2,
            domain=(-self.domain[1], -self.domain[0]),
            mean=-self.mean,
            phi_sup=self.phi_sup_minus,
            phi_sup_minus=self.phi_sup,
            upper_gap=None if self.lower_gap is None else -self.lower_gap,
            lower_gap=None if self.upper_gap is None else -self.upper_gap,
        )

    @classmethod
    def gaussian(cls, sigma: float, mean: float = 0.0) -> "AnalyticCGF":
        """CGF c^2 sigma^2 / 2 of a normal observable."""
        s2 = float(sigma) ** 2
        if not s2 >= 0:
            raise ValueError("sigma must be real")
        return cls(lambda c: 0.5 * c * c * s2, lambda c: c * s2, lambda c: s2,
                   mean=mean, phi_sup=math.inf, phi_sup_minus=math.inf)


def centered_cgf(h: CGFHandle, c: float) -> float:
    return h.cgf(c)


# ---------------------------------------------------------------------------
# the scalar problem phi(c) = rho2
# ---------------------------------------------------------------------------

_BRACKET_START = 1e-3
_MAX_GROWTH = 4000


def _solve(h: CGFHandle, rho2: float, xtol: float, max_iter: int):
    """Return (c_star, saturated, last_c) for phi(c) = rho2 on c > 0."""
    if not rho2 >= 0.0:
        raise ValueError(f"rho2 must be nonnegative, got {rho2!r}")
    if rho2 == 0.0:
        return 0.0, False, 0.0
    if h.phi_sup is not None and rho2 >= h.phi_sup:
        return None, True, math.inf

    c_max = h.domain[1]
    # start on the natural scale 1 / sd of the observable so phi(hi) is O(_BRACKET_START^2)
    start = _BRACKET_START
    d2 = h.d2cgf(0.0)
    if d2 is not None and math.isfinite(d2) and d2 > 0.0:
        start = _BRACKET_START / math.sqrt(d2)
    hi = min(start, 0.5 * c_max)
    phi_hi = h.phi(hi)
    if not math.isfinite(phi_hi):
        raise SolverError("non-finite CGF at the initial bracket")
    lo, phi_lo = 0.0, 0.0

    for _ in range(_MAX_GROWTH):
        if phi_hi >= rho2:
            break
        nxt = 2.0 * hi if 2.0 * hi < c_max else 0.5 * (hi + c_max)
        if not nxt > hi:
            return None, True, hi
        phi_nxt = h.phi(nxt)
        if not math.isfinite(phi_nxt):
            # the true domain ends before nxt
            c_max = nxt
            continue
        if phi_nxt < phi_hi - 1e-9 * max(1.0, abs(phi_hi)):
            raise SolverError(f"phi decreased on [{hi}, {nxt}]")
        if hi > 1.0 / start and phi_hi > 0.0 and phi_nxt - phi_hi <= 1e-14 * phi_hi:
            # phi has flattened out below rho2: bounded observable
            return None, True, nxt
        lo, phi_lo, hi, phi_hi = hi, phi_hi, nxt, phi_nxt
    else:
        raise SolverError("could not bracket the root")

    if phi_hi == rho2:
        return hi, False, hi

    c = lo + (hi - lo) * (rho2 - phi_lo) / (phi_hi - phi_lo)
    if not lo < c < hi:
        c = 0.5 * (lo + hi)
    mono_tol = 1e-12 * max(1.0, rho2)
    for _ in range(max_iter):
        phi_c = h.phi(c)
        if not (phi_lo - mono_tol <= phi_c <= phi_hi + mono_tol):
            raise SolverError(f"phi is not increasing on the bracket [{lo}, {hi}]")
        r = phi_c - rho2
        if r > 0:
            hi, phi_hi = c, phi_c
        else:
            lo, phi_lo = c, phi_c
        if abs(r) <= 1e-15 * max(1.0, rho2) or hi - lo <= xtol * max(start, c):
            break
        nxt = None
        d2 = h.d2cgf(c)
        if d2 is not None and d2 > 0.0:
            newton = c - r / (c * d2)
            if lo < newton < hi:
                nxt = newton
                if abs(newton - c) <= xtol * max(start, c):
                    c = newton
                    break
        c = 0.5 * (lo + hi) if nxt is None else nxt
    else:
        raise SolverError(f"no convergence in {max_iter} iterations")

    resid = abs(h.phi(c) - rho2)
    if resid > 1e-10 * max(1.0, rho2) and hi - lo > 4 * np.spacing(max(c, 1.0)):
        raise SolverError(f"residual {resid:.3e} exceeds tolerance at c={c!r}")
    return c, False, c


def solve_c_star(h: CGFHandle, rho2: float, *, xtol: float = 1e-12, max_iter: int = 200):
    """Root ``c*`` of ``phi(c) = rho2``.

    Returns
    -------
    (c_star, saturated)
        ``c_star`` is ``None`` when ``rho2`` is at or above ``sup phi``.
    """
    c, saturated, _ = _solve(h, float(rho2), xtol, max_iter)
    return c, saturated


@dataclass(frozen=True)
class GoalDivergence:
    rho2: float
    xi_plus: float
    xi_minus: float
    c_star_plus: Optional[float]
    c_star_minus: Optional[float]
    saturated_plus: bool = False
    saturated_minus: bool = False


def _one_side(h: CGFHandle, rho2: float):
    c, saturated, last = _solve(h, rho2, 1e-12, 200)
    if c == 0.0:
        return 0.0, 0.0, False
    if saturated:
        xi = h.upper_gap if h.upper_gap is not None else h.dcgf(last)
        return max(float(xi), 0.0), None, True
    return max(h.dcgf(c), 0.0), c, False


def xi_bounds(h: CGFHandle, rho2: float) -> GoalDivergence:
    """Goal-oriented divergences (xi_plus, xi_minus) for budget ``rho2``."""
    rho2 = float(rho2)
    xp, cp, sp = _one_side(h, rho2)
    xm, cm, sm = _one_side(h.mirrored(), rho2)
    return GoalDivergence(rho2=rho2, xi_plus=xp, xi_minus=-xm, c_star_plus=cp,
                          c_star_minus=cm, saturated_plus=sp, saturated_minus=sm)


def check_representation(h: CGFHandle, gd: GoalDivergence, rtol: float = 1e-8) -> None:
    """Recompute xi by plain bisection on phi and compare.

    Raises SolverError when the two routes disagree by more than ``rtol``.
    """
    for side, handle, xi, sat in ((1, h, gd.xi_plus, gd.saturated_plus),
                                  (-1, h.mirrored(), gd.xi_minus, gd.saturated_minus)):
        if sat or gd.rho2 == 0.0:
            continue
        lo, hi = 0.0, 1.0
        while handle.phi(hi) < gd.rho2:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise SolverError("bisection check failed to bracket")
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if handle.phi(mid) < gd.rho2:
                lo = mid
            else:
                hi = mid
        ref = side * handle.dcgf(0.5 * (lo + hi))
        if abs(ref - xi) > rtol * max(abs(ref), 1e-300):
            raise SolverError(f"representation check failed: {xi!r} vs {ref!r}")


def uq_sandwich(p: DiscreteDist, q: DiscreteDist, f):
    """(xi_minus, E_q f - E_p f, xi_plus) for discrete ``p`` and ``q``."""
    rho2 = relative_entropy(q, p)
    if not math.isfinite(rho2):
        raise ValueError("q is not absolutely continuous with respect to p")
    vals = p.values(f)
    gd = xi_bounds(EmpiricalCGF(vals, p.probs), rho2)
    gap = float(q.probs @ vals - p.probs @ vals)
    return gd.xi_minus, gap, gd.xi_plus


# ---------------------------------------------------------------------------
# comparison bounds
# ---------------------------------------------------------------------------


def _nonneg(**kw):
    for name, val in kw.items():
        if not val >= 0:
            raise ValueError(f"{name} must be nonnegative, got {val!r}")


def ckp_bound(f_sup_norm: float, rho2: float) -> float:
    _nonneg(f_sup_norm=f_sup_norm, rho2=rho2)
    if f_sup_norm == 0:
        return 0.0
    return float(f_sup_norm * math.sqrt(2.0 * rho2))


def chi2_comparison_bound(var_p_f: float, chi2: float) -> float:
    _nonneg(var_p_f=var_p_f, chi2=chi2)
    if var_p_f == 0 or chi2 == 0:
        return 0.0
    return float(math.sqrt(var_p_f) * math.sqrt(chi2))


def linearized_xi(var_p_f: float, rho2: float) -> float:
    _nonneg(var_p_f=var_p_f, rho2=rho2)
    return float(math.sqrt(var_p_f) * math.sqrt(2.0 * rho2))


def legendre_transform(psi: Callable, t: float) -> float:
    """sup_{c > 0} (c t - psi(c)), located on a geometric grid then refined."""
    if t <= 0:
        return 0.0
    grid = np.geomspace(1e-8, 1e8, 161)
    vals = np.full(grid.size, -math.inf)
    for i, c in enumerate(grid):
        v = psi(c)
        if not math.isfinite(v):
            break
        vals[i] = c * t - v
    if not np.any(np.isfinite(vals)):
        raise ValueError("psi is not finite on the positive axis")
    k = int(np.argmax(vals))
    if k == grid.size - 1:
        return math.inf
    lo = grid[k - 1] if k > 0 else 0.0
    hi = grid[k + 1]
    res = optimize.minimize_scalar(lambda c: psi(c) - c * t, bounds=(lo, hi),
                                   method="bounded",
                                   options={"xatol": 1e-13 * hi, "maxiter": 500})
    return float(max(-res.fun, vals[k], 0.0))


def psi_sharp_bound(psi: Callable, rho2: float) -> float:
    """Generalized inverse of the Legendre transform of ``psi`` at ``rho2``.

    ``psi`` is a convex upper bound on a centered CGF with
    ``psi(0) = psi'(0) = 0``; the result bounds the weak error from above.
    """
    _nonneg(rho2=rho2)
    if rho2 == 0:
        return 0.0
    if not any(math.isfinite(psi(c)) for c in np.geomspace(1e-8, 1e8, 33)):
        raise ValueError("psi is not finite on the positive axis")
    hi = 1e-3
    while legendre_transform(psi, hi) < rho2:
        hi *= 2.0
        if hi > 1e300:
            raise SolverError("Legendre transform never reaches rho2")
    return float(optimize.brentq(lambda t: legendre_transform(psi, t) - rho2,
                                 0.0, hi, xtol=1e-15, rtol=1e-14, maxiter=500))
