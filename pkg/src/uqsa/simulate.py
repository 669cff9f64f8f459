"""Seeded samplers for finite chains, jump processes and diffusions.

All samplers are vectorized across the paths handled by one worker; see
:mod:`uqsa.rng` for how work and random streams are split across workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .processes import CTMCSpec, DTMCSpec, SDESpec
from .rng import run_chunks


class SimulationError(ArithmeticError):
    """Raised when a trajectory blows up or rates exceed the guard."""


RATE_GUARD = 1e12


@dataclass(frozen=True)
class SimConfig:
    """Ensemble settings.

    ``horizon`` and ``burn_in`` are in time units for jump processes and
    diffusions and in steps for discrete chains.  ``burn_in=None`` selects
    ``10 / slowest_rate`` when the spec declares its slowest relaxation rate.
    """

    n_paths: int
    horizon: float
    dt: Optional[float] = None
    burn_in: Optional[float] = None
    seed: int = 0
    workers: int = 1
    threads: Optional[int] = None

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.burn_in is not None and not self.burn_in >= 0:
            raise ValueError("burn_in must be nonnegative")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")


def _burn_in(cfg, spec):
    if cfg.burn_in is not None:
        return float(cfg.burn_in)
    rate = getattr(spec, "slowest_rate", None)
    return 10.0 / rate if rate else 0.0


@dataclass
class PathEnsemble:
    """Simulated paths.

    ``kind='grid'``: ``times`` is a shared 1-d grid and ``states`` an array of
    shape ``(n_paths, n_times, ...)``.  ``kind='jump'``: ``times`` and
    ``states`` are lists of per-path event arrays starting at ``t = 0``; each
    path holds its last state until ``horizon``.  For finite-state processes
    ``states`` hold state indices and ``labels`` maps them to values.
    """

    kind: str
    times: object
    states: object
    horizon: float
    labels: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return len(self.states)

    def values(self, states):
        states = np.asarray(states)
        if self.labels is None:
            return states
        return self.labels[states]

    def observe(self, f, states=None):
        return np.asarray(f(self.values(self.states if states is None else states)), dtype=float)

    def on_grid(self, dt):
        """States sampled at ``0, dt, 2 dt, ...`` up to the horizon."""
        if self.kind == "grid":
            step = self.meta.get("dt", 1.0)
            stride = int(round(dt / step))
            if stride < 1 or abs(stride * step - dt) > 1e-9 * dt:
                raise ValueError("grid spacing must be a multiple of the simulation step")
            return self.times[::stride], self.states[:, ::stride]
        n = int(math.floor(self.horizon / dt + 1e-9)) + 1
        grid = np.arange(n) * dt
        out = np.empty((self.n_paths, n), dtype=self.states[0].dtype)
        for i, (t, s) in enumerate(zip(self.times, self.states)):
            out[i] = s[np.searchsorted(t, grid, side="right") - 1]
        return grid, out

    def time_averages(self, g, by_index=False):
        """Per-path ergodic average of ``g`` applied to state values.

        ``g`` may return arrays with trailing dimensions (for example score
        outer products); the leading axis of the result indexes paths.  With
        ``by_index`` the argument is a table indexed by state index instead.
        """
        if by_index:
            table = np.asarray(g, dtype=float)
            evaluate = lambda s: table[np.asarray(s, dtype=np.int64)]
        else:
            evaluate = lambda s: np.asarray(g(self.values(s)), dtype=float)
        if self.kind == "grid":
            return evaluate(self.states[:, :-1]).mean(axis=1)
        out = []
        for t, s in zip(self.times, self.states):
            hold = np.diff(np.append(t, self.horizon))
            vals = evaluate(s)
            out.append(np.tensordot(hold, vals, axes=(0, 0)) / self.horizon)
        return np.array(out)

    def rows(self):
        """Yield ``(path_id, t, state_values)`` records."""
        if self.kind == "grid":
            for i in range(self.n_paths):
                vals = np.atleast_2d(self.values(self.states[i]).reshape(len(self.times), -1))
                for t, v in zip(self.times, vals):
                    yield i, float(t), v
        else:
            for i, (t, s) in enumerate(zip(self.times, self.states)):
                vals = self.values(s).reshape(len(t), -1)
                for tt, v in zip(t, vals):
                    yield i, float(tt), v


def _initial_indices(spec, rng, n):
    if spec.initial is None:
        return np.zeros(n, dtype=np.int64)
    cum = np.cumsum(spec.initial)
    return np.minimum(np.searchsorted(cum, rng.random(n) * cum[-1], side="right"),
                      spec.n_states - 1)


def _categorical(cum_rows, u):
    # cum_rows: (n, m) cumulative weights; u: (n,) uniforms on [0, 1)
    return (u[:, None] * cum_rows[:, -1:] < cum_rows).argmax(axis=1)


def simulate_dtmc(spec: DTMCSpec, cfg: SimConfig) -> PathEnsemble:
    """Paths X_0, ..., X_T of a finite chain (``horizon`` = T steps)."""
    n_steps = int(round(cfg.horizon))
    burn = int(round(_burn_in(cfg, spec)))
    cum = np.cumsum(spec.matrix, axis=1)

    def job(rng, n, _):
        x = _initial_indices(spec, rng, n)
        for _ in range(burn):
            x = _categorical(cum[x], rng.random(n))
        out = np.empty((n, n_steps + 1), dtype=np.int64)
        out[:, 0] = x
        for k in range(1, n_steps + 1):
            x = _categorical(cum[x], rng.random(n))
            out[:, k] = x
        return out

    parts = run_chunks(job, cfg.n_paths, cfg.seed, cfg.workers, cfg.threads)
    return PathEnsemble("grid", np.arange(n_steps + 1, dtype=float), np.concatenate(parts),
                        float(n_steps), spec.values,
                        {"sampler": "dtmc", "dt": 1.0, "seed": cfg.seed,
                         "workers": cfg.workers, "theta": spec.theta.tolist()})


def ssa(spec: CTMCSpec, cfg: SimConfig) -> PathEnsemble:
    """Gillespie direct method for a finite-state jump process."""
    lam = spec.exit_rates
    if np.any(lam > RATE_GUARD):
        raise SimulationError(f"exit rate exceeds {RATE_GUARD:g}")
    cum = np.cumsum(spec.rates, axis=1)
    burn = _burn_in(cfg, spec)
    t_end = burn + float(cfg.horizon)

    def job(rng, n, _):
        x = _initial_indices(spec, rng, n)
        t = np.zeros(n)
        ev_path = [np.arange(n)]
        ev_t = [t.copy()]
        ev_x = [x.copy()]
        active = np.flatnonzero(lam[x] > 0)
        while active.size:
            hold = rng.exponential(size=active.size) / lam[x[active]]
            t_new = t[active] + hold
            u = rng.random(active.size)
            go = t_new <= t_end
            active, t_new, u = active[go], t_new[go], u[go]
            if not active.size:
                break
            x_new = _categorical(cum[x[active]], u)
            t[active] = t_new
            x[active] = x_new
            ev_path.append(active)
            ev_t.append(t_new)
            ev_x.append(x_new)
            active = active[lam[x_new] > 0]
        order = np.argsort(np.concatenate(ev_path), kind="stable")
        pid = np.concatenate(ev_path)[order]
        tt = np.concatenate(ev_t)[order]
        xx = np.concatenate(ev_x)[order]
        bounds = np.searchsorted(pid, np.arange(n + 1))
        times, states = [], []
        for i in range(n):
            ti, xi = tt[bounds[i]:bounds[i + 1]], xx[bounds[i]:bounds[i + 1]]
            if burn > 0:
                k = np.searchsorted(ti, burn, side="right") - 1
                ti = np.concatenate([[burn], ti[k + 1:]]) - burn
                xi = xi[k:]
            times.append(ti)
            states.append(xi)
        return times, states

    parts = run_chunks(job, cfg.n_paths, cfg.seed, cfg.workers, cfg.threads)
    times = [t for p in parts for t in p[0]]
    states = [s for p in parts for s in p[1]]
    return PathEnsemble("jump", times, states, float(cfg.horizon), spec.values,
                        {"sampler": "ssa", "seed": cfg.seed, "workers": cfg.workers,
                         "theta": spec.theta.tolist(), "burn_in": burn})


def euler_maruyama(spec: SDESpec, cfg: SimConfig, x0=None) -> PathEnsemble:
    """X_{n+1} = X_n + a(X_n) dt + sigma(X_n) sqrt(dt) xi_n.

    Paths start from the stationary sampler when one is declared, else from
    ``x0`` (default zero).
    """
    if cfg.dt is None:
        raise ValueError("dt is required for diffusions")
    dt = float(cfg.dt)
    n_steps = int(round(cfg.horizon / dt))
    burn = int(round(_burn_in(cfg, spec) / dt))
    d = spec.dim
    sq = math.sqrt(dt)
    const_sigma = None if callable(spec.diffusion) else np.asarray(spec.diffusion)

    def job(rng, n, _):
        if x0 is not None:
            x = np.broadcast_to(np.asarray(x0, dtype=float).reshape(1, d), (n, d)).copy()
        elif spec.stationary_sampler is not None:
            x = spec.sample_stationary(rng, n)
        else:
            x = np.zeros((n, d))
        out = np.empty((n, n_steps + 1, d))
        for k in range(burn + n_steps):
            if k == burn:
                out[:, 0] = x
            xi = rng.standard_normal((n, d))
            if const_sigma is not None:
                noise = xi @ const_sigma.T
            else:
                noise = np.einsum("nij,nj->ni", spec.sigma(x), xi)
            x = x + spec.drift(x) * dt + noise * sq
            if not np.all(np.isfinite(x)):
                raise SimulationError("non-finite state in Euler-Maruyama step")
            if k >= burn:
                out[:, k - burn + 1] = x
        if burn + n_steps == burn:
            out[:, 0] = x
        return out

    parts = run_chunks(job, cfg.n_paths, cfg.seed, cfg.workers, cfg.threads)
    return PathEnsemble("grid", np.arange(n_steps + 1) * dt, np.concatenate(parts),
                        n_steps * dt, None,
                        {"sampler": "euler_maruyama", "dt": dt, "seed": cfg.seed,
                         "workers": cfg.workers, "theta": spec.theta.tolist()})


# ---------------------------------------------------------------------------
# autocovariance estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ACF:
    """Pooled autocovariance A(k) at lags ``0..max_lag`` spaced by ``dt``."""

    values: np.ndarray
    stderr: np.ndarray
    dt: float
    per_path: Optional[np.ndarray] = None
    nonstationary: bool = False

    @property
    def lags(self):
        return np.arange(self.values.size)


def _autocov_sums(z, max_lag):
    n = z.shape[1]
    size = 1 << int(np.ceil(np.log2(2 * n)))
    fz = np.fft.rfft(z, size, axis=1)
    return np.fft.irfft(fz * np.conj(fz), size, axis=1)[:, :max_lag + 1]


def acf_estimate(ens: PathEnsemble, f, max_lag: int, grid_dt: Optional[float] = None) -> ACF:
    """Cross-path pooled autocovariance of ``f`` along an ensemble.

    The pooled mean is removed and lag ``k`` sums are divided by the number of
    pairs, so lag 0 equals the (biased) sample variance.  Jump ensembles are
    first sampled on a grid of spacing ``grid_dt``.
    """
    if ens.kind == "jump":
        if grid_dt is None:
            raise ValueError("grid_dt is required for jump ensembles")
        _, states = ens.on_grid(grid_dt)
        dt = grid_dt
    elif grid_dt is not None:
        _, states = ens.on_grid(grid_dt)
        dt = grid_dt
    else:
        states = ens.states
        dt = ens.meta.get("dt", 1.0)
    g = np.asarray(f(ens.values(states)), dtype=float)
    if g.ndim != 2:
        raise ValueError("observable must map each state to a scalar")
    n_paths, length = g.shape
    if max_lag >= length:
        raise ValueError(f"max_lag {max_lag} must be below the segment length {length}")
    z = g - g.mean()
    sums = _autocov_sums(z, max_lag)
    pairs = length - np.arange(max_lag + 1)
    values = sums.sum(axis=0) / (n_paths * pairs)
    per_path = sums / pairs
    stderr = (per_path.std(axis=0, ddof=1) / math.sqrt(n_paths)
              if n_paths > 1 else np.full(max_lag + 1, np.nan))

    half = length // 2
    drift = g[:, half:].mean(axis=1) - g[:, :half].mean(axis=1)
    flagged = False
    if n_paths > 1 and drift.std(ddof=1) > 0:
        zscore = abs(drift.mean()) / (drift.std(ddof=1) / math.sqrt(n_paths))
        if zscore > 4.0:
            flagged = True
            warnings.warn(f"ensemble mean drifts between halves (z={zscore:.1f})",
                          RuntimeWarning, stacklevel=2)
    return ACF(values, stderr, float(dt), per_path, flagged)
