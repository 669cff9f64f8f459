"""Bridge from validated configs to zoo models, samplers and estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import path_info as pi
from . import zoo
from .config import ModelConfig
from .processes import CTMCSpec, DTMCSpec, EulerChain, SDESpec
from .rng import streams
from .simulate import PathEnsemble, SimConfig, acf_estimate, euler_maruyama, simulate_dtmc, ssa
from .static_sensitivity import FisherMatrix, ParametricFamily, fim_monte_carlo

EXPFAMS = {"gaussian": zoo.gaussian_expfam, "poisson": zoo.poisson_expfam,
           "bernoulli": zoo.bernoulli_expfam}


@dataclass(frozen=True)
class Model:
    kind: str
    names: tuple
    theta: np.ndarray
    family: ParametricFamily
    center: float
    chain: Optional[object] = None      # DTMCSpec or CTMCSpec
    sde: Optional[SDESpec] = None
    euler: bool = False
    sim: Optional[dict] = None

    @property
    def dim(self):
        return self.theta.size

    @property
    def has_paths(self):
        return self.chain is not None or self.sde is not None


def build_model(cfg: ModelConfig) -> Model:
    p, sim = cfg.params, cfg.sim
    if cfg.kind == "ctmc":
        m = zoo.BirthDeath(p["k1"], p["k2"])
        return Model("ctmc", ("k1", "k2"), m.theta, m.stationary_family(), m.mean,
                     chain=m.ctmc(p.get("n_max")), sim=sim)
    if cfg.kind == "dtmc":
        m = zoo.TwoStateChain(p["a"], p["b"]) if "matrix" not in p else zoo.FixedChain(
            np.asarray(p["matrix"], dtype=float))
        chain = m.dtmc()
        names = ("a", "b") if "matrix" not in p else ("theta",)
        center = float(chain.stationary() @ chain.values[:, 0])
        return Model("dtmc", names, m.theta, m.stationary_family(), center, chain=chain, sim=sim)
    if cfg.kind == "sde":
        m = zoo.OUModel(p["alpha"], p["beta"], p["gamma"])
        return Model("sde", ("alpha", "beta", "gamma"), m.theta, m.stationary_family(), m.beta,
                     sde=m.sde(), euler=bool(p.get("euler", False)), sim=sim)
    if cfg.kind == "lognormal":
        m = zoo.LogNormalDecay(p["u0"], p["mu"], p["sigma"], p["threshold"], p["t"])
        center = m.u0 * math.exp(-m.mu * m.t + 0.5 * m.scale ** 2)
        return Model("lognormal", ("mu", "sigma"), np.array([m.mu, m.sigma]), m.family(),
                     center, sim=sim)
    if cfg.kind == "expfam":
        fam = EXPFAMS[p["family"]]()
        theta = np.asarray(p["theta"], dtype=float)
        if theta.size != fam.dim:
            raise ValueError(f"{fam.name} needs {fam.dim} natural parameters")
        if fam.name == "gaussian" and not theta[1] < 0:
            raise ValueError("second gaussian natural parameter must be negative")
        center = float(fam.grad_log_normalizer(theta)[0])
        return Model("expfam", tuple(f"theta{i + 1}" for i in range(fam.dim)), theta,
                     fam.parametric_family(), center, sim=sim)
    raise ValueError(f"unknown model type {cfg.kind!r}")


def parse_direction(text: str, dim: int) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise ValueError(f"direction {text!r} is not a comma-separated list of numbers") from None
    if v.size != dim:
        raise ValueError(f"direction needs {dim} components, got {v.size}")
    if not np.all(np.isfinite(v)) or not np.any(v):
        raise ValueError("direction must be a nonzero finite vector")
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# static quantities
# ---------------------------------------------------------------------------


def static_moments(model: Model, f):
    """Exact mean and variance of ``f`` under the static law when tractable."""
    fam, th = model.family, model.theta
    if fam.support is not None:
        x = np.asarray(fam.support, dtype=float)
        w = np.exp(np.asarray(fam.log_density(th, x), dtype=float))
        fx = np.asarray(f(x), dtype=float)
        m = float(w @ fx)
        return m, float(max(w @ (fx - m) ** 2, 0.0))
    if fam.domain is not None:
        def moment(k, shift=0.0):
            def g(x):
                xx = np.array([x])
                return math.exp(float(fam.log_density(th, xx)[0])) * (float(f(xx)[0]) - shift) ** k
            return integrate.quad(g, fam.domain[0], fam.domain[1], epsabs=1e-13, epsrel=1e-11,
                                  limit=400)[0]
        m = moment(1)
        return float(m), float(max(moment(2, m), 0.0))
    raise ValueError("no exact moments for this family")


def static_fim(model: Model) -> FisherMatrix:
    if model.family.fisher is None:
        raise ValueError("no closed-form Fisher matrix for this family")
    return FisherMatrix(model.family.fisher(model.theta))


def static_fim_mc(model: Model, n: int, seed: int, threads=None) -> FisherMatrix:
    return fim_monte_carlo(model.family, model.theta, n, seed,
                           workers=model.sim["workers"], threads=threads)


# ---------------------------------------------------------------------------
# path quantities
# ---------------------------------------------------------------------------


def _require_paths(model: Model):
    if not model.has_paths:
        raise ValueError(f"model type {model.kind!r} has no path dynamics")


def sim_config(model: Model, seed: int, threads=None, n_paths=None) -> SimConfig:
    s = model.sim
    return SimConfig(n_paths=int(n_paths or s["n_paths"]), horizon=float(s["horizon"]),
                     dt=float(s["dt"]), burn_in=s["burn_in"], seed=seed,
                     workers=int(s["workers"]), threads=threads)


def simulate_model(model: Model, cfg: SimConfig) -> PathEnsemble:
    _require_paths(model)
    if isinstance(model.chain, CTMCSpec):
        return ssa(model.chain, cfg)
    if isinstance(model.chain, DTMCSpec):
        return simulate_dtmc(model.chain, cfg)
    return euler_maruyama(model.sde, cfg)


def euler_chain(model: Model) -> EulerChain:
    return EulerChain(model.sde, float(model.sim["dt"]))


def path_fim_mc(model: Model, n: int, seed: int, threads=None) -> FisherMatrix:
    """Monte Carlo path FIM: ergodic averages for chains, stationary samples for diffusions."""
    _require_paths(model)
    workers = model.sim["workers"]
    if model.chain is not None:
        ens = simulate_model(model, sim_config(model, seed, threads, n_paths=n))
        if isinstance(model.chain, CTMCSpec):
            return pi.pfim_ctmc(model.chain, ensemble=ens)
        return pi.pfim_dtmc(model.chain, ensemble=ens)
    if model.euler:
        return pi.pfim_dtmc(euler_chain(model), n_samples=n, seed=seed, workers=workers,
                            threads=threads)
    x = model.sde.sample_stationary(streams(seed, 1)[0], n)
    return pi.pfim_sde(model.sde, x)


def path_fim_best(model: Model, seed: int, threads=None, n: int = 200_000) -> FisherMatrix:
    """Exact path FIM for finite chains, Monte Carlo for diffusions."""
    _require_paths(model)
    if isinstance(model.chain, CTMCSpec):
        return pi.pfim_ctmc(model.chain)
    if isinstance(model.chain, DTMCSpec):
        return pi.pfim_dtmc(model.chain)
    return path_fim_mc(model, n, seed, threads)


def iat_best(model: Model, f, seed: int, threads=None):
    """Infinite-time IAT of ``f`` and its standard error (0 when exact)."""
    _require_paths(model)
    if model.chain is not None:
        vals = f(model.chain.values)
        if isinstance(model.chain, CTMCSpec):
            return pi.iat_exact_ctmc(model.chain, vals), 0.0
        return pi.iat_exact_dtmc(model.chain, vals), 0.0
    ens = simulate_model(model, sim_config(model, seed, threads))
    return iat_from_ensemble(model, ens, f)


def iat_from_ensemble(model: Model, ens: PathEnsemble, f, grid_dt=None):
    dt = ens.meta.get("dt", grid_dt)
    length = ens.states.shape[1] if ens.kind == "grid" else int(ens.horizon / grid_dt) + 1
    rate = (model.chain.slowest_rate if model.chain is not None else model.sde.slowest_rate) or 1.0
    step = dt if ens.kind == "grid" else grid_dt
    max_lag = min(length - 1, int(math.ceil(20.0 / (rate * step))))
    acf = acf_estimate(ens, f, max_lag, grid_dt=None if ens.kind == "grid" else grid_dt)
    est = pi.iat_infinite(acf)
    return est.value, est.stderr, acf
