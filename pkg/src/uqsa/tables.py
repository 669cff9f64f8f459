"""Reference tables and figure data, optionally paired with Monte Carlo estimates."""

from __future__ import annotations

import math

import numpy as np

from . import path_info as pi
from . import zoo
from .observables import make_observable
from .processes import EulerChain
from .simulate import SimConfig, acf_estimate, euler_maruyama, ssa
from .static_sensitivity import fim_monte_carlo, sensitivity_index_lr

TABLE_HEADER = ["table", "quantity", "row", "col", "analytic"]
MC_HEADER = ["mc", "mc_stderr"]
FIGURE_HEADER = ["sigma", "t", "S_mu", "bound_mu", "S_sigma", "bound_sigma", "dominance"]
FIGURE_MC_HEADER = ["S_mu_mc", "S_mu_mc_stderr", "S_sigma_mc", "S_sigma_mc_stderr"]


def _bound_se(bound, var, var_se, quad, quad_se):
    """Delta-method error of sqrt(var) * sqrt(quad), ignoring cross-correlation."""
    if bound == 0 or not math.isfinite(bound):
        return 0.0
    rel = 0.0
    if var > 0:
        rel += (var_se / (2.0 * var)) ** 2
    if quad > 0 and math.isfinite(quad):
        rel += (quad_se / (2.0 * quad)) ** 2
    return float(bound * math.sqrt(rel))


def _quad_se(se, v):
    if se is None:
        return 0.0
    s = np.nan_to_num(np.asarray(se, dtype=float))
    return float(math.sqrt(np.sum(np.outer(v, v) ** 2 * s ** 2)))


def _root(a, b):
    return 0.0 if a == 0 or b == 0 else float(math.sqrt(a) * math.sqrt(b))


# ---------------------------------------------------------------------------
# birth/death
# ---------------------------------------------------------------------------


def bd_rows(k1=2.0, k2=1.0, mc=False, n_paths=1000, horizon=50.0, n_samples=100_000, seed=0,
            workers=1, threads=None, grid_dt=0.05):
    ref = zoo.bd_reference(k1, k2)
    names = ("k1", "k2")
    rows = []
    for q, mat in (("stationary_fim", ref.stationary_fim), ("path_fim", ref.path_fim)):
        for i in range(2):
            for j in range(2):
                rows.append(["table1", q, names[i], names[j], float(mat[i, j])])
    for q, d in (("variance", ref.variance), ("iat", ref.iat)):
        for f in ("f1", "f2"):
            rows.append(["table2", q, f, "", d[f]])
    for q, d in (("index", ref.index), ("static_bound", ref.static_bound),
                 ("path_bound", ref.path_bound)):
        for f in ("f1", "f2"):
            for p in names:
                rows.append(["table3", q, f, p, d[(f, p)]])
    if not mc:
        return TABLE_HEADER, rows

    model = zoo.BirthDeath(k1, k2)
    fam = model.stationary_family()
    obs = model.observables()
    sfim = fim_monte_carlo(fam, model.theta, n_samples, seed, workers, threads)
    spec = model.ctmc()
    ens = ssa(spec, SimConfig(n_paths, horizon, seed=seed, workers=workers, threads=threads))
    pfim = pi.pfim_ctmc(spec, ensemble=ens)
    est = {}
    for f, g in obs.items():
        acf = acf_estimate(ens, g, int(math.ceil(20.0 / (k2 * grid_dt))), grid_dt=grid_dt)
        tau = pi.iat_infinite(acf)
        est[("variance", f)] = (float(acf.values[0]), float(acf.stderr[0]))
        est[("iat", f)] = (tau.value, tau.stderr)
    for i in range(2):
        for j in range(2):
            est[("stationary_fim", i, j)] = (sfim.entries[i, j], sfim.stderr[i, j])
            est[("path_fim", i, j)] = (pfim.entries[i, j], pfim.stderr[i, j])
    for f, g in obs.items():
        for j, p in enumerate(names):
            v = np.eye(2)[j]
            idx = sensitivity_index_lr(fam, model.theta, v, g, n_samples, seed)
            est[("index", f, p)] = tuple(idx)
            var, var_se = est[("variance", f)]
            tau, tau_se = est[("iat", f)]
            qs, qs_se = sfim.quad(v), _quad_se(sfim.stderr, v)
            qp, qp_se = pfim.quad(v), _quad_se(pfim.stderr, v)
            b = _root(var, qs)
            est[("static_bound", f, p)] = (b, _bound_se(b, var, var_se, qs, qs_se))
            b = _root(tau, qp)
            est[("path_bound", f, p)] = (b, _bound_se(b, tau, tau_se, qp, qp_se))
    out = []
    for r in rows:
        t, q, a, b = r[:4]
        if t == "table1":
            key = (q, names.index(a), names.index(b))
        elif t == "table2":
            key = (q, a)
        else:
            key = (q, a, b)
        out.append(r + list(est[key]))
    return TABLE_HEADER + MC_HEADER, out


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck
# ---------------------------------------------------------------------------


def ou_rows(alpha=1.0, beta=0.0, gamma=1.0, dt=0.01, mc=False, n_paths=1000, horizon=50.0,
            n_samples=200_000, seed=0, workers=1, threads=None):
    ref = zoo.ou_reference(alpha, beta, gamma, dt)
    names = ("alpha", "beta", "gamma")
    rows = [["table4", "variance", "x", "", ref.variance],
            ["table4", "iat", "x", "", ref.iat],
            ["table4", "iat_euler", "x", "", ref.iat_euler]]
    for q, mat in (("stationary_fim", ref.stationary_fim), ("path_fim", ref.path_fim),
                   ("euler_fim", ref.euler_fim)):
        for i, p in enumerate(names):
            rows.append(["table5", q, p, p, float(mat[i, i])])
    for q, d in (("index", ref.index), ("static_bound", ref.static_bound),
                 ("path_bound", ref.path_bound), ("euler_bound", ref.euler_bound)):
        for p in names:
            rows.append(["table6", q, "x", p, d[p]])
    if not mc:
        return TABLE_HEADER, rows

    model = zoo.OUModel(alpha, beta, gamma)
    fam = model.stationary_family()
    sde = model.sde()
    ens = euler_maruyama(sde, SimConfig(n_paths, horizon, dt=dt, seed=seed, workers=workers,
                                        threads=threads))
    f = make_observable("mean")
    acf = acf_estimate(ens, f, int(math.ceil(20.0 / (alpha * dt))))
    tau = pi.iat_infinite(acf)
    var = (float(acf.values[0]), float(acf.stderr[0]))
    sfim = fim_monte_carlo(fam, model.theta, n_samples, seed, workers, threads)
    x = sde.sample_stationary(np.random.Generator(np.random.PCG64(seed)), n_samples)
    cfim = pi.pfim_sde(sde, x)
    efim = pi.pfim_dtmc(EulerChain(sde, dt), n_samples=n_samples, seed=seed, workers=workers,
                        threads=threads)
    est = {("variance",): var, ("iat",): (tau.value, tau.stderr),
           ("iat_euler",): (tau.value, tau.stderr)}
    fims = {"stationary_fim": sfim, "path_fim": cfim, "euler_fim": efim}
    for q, m in fims.items():
        for i, p in enumerate(names):
            se = 0.0 if m.stderr is None or math.isinf(m.entries[i, i]) else m.stderr[i, i]
            est[(q, p)] = (float(m.entries[i, i]), float(se))
    bound_src = {"static_bound": (sfim, var), "path_bound": (cfim, (tau.value, tau.stderr)),
                 "euler_bound": (efim, (tau.value, tau.stderr))}
    for i, p in enumerate(names):
        v = np.eye(3)[i]
        est[("index", p)] = tuple(sensitivity_index_lr(fam, model.theta, v, f, n_samples, seed))
        for q, (m, (a, a_se)) in bound_src.items():
            qv = m.quad(v)
            b = _root(a, qv)
            se = 0.0 if m.stderr is None else _quad_se(m.stderr, v)
            est[(q, p)] = (b, _bound_se(b, a, a_se, qv, se))
    out = []
    for r in rows:
        t, q, a, b = r[:4]
        key = (q,) if t == "table4" else (q, b)
        out.append(r + list(est[key]))
    return TABLE_HEADER + MC_HEADER, out


# ---------------------------------------------------------------------------
# log-normal decay figure
# ---------------------------------------------------------------------------


def ode_rows(mc=False, n_samples=100_000, seed=0, sigmas=(1.0, 2.0)):
    rows = []
    for r in zoo.ode_figure(sigmas=sigmas):
        sg, t, s_mu, b_mu, s_sg, b_sg = r
        rows.append([sg, t, s_mu, b_mu, s_sg, b_sg, bool(abs(s_mu) <= b_mu and abs(s_sg) <= b_sg)])
    if not mc:
        return FIGURE_HEADER, rows
    out = []
    for r in rows:
        m = zoo.LogNormalDecay(sigma=r[0], t=r[1])
        fam = m.family()
        th = np.array([m.mu, m.sigma])
        f = lambda u, thr=m.threshold: (np.asarray(u, dtype=float) > thr).astype(float)
        a = sensitivity_index_lr(fam, th, [1.0, 0.0], f, n_samples, seed)
        b = sensitivity_index_lr(fam, th, [0.0, 1.0], f, n_samples, seed)
        out.append(r + [a.value, a.stderr, b.value, b.stderr])
    return FIGURE_HEADER + FIGURE_MC_HEADER, out


# ---------------------------------------------------------------------------
# exponential families
# ---------------------------------------------------------------------------

EXPFAM_DEFAULTS = {"gaussian": (0.0, -0.5), "poisson": (math.log(2.0),), "bernoulli": (0.3,)}


def expfam_rows(mc=False, n_samples=200_000, seed=0, workers=1, threads=None):
    makers = {"gaussian": zoo.gaussian_expfam, "poisson": zoo.poisson_expfam,
              "bernoulli": zoo.bernoulli_expfam}
    rows = []
    for name, theta in EXPFAM_DEFAULTS.items():
        fam = makers[name]()
        ref = zoo.expfam_reference(fam, theta)
        pf = fam.parametric_family()
        if mc:
            rng = np.random.Generator(np.random.PCG64(seed))
            x = fam.sampler(np.asarray(theta), rng, n_samples)
            t = fam.sufficient(x)
            cov = np.cov(t, rowvar=False).reshape(fam.dim, fam.dim)
            cov_se = np.sqrt(np.var((t - t.mean(0))[:, :, None] * (t - t.mean(0))[:, None, :],
                                    axis=0, ddof=1) / n_samples)
            fim = fim_monte_carlo(pf, theta, n_samples, seed, workers, threads)
        for q, mat in (("index", ref.index), ("covariance", ref.covariance), ("fim", ref.fim),
                       ("bound", ref.bound)):
            for k in range(fam.dim):
                for l in range(fam.dim):
                    row = [name, q, f"t{k + 1}", f"theta{l + 1}", float(mat[k, l])]
                    if mc:
                        if q == "index":
                            e = sensitivity_index_lr(pf, theta, np.eye(fam.dim)[l],
                                                     lambda z, k=k: fam.sufficient(z)[:, k],
                                                     n_samples, seed)
                            row += [e.value, e.stderr]
                        elif q == "covariance":
                            row += [float(cov[k, l]), float(cov_se[k, l])]
                        elif q == "fim":
                            row += [float(fim.entries[k, l]), float(fim.stderr[k, l])]
                        else:
                            b = _root(cov[k, k], fim.entries[l, l])
                            row += [b, _bound_se(b, cov[k, k], cov_se[k, k], fim.entries[l, l],
                                                 fim.stderr[l, l])]
                    rows.append(row)
    return (TABLE_HEADER + MC_HEADER if mc else TABLE_HEADER), rows
