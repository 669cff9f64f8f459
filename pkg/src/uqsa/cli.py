"""Command-line front end: JSON configs in, CSV out.

Exit codes: 0 on success, 2 for invalid input or I/O problems, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import jsonschema
import numpy as np

from . import adapters as ad
from . import divergence as dv
from . import path_info as pi
from . import tables
from .config import load_config, resolve_seed
from .csvout import render
from .observables import make_observable
from .static_sensitivity import sensitivity_bound_static, sensitivity_index_lr

EXIT_INPUT = 2
EXIT_NUMERIC = 3

DIVERGENCE_HEADER = ["rho2", "xi_plus", "xi_minus", "c_star_plus", "c_star_minus", "linearized",
                     "ckp", "chi2_bound", "saturated"]
FIM_HEADER = ["i", "j", "value", "stderr"]
SENS_HEADER = ["observable", "direction", "index_estimate", "index_stderr", "bound", "mode"]
TARGETS = ("bd-table", "ou-table", "ode-figure", "expfam")


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------------


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _gaussian_params(doc):
    m, s = float(doc["mean"]), float(doc["sigma"])
    if not (math.isfinite(m) and s > 0 and math.isfinite(s)):
        raise InputError("gaussian needs a finite mean and positive sigma")
    return m, s


def _is_gaussian(doc):
    return isinstance(doc, dict) and doc.get("family") == "gaussian"


def _discrete(doc):
    if not isinstance(doc, dict) or set(doc) - {"support", "probs"} or "probs" not in doc:
        raise InputError("distribution files hold {'support': [...], 'probs': [...]} "
                         "or {'family': 'gaussian', 'mean': m, 'sigma': s}")
    return dv.DiscreteDist(doc["probs"], doc.get("support"))


def _gaussian_divergences(q, p):
    (mq, sq), (mp, sp) = q, p
    kl = math.log(sp / sq) + (sq ** 2 + (mq - mp) ** 2) / (2 * sp ** 2) - 0.5
    d = 2 * sp ** 2 - sq ** 2
    chi2 = math.inf if d <= 0 else (sp ** 2 / (sq * math.sqrt(d))
                                    * math.exp((mq - mp) ** 2 / d) - 1.0)
    return max(kl, 0.0), max(chi2, 0.0)


def cmd_divergence(args):
    if args.p_samples and (args.p_dist or args.q_dist):
        raise InputError("use either --p-samples or --p-dist/--q-dist")
    f = make_observable(args.observable or "mean")
    chi2 = math.nan
    rho2 = args.rho2
    sup = None
    if args.p_samples:
        if rho2 is None:
            raise InputError("--rho2 is required with --p-samples")
        x = np.loadtxt(args.p_samples, delimiter=",", ndmin=1, dtype=float)
        vals = np.asarray(f(x.reshape(x.shape[0], -1) if x.ndim > 1 else x), dtype=float)
        if vals.size == 0 or not np.all(np.isfinite(vals)):
            raise InputError("samples must be finite and nonempty")
        h = dv.EmpiricalCGF(vals)
        var = float(vals.var())
        sup = float(np.abs(vals - vals.mean()).max())
    elif args.p_dist:
        pdoc = _load_json(args.p_dist)
        qdoc = _load_json(args.q_dist) if args.q_dist else None
        if _is_gaussian(pdoc):
            if args.observable not in (None, "mean"):
                raise InputError("gaussian laws support only the 'mean' observable")
            mp, sp = _gaussian_params(pdoc)
            h = dv.AnalyticCGF.gaussian(sp, mp)
            var = sp ** 2
            sup = math.inf
            if qdoc is not None:
                if not _is_gaussian(qdoc):
                    raise InputError("both laws must be gaussian")
                kl, chi2 = _gaussian_divergences(_gaussian_params(qdoc), (mp, sp))
                rho2 = kl if rho2 is None else rho2
        else:
            p = _discrete(pdoc)
            vals = p.values(f)
            h = dv.EmpiricalCGF(vals, p.probs)
            var = p.variance(f)
            sup = float(np.abs(vals - p.expect(f))[p.probs > 0].max())
            if qdoc is not None:
                q = _discrete(qdoc)
                chi2 = dv.chi_squared(q, p)
                rho2 = dv.relative_entropy(q, p) if rho2 is None else rho2
    else:
        raise InputError("one of --p-samples or --p-dist is required")
    if rho2 is None:
        raise InputError("--rho2 or --q-dist is required")
    if not rho2 >= 0 or math.isnan(rho2):
        raise InputError("rho2 must be nonnegative")

    gd = dv.xi_bounds(h, rho2)
    dv.check_representation(h, gd)
    # a saturated side has no finite optimizer; c* runs off to infinity
    c_plus = math.inf if gd.saturated_plus else gd.c_star_plus
    c_minus = math.inf if gd.saturated_minus else gd.c_star_minus
    row = [rho2, gd.xi_plus, gd.xi_minus, c_plus, c_minus,
           dv.linearized_xi(var, rho2),
           0.0 if rho2 == 0 else dv.ckp_bound(sup, rho2),
           math.nan if math.isnan(chi2) else dv.chi2_comparison_bound(var, chi2),
           gd.saturated_plus or gd.saturated_minus]
    return render(DIVERGENCE_HEADER, [row])


# ---------------------------------------------------------------------------
# fim / sens / simulate
# ---------------------------------------------------------------------------


def _model(args):
    cfg = load_config(args.model)
    model = ad.build_model(cfg)
    seed = resolve_seed(getattr(args, "seed", None), cfg.sim["seed"])
    return model, seed


def cmd_fim(args):
    model, seed = _model(args)
    if args.mode == "static":
        n = args.samples or 100_000
        fim = ad.static_fim_mc(model, n, seed, args.threads)
    else:
        n = args.samples or (model.sim["n_paths"] if model.chain is not None else 200_000)
        fim = ad.path_fim_mc(model, n, seed, args.threads)
    k = fim.dim
    rows = []
    for i in range(k):
        for j in range(k):
            se = None if fim.stderr is None else float(fim.stderr[i, j])
            if math.isinf(fim.entries[i, j]) or math.isinf(fim.entries[i, i]) \
                    or math.isinf(fim.entries[j, j]):
                se = 0.0
            rows.append([i, j, float(fim.entries[i, j]), math.nan if se is None else se])
    return render(FIM_HEADER, rows)


def cmd_sens(args):
    model, seed = _model(args)
    v = ad.parse_direction(args.direction, model.dim)
    f = make_observable(args.observable, model.center)
    n = args.samples or 100_000
    idx = sensitivity_index_lr(model.family, model.theta, v, f, n, seed)
    if args.mode == "static":
        _, var = ad.static_moments(model, f)
        bound = sensitivity_bound_static(var, ad.static_fim(model), v)
    elif args.mode == "path-inf":
        tau = ad.iat_best(model, f, seed, args.threads)[0]
        bound = pi.path_sens_bound_infinite(tau, ad.path_fim_best(model, seed, args.threads), v)
    elif args.mode == "path-T":
        ens = ad.simulate_model(model, ad.sim_config(model, seed, args.threads))
        tau_t = pi.iat_batch(ens.time_averages(f), ens.horizon).value
        bound = pi.path_sens_bound_stationary(tau_t, ad.path_fim_best(model, seed, args.threads),
                                              ad.static_fim(model), ens.horizon, v)
    else:
        raise InputError(f"unknown mode {args.mode!r}")
    direction = ";".join(format(float(c), ".17g") for c in v)
    return render(SENS_HEADER, [[args.observable, direction, idx.value, idx.stderr, bound,
                                 args.mode]])


def cmd_simulate(args):
    model, seed = _model(args)
    ens = ad.simulate_model(model, ad.sim_config(model, seed, args.threads, n_paths=args.paths))
    rows = []
    width = None
    for pid, t, vals in ens.rows():
        vals = np.atleast_1d(vals)
        width = vals.size
        rows.append([pid, t, *[float(x) for x in vals]])
    header = ["path", "time"] + [f"x{i}" for i in range(width or 1)]
    return render(header, rows)


def cmd_reproduce(args):
    seed = resolve_seed(args.seed, 0)
    kw = dict(mc=args.mc, seed=seed)
    if args.target == "bd-table":
        header, rows = tables.bd_rows(threads=args.threads, **kw)
    elif args.target == "ou-table":
        header, rows = tables.ou_rows(threads=args.threads, **kw)
    elif args.target == "ode-figure":
        header, rows = tables.ode_rows(**kw)
    else:
        header, rows = tables.expfam_rows(threads=args.threads, **kw)
    return render(header, rows)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser():
    p = _Parser(prog="uqsa", description="Goal-oriented uncertainty quantification and "
                                         "sensitivity bounds for Markov models.")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="cap on concurrent worker threads (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="JSON model config")
        sp.add_argument("--out", help="output CSV file (default stdout)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS)

    d = sub.add_parser("divergence", help="goal-oriented divergence and comparison bounds")
    d.add_argument("--p-samples", help="text/CSV file of samples from P")
    d.add_argument("--p-dist", help="JSON law of P")
    d.add_argument("--q-dist", help="JSON law of Q")
    d.add_argument("--rho2", type=float, default=None, help="relative entropy budget")
    d.add_argument("--observable", default=None)
    d.add_argument("--out")
    d.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS)

    f = sub.add_parser("fim", help="Monte Carlo Fisher information matrix")
    common(f)
    f.add_argument("--mode", choices=("static", "path"), required=True)
    f.add_argument("--samples", type=_positive_int, default=None)

    s = sub.add_parser("sens", help="sensitivity index estimate and bound")
    common(s)
    s.add_argument("--observable", required=True)
    s.add_argument("--mode", choices=("static", "path-T", "path-inf"), required=True)
    s.add_argument("--direction", required=True, help="comma-separated parameter direction")
    s.add_argument("--samples", type=_positive_int, default=None)

    r = sub.add_parser("reproduce", help="reference tables and figure data")
    r.add_argument("--target", choices=TARGETS, required=True)
    r.add_argument("--out")
    r.add_argument("--mc", action="store_true", help="add Monte Carlo columns")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS)

    m = sub.add_parser("simulate", help="simulate a path ensemble")
    common(m)
    m.add_argument("--paths", type=_positive_int, default=None)
    return p


COMMANDS = {"divergence": cmd_divergence, "fim": cmd_fim, "sens": cmd_sens,
            "reproduce": cmd_reproduce, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("uqsa: error: seed must be nonnegative", file=sys.stderr)
        return EXIT_INPUT
    try:
        text = COMMANDS[args.command](args)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"uqsa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError, jsonschema.ValidationError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else exc
        print(f"uqsa: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
