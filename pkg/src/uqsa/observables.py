"""Registered observables addressed by name from the command line.

Observables act on state values with a trailing state-dimension axis and
return one scalar per state, so they apply equally to samples ``(n, d)`` and
path arrays ``(n_paths, n_times, d)``.  One-dimensional inputs are treated
as scalar states.
"""

from __future__ import annotations

import re

import numpy as np

NAMES = ("mean", "second_central", "indicator_gt:<threshold>")
_INDICATOR = re.compile(r"^indicator_gt:(.+)$")


def _first(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] if x.ndim >= 2 else x


def make_observable(name: str, center: float = 0.0):
    """Return ``f(x)`` for a registered name.

    ``second_central`` is centered at ``center``, normally the analytic
    stationary mean of the model at the nominal parameters.
    """
    if name == "mean":
        return _first
    if name == "second_central":
        c = float(center)
        return lambda x: (_first(x) - c) ** 2
    m = _INDICATOR.match(name)
    if m:
        try:
            thr = float(m.group(1))
        except ValueError:
            raise ValueError(f"bad indicator threshold in {name!r}") from None
        if not np.isfinite(thr):
            raise ValueError("indicator threshold must be finite")
        return lambda x: (_first(x) > thr).astype(float)
    raise ValueError(f"unknown observable {name!r}; expected one of {', '.join(NAMES)}")
