"""Least-squares rate fits over an h sequence: control classification and
forward Agmon decay rates."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyAnnulus, UnderflowFloor
from ._grid import GridView, band_indicator, region_integral

CONTROL_HOLDS = "control_holds"
CONTROL_FAILS = "control_fails_exponential"
MARGINAL = "subexponential_marginal"

# exponential rates below this are indistinguishable from polynomial decay
GAMMA_MIN = 0.01
# |h log mass| below this counts as "already at 0"
PROXY_ZERO = 0.02
TAIL = 3


@dataclass(frozen=True)
class FitReport:
    """Polynomial and exponential fits of positive values over h.

    ``model`` names the better-fitting model; ``fitted_exponent`` is N for
    ``value ~ C h^N`` or gamma for ``value ~ C exp(-gamma / h)``.
    """

    pairs: tuple
    model: str
    fitted_exponent: float
    residual: float
    classification: str
    N: float
    gamma: float
    residual_polynomial: float
    residual_exponential: float
    liminf_proxy: float
    proxy_trend: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return {
            "pairs": [list(p) for p in self.pairs], "model": self.model,
            "fitted_exponent": self.fitted_exponent, "residual": self.residual,
            "classification": self.classification, "N": self.N, "gamma": self.gamma,
            "residual_polynomial": self.residual_polynomial,
            "residual_exponential": self.residual_exponential,
            "liminf_proxy": self.liminf_proxy, "proxy_trend": list(self.proxy_trend),
            **self.meta,
        }


def _linfit(x, y):
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    r = float(res[0]) if len(res) else float(np.sum((np.polyval(coef, x) - y) ** 2))
    return float(coef[0]), float(coef[1]), r


def classify(hs, values, gamma_min=GAMMA_MIN, proxy_zero=PROXY_ZERO):
    """Fit both models to ``(h, value)`` and classify the sequence.

    ``control_holds`` needs the exponential model to fit worse than the
    polynomial one (or to predict no decay, gamma <= gamma_min) and the
    liminf proxy ``h log value`` over the smallest h to approach 0.
    ``control_fails_exponential`` needs the exponential model to fit better
    with gamma > gamma_min and the proxy to stay below ``-proxy_zero``.
    """
    hs = np.asarray(hs, dtype=float)
    vals = np.asarray(values, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least 3 h values")
    if np.any(vals <= 0):
        raise ValueError("values must be positive")
    order = np.argsort(-hs)
    hs, vals = hs[order], vals[order]
    lv = np.log(vals)
    N, _, rp = _linfit(np.log(hs), lv)
    slope, _, re = _linfit(1.0 / hs, lv)
    gamma = -slope
    proxy = hs[-TAIL:] * lv[-TAIL:]
    liminf = float(proxy.min())
    toward_zero = abs(proxy[-1]) <= proxy_zero or abs(proxy[-1]) < abs(proxy[0])
    exp_better = re < rp
    if exp_better and gamma > gamma_min and liminf < -proxy_zero:
        cls = CONTROL_FAILS
    elif (not exp_better or gamma <= gamma_min) and toward_zero:
        cls = CONTROL_HOLDS
    else:
        cls = MARGINAL
    model = "exponential" if exp_better else "polynomial"
    return FitReport(
        pairs=tuple((float(a), float(b)) for a, b in zip(hs, vals)),
        model=model,
        fitted_exponent=gamma if exp_better else N,
        residual=min(re, rp),
        classification=cls,
        N=N, gamma=gamma, residual_polynomial=rp, residual_exponential=re,
        liminf_proxy=liminf, proxy_trend=tuple(float(p) for p in proxy),
    )


def annulus_mass(ep, E, eps):
    """Mass of ``{E - eps/2 <= V <= E}`` in the problem measure."""
    view = GridView(ep)
    g = band_indicator(view.V, E - eps / 2.0, E)
    if not np.any(g >= 0):
        raise EmptyAnnulus(f"no grid node with {E - eps / 2:g} <= V <= {E:g}")
    return region_integral(view.coord, view.mass_density, g)


def control_fit(eigenpairs, eps, E=0.0, **kw):
    """Classify the control condition from the annulus masses."""
    eigenpairs = list(eigenpairs)
    hs = [ep.h for ep in eigenpairs]
    masses = [annulus_mass(ep, E, eps) for ep in eigenpairs]
    rep = classify(hs, masses, **kw)
    meta = {"eps": float(eps), "E": float(E),
            "lambdas": [float(ep.lam) for ep in sorted(eigenpairs, key=lambda e: -e.h)],
            "modes": [ep.m for ep in sorted(eigenpairs, key=lambda e: -e.h)]}
    return FitReport(**{**rep.__dict__, "meta": meta})


# ------------------------------------------------------------ forward rates

TOL_FIT = 0.15
# absolute allowance so probes at the caustic (d_E = 0) can pass
ABS_TOL = 0.01
TINY = 1e-300


@dataclass(frozen=True)
class RateReport:
    probe: float
    rate: float
    intercept: float
    d_E: float
    excess: float
    log_abs_u: tuple
    within_tol: bool
    above_floor: bool


def _log_abs_at(view, x):
    c, u = view.coord, view.u
    k = int(np.searchsorted(c, x))
    if k < c.size and c[k] == x:
        return math.log(abs(u[k])) if u[k] != 0 else -math.inf
    if k == 0 or k >= c.size:
        raise ValueError(f"probe {x} outside the grid")
    a, b = abs(u[k - 1]), abs(u[k])
    if a < TINY or b < TINY:
        return -math.inf
    t = (x - c[k - 1]) / (c[k] - c[k - 1])
    # log-linear interpolation is exact for exponential tails
    return (1 - t) * math.log(a) + t * math.log(b)


def fit_rate(hs, log_abs):
    """Slope and intercept of ``-log|u|`` against ``1/h``."""
    slope, icpt, _ = _linfit(1.0 / np.asarray(hs), -np.asarray(log_abs))
    return slope, icpt


def forward_agmon_fit(eigenpairs, dE, probes, tol_fit=TOL_FIT, floor_tol=None, abs_tol=ABS_TOL):
    """Per-probe decay rate ``rate(x)`` from ``-log|u_h(x)| ~ rate / h``.

    ``within_tol`` checks ``|rate - d_E(x)| <= tol_fit * d_E(x) + abs_tol``;
    ``above_floor`` checks ``rate >= d_E - floor_tol`` (default
    ``tol_fit * d_E + abs_tol``). Probes whose samples hit the floating-point floor are
    dropped with an UnderflowFloor warning.
    """
    eigenpairs = sorted(eigenpairs, key=lambda e: -e.h)
    views = [GridView(ep) for ep in eigenpairs]
    hs = [v.h for v in views]
    out = []
    for x in np.atleast_1d(probes):
        x = float(x)
        logs = [_log_abs_at(v, x) for v in views]
        if not all(math.isfinite(v) for v in logs):
            warnings.warn(f"eigenfunction underflows at probe {x:g}; probe dropped", UnderflowFloor)
            continue
        rate, icpt = fit_rate(hs, logs)
        d = dE.at(x)
        ftol = tol_fit * d + abs_tol if floor_tol is None else floor_tol
        out.append(RateReport(x, rate, icpt, d, rate - d, tuple(float(v) for v in logs),
                              bool(abs(rate - d) <= tol_fit * d + abs_tol),
                              bool(rate >= d - ftol)))
    return out
