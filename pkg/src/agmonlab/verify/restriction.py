"""Restriction lower bounds on forbidden-region level curves.

A curve is described by its Fermi height ``y_n(theta) > 0`` over the caustic.
On an interval every caustic component contributes one point per sample; on
a surface of revolution the samples sweep the angle and the eigenfunction is
taken in its real separated form ``u(s) cos(m theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from ..core_model import tau0 as geometric_tau0
from ..errors import NotAdmissible
from .fits import _linfit
from ._grid import GridView

PASS, FAIL = "PASS", "FAIL"
TOL_RESTRICTION = 0.02
GREEN_TOL = 1e-3


@dataclass(frozen=True)
class LevelCurve:
    """Curve ``H`` in the forbidden collar with its geometric constants.

    ``E_of_H`` is the infimum of ``E' > E`` whose level ``{y_n = E' - E}``
    lies beyond H inside the collar, i.e. ``E + max_H y_n``.
    ``dE_H_max_over_Lambda`` is ``max d_E`` over that level (the constant used
    by the restriction bound), ``dE_H_max_over_H`` the max over H itself and
    ``dE_H_min`` the min over H.
    """

    level: float
    theta: np.ndarray
    y: np.ndarray
    nodes: np.ndarray  # native coordinate per (component, theta)
    E_of_H: float
    dE_H_max_over_H: float
    dE_H_max_over_Lambda: float
    dE_H_min: float
    tau0: float
    is_level: bool
    orientations: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def ceiling(self):
        """``2 tau0 d_E^H - d_E(H)``, the guaranteed exponent ceiling."""
        return 2.0 * self.tau0 * self.dE_H_max_over_Lambda - self.dE_H_min

    @property
    def floor(self):
        """``d_E(H)``, the exponent implied by the forward bound alone."""
        return self.dE_H_min

    def as_dict(self):
        return {"level": self.level, "E_of_H": self.E_of_H,
                "dE_H_max_over_H": self.dE_H_max_over_H,
                "dE_H_max_over_Lambda": self.dE_H_max_over_Lambda,
                "dE_H_min": self.dE_H_min, "tau0": self.tau0, "ceiling": self.ceiling,
                "floor": self.floor, "is_level": self.is_level,
                "y_min": float(self.y.min()), "y_max": float(self.y.max()), **self.meta}


def _coord_at(collar, y):
    """Native coordinates at Fermi height ``y`` for every caustic component,
    shape ``(n_components, len(y))``."""
    line = collar.line
    rows = []
    for c in collar.crossings:
        ell = c.ell + c.orientation * np.asarray(y, dtype=float)
        rows.append(np.interp(ell, line.ell, line.coord))
    return np.array(rows)


def _dE_at(dE, coords):
    return np.interp(coords, dE.coords[0], dE.values)


def _make_curve(collar, dE, level, theta, y, is_level):
    if np.min(y) <= 0:
        raise NotAdmissible("i", f"min y_n = {np.min(y):.4g} <= 0: H leaves the forbidden region")
    top = float(np.max(y))
    if top >= collar.r0:
        raise NotAdmissible("ii", f"max y_n = {top:.4g} >= r0 = {collar.r0:g}: no level "
                                  "caustic fits beyond H inside the collar")
    nodes = _coord_at(collar, y)
    d_H = _dE_at(dE, nodes)
    d_L = _dE_at(dE, _coord_at(collar, [top]))
    return LevelCurve(float(level), np.asarray(theta, dtype=float), np.asarray(y, dtype=float),
                      nodes, float(collar.line.E + top), float(d_H.max()), float(d_L.max()),
                      float(d_H.min()), geometric_tau0(collar), is_level,
                      tuple(c.orientation for c in collar.crossings))


def level_curve(collar, dE, c, n_theta=256):
    """``H = {y_n = c}``.

    Raises
    ------
    NotAdmissible
        Clause ``"i"`` if ``c <= 0``, clause ``"ii"`` if ``c >= r0``.
    """
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return _make_curve(collar, dE, c, theta, np.full(n_theta, float(c)), True)


def bumped_curve(collar, dE, c, a, n_theta=256):
    """``H = {y_n = c + a cos(theta)}`` on a surface of revolution."""
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return _make_curve(collar, dE, c, theta, c + a * np.cos(theta), False)


# ----------------------------------------------------------------- norms

def _log_abs_interp(coord, u, x):
    """``log|u|`` at x by log-linear interpolation (exact for exponentials)."""
    k = np.clip(np.searchsorted(coord, x), 1, coord.size - 1)
    t = (x - coord[k - 1]) / (coord[k] - coord[k - 1])
    with np.errstate(divide="ignore"):
        la, lb = np.log(np.abs(u[k - 1])), np.log(np.abs(u[k]))
    return np.where(t <= 0, la, np.where(t >= 1, lb, (1 - t) * la + t * lb))


def log_lp_norm(view, curve, p):
    """``log ||u_h||_{L^p(H)}``.

    Points of an interval carry unit weight. On a surface the arclength
    element of the metric ``f^2 (ds^2 + dtheta^2)`` weights each angular
    sample.
    """
    lu = _log_abs_interp(view.coord, view.u, curve.nodes)
    if view.angular == 1.0:
        lw = np.zeros_like(lu)
    else:
        m = view.m or 0
        with np.errstate(divide="ignore"):
            lu = lu + np.log(np.abs(np.cos(m * curve.theta)))[None, :]
        n = curve.theta.size
        dth = 2.0 * np.pi / n
        s = curve.nodes
        ds = (np.roll(s, -1, axis=1) - np.roll(s, 1, axis=1)) / 2.0
        fs = np.sqrt(np.interp(s, view.coord, view.B))
        lw = np.log(fs * np.sqrt(ds ** 2 + dth ** 2))
    if math.isinf(p):
        return float(np.max(lu))
    return float(logsumexp(p * lu + lw) / p)


# ------------------------------------------------------------- Green audit

def _d4(u, d):
    """Fourth-order central first derivative, second order at the ends."""
    du = np.gradient(u, d, edge_order=2)
    du[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * d)
    return du


def green_balance(view, curve):
    """Both sides of the Green identity on the region beyond a level curve.

    ``discrete``: the summation-by-parts form, exact for the finite-difference
    operator,

        sum_{i >= k} [h^2 (u_{i+1} - u_i)^2 / dx + dx q_i u_i^2]
            = -h^2 u_k (u_k - u_{k-1}) / dx,     q = A + B (V - lam),

    with k the first node at or beyond H, summed over caustic components.
    ``continuum``: Simpson integral of ``h^2 u'^2 + q u^2`` against
    ``h^2 d_nu u * u`` at node k, with fourth-order central differences. Relative residuals
    are returned; both sides share the angular factor, which cancels.
    """
    if not curve.is_level:
        return None
    h, lam = view.h, view.lam
    q = view.A + view.B * (view.V - lam)
    out = {"lhs": 0.0, "rhs": 0.0, "lhs_c": 0.0, "rhs_c": 0.0}
    for comp, x in enumerate(curve.nodes[:, 0]):
        c, u, qq = view.coord, view.u, q
        if curve.orientations[comp] < 0:
            c, u, qq = -c[::-1], u[::-1], qq[::-1]
            x = -x
        k = int(np.searchsorted(c, x - 1e-12 * max(1.0, abs(x))))
        d = c[1] - c[0]
        diff = np.diff(u[k - 1:])
        out["lhs"] += h * h * np.sum(diff[1:] ** 2) / d + d * np.sum(qq[k:-1] * u[k:-1] ** 2)
        out["rhs"] += -h * h * u[k] * diff[0] / d
        du = _d4(u, d)
        dens = h * h * du[k:] ** 2 + qq[k:] * u[k:] ** 2
        out["lhs_c"] += float(simpson(dens, x=c[k:]))
        out["rhs_c"] += -h * h * du[k] * u[k]
    rel = abs(out["lhs"] - out["rhs"]) / max(abs(out["lhs"]), abs(out["rhs"]), 1e-300)
    rel_c = abs(out["lhs_c"] - out["rhs_c"]) / max(abs(out["lhs_c"]), abs(out["rhs_c"]), 1e-300)
    return {"discrete": float(rel), "continuum": float(rel_c), **{k: float(v) for k, v in out.items()}}


@dataclass(frozen=True)
class RestrictionReport:
    hs: tuple
    log_norm: tuple
    gamma_H: float
    intercept: float
    ceiling: float
    floor: float
    gap_to_floor: float
    tol: float
    green: tuple
    green_max: float
    curve: dict
    p: float
    verdict: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self):
        return self.verdict == PASS

    @property
    def exit_code(self):
        return 0 if self.passed else 2

    def as_dict(self):
        return {"h": list(self.hs), "log_norm": list(self.log_norm), "gamma_H": self.gamma_H,
                "intercept": self.intercept, "ceiling": self.ceiling, "floor": self.floor,
                "gap_to_floor": self.gap_to_floor, "tol": self.tol, "green": list(self.green),
                "green_max": self.green_max, "curve": self.curve,
                "p": "inf" if math.isinf(self.p) else self.p, "verdict": self.verdict, **self.meta}


def restriction_bound_check(eigenpairs, curve, p, collar, dE=None, tol=TOL_RESTRICTION,
                            green_tol=GREEN_TOL):
    """Fit ``gamma_H``, the slope of ``-log ||u_h||_{L^p(H)}`` against 1/h,
    and compare with the ceiling ``2 tau0 d_E^H - d_E(H)``.

    PASS needs ``gamma_H <= ceiling + tol`` and, for level curves, both Green
    balances within ``green_tol`` at every h.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    hs, logs, green = [], [], []
    for ep in sorted(eigenpairs, key=lambda e: -e.h):
        view = GridView(ep)
        hs.append(view.h)
        logs.append(log_lp_norm(view, curve, p))
        green.append(green_balance(view, curve))
    slope, icpt, _ = _linfit(1.0 / np.asarray(hs), -np.asarray(logs))
    gmax = max((max(g["discrete"], g["continuum"]) for g in green if g is not None), default=0.0)
    ok = slope <= curve.ceiling + tol and gmax <= green_tol
    return RestrictionReport(tuple(hs), tuple(logs), float(slope), float(icpt), curve.ceiling,
                             curve.floor, float(slope - curve.floor), float(tol), tuple(green),
                             float(gmax), curve.as_dict(), float(p), PASS if ok else FAIL,
                             meta={"lambdas": [float(e.lam) for e in sorted(eigenpairs, key=lambda e: -e.h)]})
