"""Shared per-eigenpair grid helpers: measures, region integrals, and
log-space weighted H^1_h norms."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def _pad(a):
    return np.concatenate(([a[0]], a, [a[-1]]))


class GridView:
    """Full-grid arrays (Dirichlet nodes included) for one eigenpair."""

    def __init__(self, ep):
        op = ep.operator
        self.h = ep.h
        self.lam = ep.lam
        self.coord = op.coord
        self.u = ep.u.values
        self.A = _pad(op.A)
        self.B = _pad(op.B)
        self.V = _pad(op.V)
        self.angular = op.angular
        self.spacing = op.spacing
        self.m = op.m

    @property
    def mass_density(self):
        return self.angular * self.B * self.u ** 2

    def du(self):
        return np.gradient(self.u, self.coord)


def region_integral(x, density, g):
    """``int_{g >= 0} density dx`` for piecewise-linear density and region
    indicator ``g`` (cells cut by ``g = 0`` contribute their inside part)."""
    inside = g >= 0
    dx = np.diff(x)
    total = 0.0
    for i in range(x.size - 1):
        a, b = inside[i], inside[i + 1]
        if a and b:
            total += 0.5 * dx[i] * (density[i] + density[i + 1])
        elif a or b:
            k_in, k_out = (i, i + 1) if a else (i + 1, i)
            t = g[k_in] / (g[k_in] - g[k_out])
            d_cut = density[k_in] + t * (density[k_out] - density[k_in])
            total += 0.5 * t * dx[i] * (density[k_in] + d_cut)
    return total


def band_indicator(V, lo, hi):
    """Piecewise-linear indicator of ``lo <= V <= hi`` (>= 0 inside)."""
    return np.minimum(V - lo, hi - V)


def log_weighted_h1(view, phi, dphi, mask):
    """``log || e^{phi/h} u ||_{H^1_h(mask)}`` evaluated in log space.

    The squared norm density on the grid is
    ``angular * ds * [(B + A) W^2 + (h W')^2]`` with ``W = e^{phi/h} u`` and
    ``h W' = e^{phi/h} (phi' u + h u')``. Returns ``-inf`` for an empty or
    identically zero region.
    """
    h = view.h
    u = view.u[mask]
    if u.size == 0:
        return -np.inf
    hdu = h * view.du()[mask]
    lw = np.log(view.angular * view.spacing)
    with np.errstate(divide="ignore"):
        # 2 log|.| rather than log(.**2): the square underflows first
        t0 = 2.0 * phi[mask] / h + np.log((view.B + view.A)[mask]) + 2.0 * np.log(np.abs(u))
        t1 = 2.0 * phi[mask] / h + 2.0 * np.log(np.abs(dphi[mask] * u + hdu))
    terms = np.concatenate((t0, t1))
    if not np.any(np.isfinite(terms)):
        return -np.inf
    return 0.5 * (lw + float(logsumexp(terms)))
