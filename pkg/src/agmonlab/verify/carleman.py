"""The perturbed Airy weight, its smooth cutoffs, and the Poisson-bracket
positivity check."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EpsilonTooLarge

C_POS = 1e-3  # harness threshold for a strictly positive bracket


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    a = _psi(t)
    b = _psi(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


@dataclass(frozen=True)
class CarlemanWeight:
    """``phi(y) = (2/3 + eps) tau (y + 10 eps)^{3/2}`` on ``(-4 eps, r0)``
    with cutoffs ``chi_-`` (rising on ``[-2eps, -3eps/2]``) and ``chi_+``
    (falling on ``[d1, d2]``).

    ``eps = 0`` gives the unperturbed model weight ``(2/3) tau y^{3/2}`` on
    ``(0, r0)``.
    """

    eps: float
    tau: float
    r0: float
    d1: float
    d2: float

    @property
    def interval(self):
        return (-4.0 * self.eps, self.r0)

    @property
    def breakpoints(self):
        return (-2.0 * self.eps, -1.5 * self.eps, self.d1, self.d2)

    @property
    def _c(self):
        return (2.0 / 3.0 + self.eps) * self.tau

    def _shift(self, y):
        return np.asarray(y, dtype=float) + 10.0 * self.eps

    def phi(self, y):
        return self._c * self._shift(y) ** 1.5

    def dphi(self, y):
        return 1.5 * self._c * self._shift(y) ** 0.5

    def d2phi(self, y):
        return 0.75 * self._c * self._shift(y) ** -0.5

    def chi_minus(self, y):
        e = self.eps
        return smooth_step((np.asarray(y, dtype=float) + 2.0 * e) / (0.5 * e)) if e > 0 else np.ones_like(np.asarray(y, dtype=float))

    def chi_plus(self, y):
        return 1.0 - smooth_step((np.asarray(y, dtype=float) - self.d1) / (self.d2 - self.d1))

    def chi(self, y):
        return self.chi_minus(y) * self.chi_plus(y)

    @property
    def m_eps(self):
        """min of phi over (-eps/2, 0); phi is increasing, so phi(-eps/2)."""
        return float(self.phi(-0.5 * self.eps))

    @property
    def M_eps(self):
        """max of phi over (-3 eps, -eps), i.e. phi(-eps)."""
        return float(self.phi(-self.eps))

    @property
    def m_minus_M_positive(self):
        return self.m_eps - self.M_eps > 0

    def product_identity(self):
        """``2 phi'' phi'`` in closed form, ``(9/4) tau^2 (2/3 + eps)^2``."""
        return 2.25 * self._c ** 2

    def as_dict(self):
        return {"eps": self.eps, "tau": self.tau, "r0": self.r0, "breakpoints": list(self.breakpoints),
                "m_eps": self.m_eps, "M_eps": self.M_eps, "m_minus_M_positive": self.m_minus_M_positive}


def carleman_weight_build(collar, eps, tau=None, d1=None, d2=None):
    """Weight with ``tau = ||dV||_inf^{1/2}`` over the collar and cutoff
    breakpoints ``d1 = r0/3``, ``d2 = 2 r0/3`` unless given.

    Raises
    ------
    EpsilonTooLarge
        If ``10 eps >= r0``.
    """
    r0 = collar.r0
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if 10.0 * eps >= r0:
        raise EpsilonTooLarge(f"10*eps={10 * eps:g} must be < r0={r0:g}")
    tau = math.sqrt(collar.dV_max()) if tau is None else float(tau)
    d1 = r0 / 3.0 if d1 is None else float(d1)
    d2 = 2.0 * r0 / 3.0 if d2 is None else float(d2)
    w = CarlemanWeight(float(eps), tau, float(r0), d1, d2)
    bp = w.breakpoints
    if not (bp[0] < bp[1] <= 0 < bp[2] < bp[3] < r0) and eps > 0:
        raise ValueError(f"cutoff breakpoints out of order: {bp}")
    return w


@dataclass(frozen=True)
class BracketReport:
    min_value: float
    at_y: float
    at_xi: float
    passed: bool
    threshold: float
    n_nodes: int


def bracket(weight, y, dV, xi):
    """``4 phi'' (phi'^2 + xi^2) - 2 phi' dV``."""
    p1 = weight.dphi(y)
    p2 = weight.d2phi(y)
    return 4.0 * p2 * (p1 * p1 + xi * xi) - 2.0 * p1 * dV


def bracket_positivity_check(weight, collar, xi=(0.0, -1.0, 1.0), threshold=C_POS):
    """Minimum of the bracket over collar nodes inside the weight interval
    and the given ``xi_n`` samples."""
    y = collar.y_n.values
    lo, hi = weight.interval
    sel = collar.collar & (y > lo) & (y < hi)
    ys = y[sel]
    dv = collar.dV.values[sel]
    best = (math.inf, math.nan, math.nan)
    for x in xi:
        b = bracket(weight, ys, dv, float(x))
        k = int(np.argmin(b))
        if b[k] < best[0]:
            best = (float(b[k]), float(ys[k]), float(x))
    return BracketReport(best[0], best[1], best[2], bool(best[0] >= threshold), float(threshold), int(ys.size))
