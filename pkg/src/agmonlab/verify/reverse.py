"""Reverse Agmon lower bound and the Carleman inequality audit, both
evaluated in log space so that ``exp(d_E / h)`` is never formed."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core_model import tau0 as geometric_tau0
from .carleman import carleman_weight_build
from .fits import CONTROL_HOLDS
from ._grid import GridView, log_weighted_h1

TAIL = 3
BETA_CAP_FACTOR = 4.0

PASS, FAIL = "PASS", "FAIL"


def _on_grid(field_, coord):
    return np.interp(coord, field_.coords[0], field_.values)


def default_annulus(collar):
    """``(delta1, delta2)`` in V - E units at ``y_n = r0/6`` and ``5 r0/6``.

    These bracket the default cutoff ramp ``[r0/3, 2 r0/3]``.
    """
    line = collar.line
    out = []
    for frac in (1.0 / 6.0, 5.0 / 6.0):
        vals = []
        for c in collar.crossings:
            e = c.ell + c.orientation * frac * collar.r0
            vals.append(float(np.interp(e, line.ell, line.V)) - line.E)
        out.append(min(vals))
    return tuple(out)


@dataclass(frozen=True)
class ReverseAgmonReport:
    hs: tuple
    beta: tuple
    beta_unweighted: tuple
    beta_cap: float
    limsup_proxy: float
    tau0: float
    m_eps: float
    M_eps: float
    eps: float
    annulus: tuple
    control: str
    verdict: str
    applicable: bool
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def exit_code(self):
        if not self.applicable:
            return 3
        return 0 if self.verdict == PASS else 2

    def as_dict(self):
        return {"h": list(self.hs), "beta": list(self.beta), "beta_unweighted": list(self.beta_unweighted),
                "beta_cap": self.beta_cap, "limsup_proxy": self.limsup_proxy, "tau0": self.tau0,
                "m_eps": self.m_eps, "M_eps": self.M_eps, "eps": self.eps,
                "annulus": list(self.annulus), "control": self.control, "verdict": self.verdict,
                "applicable": self.applicable, **self.meta}


def _annulus_mask(view, collar, E, d1, d2):
    y = _on_grid(collar.y_n, view.coord)
    return (view.V > E + d1) & (view.V < E + d2) & (np.abs(y) <= collar.r0)


def beta_h(view, dE, tau0, mask):
    """``-h log || e^{tau0 d_E / h} u ||_{H^1_h(mask)}``."""
    d = _on_grid(dE, view.coord)
    phi = tau0 * d
    dphi = np.gradient(phi, view.coord)
    return -view.h * log_weighted_h1(view, phi, dphi, mask)


def reverse_agmon_check(eigenpairs, dE, collar, annulus=None, eps=0.01, control=None,
                        beta_cap=None):
    """Reverse Agmon check on ``A(delta1, delta2) = {E + delta1 < V < E + delta2}``
    inside the collar.

    ``beta_h = -h log ||e^{tau0 d_E/h} u_h||_{H^1_h(A)}``; the verdict is PASS iff
    the max over the three smallest h is at most ``beta_cap = 4 m(eps)``.
    ``control`` is the classification of the same family; the check only
    applies when it is ``control_holds``.
    """
    E = collar.line.E
    t0 = geometric_tau0(collar)
    weight = carleman_weight_build(collar, eps)
    cap = BETA_CAP_FACTOR * weight.m_eps if beta_cap is None else float(beta_cap)
    d1, d2 = default_annulus(collar) if annulus is None else annulus
    if not 0 < d1 < d2:
        raise ValueError("annulus needs 0 < delta1 < delta2")
    eps_sorted = sorted(eigenpairs, key=lambda e: -e.h)
    hs, betas, betas0 = [], [], []
    for ep in eps_sorted:
        view = GridView(ep)
        mask = _annulus_mask(view, collar, E, d1, d2)
        if not mask.any():
            raise ValueError("annulus contains no grid nodes")
        hs.append(view.h)
        betas.append(beta_h(view, dE, t0, mask))
        flat = np.zeros_like(view.coord)
        betas0.append(-view.h * log_weighted_h1(view, flat, flat, mask))
    limsup = max(betas[-TAIL:])
    verdict = PASS if limsup <= cap else FAIL
    ctrl = control if control is not None else "unknown"
    return ReverseAgmonReport(
        tuple(hs), tuple(betas), tuple(betas0), float(cap), float(limsup), float(t0),
        weight.m_eps, weight.M_eps, float(eps), (float(d1), float(d2)), ctrl, verdict,
        ctrl == CONTROL_HOLDS,
        meta={"m_minus_M_positive": weight.m_minus_M_positive,
              "lambdas": [float(e.lam) for e in eps_sorted],
              "modes": [e.m for e in eps_sorted]})


# ------------------------------------------------------------- Carleman audit

def upshot_eps(collar, margin=0.9):
    """Largest admissible weight parameter, ``margin * r0 / 10``.

    The audit windows ``(-eps/2, 0)`` and ``(-3 eps, -eps)`` should be as
    wide as possible compared with the eigenvalue offsets ``lam - E = O(h)``.
    """
    return margin * collar.r0 / 10.0


@dataclass(frozen=True)
class UpshotReport:
    """Per-h log-space slacks of the Carleman chain.

    The abstract constants are calibrated at the coarsest h (the role of
    ``h_0(eps)``): ``C2`` is the largest constant for which the commutator
    inequality holds there and ``C5`` makes the final floor tight there.
    ``c4_slack = log C2*(h) - log C2`` with ``C2*(h)`` the largest admissible
    constant at h, and ``upshot_slack = log LHS - m(eps)/h - log C5``.
    """

    hs: tuple
    log_lhs: tuple
    log_core: tuple
    log_minus: tuple
    c4_slack: tuple
    upshot_slack: tuple
    log_C2: float
    log_C5: float
    m_eps: float
    eps: float
    tail_rate: float
    tail_ok_c4: bool
    tail_ok_upshot: bool

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _log_sq(view, weight, mask, y):
    """``log || e^{phi/h} u ||^2_{H^1_h(mask)}`` with phi in Fermi coordinates."""
    ys = np.clip(y, weight.interval[0] + 1e-15, None)
    phi = weight.phi(ys)
    dphi = weight.dphi(ys) * np.gradient(y, view.coord)
    return 2.0 * log_weighted_h1(view, phi, dphi, mask)


def upshot_chain_check(eigenpairs, weight, collar, C2=None, C5=None):
    """Both sides of the commutator inequality

        h^2 ||e^{phi/h} u||^2_{H(S+)} >= C2 h ||e^{phi/h} u||^2_{H(-eps/2, 0)}
                                          - h^2 ||e^{phi/h} u||^2_{H(S-)}

    with ``S+ = [d1 - eps/20, d2 + eps/20]`` and ``S- = (-3 eps, -eps)``, and
    the final floor ``h^2 ||e^{phi/h} u||^2_{H(S+)} >= C5 e^{m(eps)/h}``.

    A consistency audit, not a proof. ``C2`` and ``C5`` default to their
    calibration at the coarsest h; ``tail_rate`` is the slope of the left
    side's log against 1/h over the three smallest h, to be read against
    ``m(eps)``.
    """
    e = weight.eps
    pad = e / 20.0
    rows = []
    for ep in sorted(eigenpairs, key=lambda p: -p.h):
        view = GridView(ep)
        h = view.h
        y = _on_grid(collar.y_n, view.coord)
        splus = (y >= weight.d1 - pad) & (y <= weight.d2 + pad)
        core = (y >= -e / 2.0) & (y <= 0.0)
        sminus = (y > -3.0 * e) & (y < -e)
        lp = 2.0 * math.log(h) + _log_sq(view, weight, splus, y)
        lc = math.log(h) + _log_sq(view, weight, core, y)
        lm = 2.0 * math.log(h) + _log_sq(view, weight, sminus, y)
        rows.append((h, lp, lc, lm))
    hs, lp, lc, lm = (np.array(c) for c in zip(*rows))
    # largest C2 for which the commutator inequality holds at each h
    log_c2_star = np.logaddexp(lp, lm) - lc
    log_c2 = float(log_c2_star[0]) if C2 is None else math.log(C2)
    log_c5 = float(lp[0] - weight.m_eps / hs[0]) if C5 is None else math.log(C5)
    s4 = log_c2_star - log_c2
    su = lp - weight.m_eps / hs - log_c5
    rate = float(np.polyfit(1.0 / hs[-TAIL:], lp[-TAIL:], 1)[0])
    return UpshotReport(tuple(hs.tolist()), tuple(lp.tolist()), tuple(lc.tolist()), tuple(lm.tolist()),
                        tuple(s4.tolist()), tuple(su.tolist()), log_c2, log_c5, weight.m_eps, e, rate,
                        bool(np.all(s4[-TAIL:] >= 0)), bool(np.all(su[-TAIL:] >= 0)))
