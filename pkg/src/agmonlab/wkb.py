"""WKB phase integrals, an Airy-function reference, and the leading-order
WKB prediction of eigenfunction mass near the caustic.

The Airy routine uses the Maclaurin series for ``|x| <= 5``. Beyond that it
evaluates the large-argument expansions at an anchor ``|x0| = max(|x|, 8)``
and carries (Ai, Ai') back to ``x`` with the Taylor series of ``y'' = x y``.
At ``|x| = 5`` the bare expansion is only good to about ``exp(-2 zeta)``,
roughly 3e-7, while at the anchor it reaches 1e-13.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core_model import Problem1D
from .errors import EmptyAnnulus, RangeError, TurningPointInSegment
from .fields import ScalarField
from .quadrature import arcsine_nodes, simpson

AI0 = 0.355028053887817239  # Ai(0) = 3^{-2/3} / Gamma(2/3)
AIP0 = -0.258819403792806798  # Ai'(0) = -3^{-1/3} / Gamma(1/3)
SERIES_SWITCH = 5.0
ANCHOR = 8.0
ARG_MIN, ARG_MAX = -200.0, 100.0


# ------------------------------------------------------------------ Airy Ai

def _maclaurin(x):
    # Ai = Ai(0) f - |Ai'(0)| g with f, g the two power series of y'' = x y
    x3 = x * x * x
    f_term, g_term = 1.0, x
    f_sum, g_sum = 1.0, x
    fp_sum, gp_sum = 0.0, 1.0
    k = 0
    while True:
        k += 1
        f_term *= x3 / ((3 * k - 1) * (3 * k))
        g_term *= x3 / ((3 * k) * (3 * k + 1))
        f_sum += f_term
        g_sum += g_term
        # derivatives: d/dx x^{3k} = 3k x^{3k-1}
        fp_k = f_term * 3 * k / x if x != 0 else 0.0
        gp_k = g_term * (3 * k + 1) / x if x != 0 else 0.0
        fp_sum += fp_k
        gp_sum += gp_k
        if abs(f_term) + abs(g_term) < 1e-18 * (abs(f_sum) + abs(g_sum)) and k > 2:
            break
        if k > 400:
            break
    return AI0 * f_sum + AIP0 * g_sum, AI0 * fp_sum + AIP0 * gp_sum


def _uv(n):
    u = [1.0]
    v = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
        v.append(-(6 * k + 1) / (6 * k - 1) * u[-1])
    return u, v


_U, _V = _uv(60)


def _asym_sums(zeta, alternating, parity=None):
    """Optimally truncated sums of ``u_k / zeta^k`` and ``v_k / zeta^k``.

    ``alternating`` inserts ``(-1)^k``; ``parity`` restricts to even (0) or
    odd (1) k with sign ``(-1)^{k // 2}``.
    """
    su = sv = 0.0
    prev = math.inf
    for k in range(len(_U)):
        if parity is not None and k % 2 != parity:
            continue
        term_scale = zeta ** (-k)
        mag = _U[k] * term_scale
        if mag > prev:
            break
        prev = mag
        if parity is None:
            sign = (-1) ** k if alternating else 1.0
        else:
            sign = (-1) ** (k // 2)
        su += sign * _U[k] * term_scale
        sv += sign * _V[k] * term_scale
        if mag < 1e-18:
            break
    return su, sv


def _asymptotic(x):
    if x > 0:
        zeta = 2.0 / 3.0 * x ** 1.5
        su, sv = _asym_sums(zeta, True)
        pre = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
        return pre * x ** -0.25 * su, -pre * x ** 0.25 * sv
    t = -x
    zeta = 2.0 / 3.0 * t ** 1.5
    ue, ve = _asym_sums(zeta, False, parity=0)
    uo, vo = _asym_sums(zeta, False, parity=1)
    c, s = math.cos(zeta - math.pi / 4), math.sin(zeta - math.pi / 4)
    rp = 1.0 / math.sqrt(math.pi)
    ai = rp * t ** -0.25 * (c * ue + s * uo)
    aip = rp * t ** 0.25 * (s * ve - c * vo)
    return ai, aip


def _taylor(x0, y0, yp0, x):
    """Carry (y, y') of ``y'' = x y`` from x0 to x."""
    t = x - x0
    coeffs = [y0, yp0, 0.5 * x0 * y0]
    n = 1
    while True:
        # a_{n+2} = (x0 a_n + a_{n-1}) / ((n+2)(n+1))
        nxt = (x0 * coeffs[n] + coeffs[n - 1]) / ((n + 2) * (n + 1))
        coeffs.append(nxt)
        n += 1
        if n > 30 and abs(nxt * t ** (n + 1)) < 1e-18 * (abs(y0) + abs(yp0)):
            break
        if n > 500:
            break
    y = sum(c * t ** k for k, c in enumerate(coeffs))
    yp = sum(k * c * t ** (k - 1) for k, c in enumerate(coeffs) if k)
    return y, yp


def airy_ai(x, derivative=False):
    """Ai(x) (and Ai'(x) if ``derivative``) on ``[-200, 100]``.

    Raises
    ------
    RangeError
        Outside the validated window.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < ARG_MIN) or np.any(arr > ARG_MAX):
        raise RangeError(f"Airy argument outside [{ARG_MIN}, {ARG_MAX}]")
    vals = np.empty(arr.shape)
    ders = np.empty(arr.shape)
    for idx, xv in np.ndenumerate(arr):
        xv = float(xv)
        if abs(xv) <= SERIES_SWITCH:
            a, ap = _maclaurin(xv)
        else:
            x0 = math.copysign(max(abs(xv), ANCHOR), xv)
            a, ap = _asymptotic(x0)
            if x0 != xv:
                a, ap = _taylor(x0, a, ap, xv)
        vals[idx], ders[idx] = a, ap
    if arr.ndim == 0:
        vals, ders = float(vals), float(ders)
    return (vals, ders) if derivative else vals


def airy_reference(y, h):
    """Decaying solution of ``-h^2 u'' + y u = 0``, normalised by
    ``u(0) = Ai(0)``: ``u(y) = Ai(h^{-2/3} y)``."""
    if h <= 0:
        raise ValueError("h must be positive")
    return airy_ai(np.asarray(y, dtype=float) * h ** (-2.0 / 3.0))


# ------------------------------------------------------------- WKB phase

def _phase_integrand(source, E):
    """``w(r) sqrt(E - V(r))`` (the radial factor ``f / (dr/ds)`` equals w)."""
    if isinstance(source, Problem1D):
        V = source.V
        return lambda r: np.sqrt(np.asarray(E - V(r), dtype=float)), (lambda r: E - np.asarray(V(r), dtype=float))
    p = getattr(source, "problem", source)

    def gap(r):
        return E - np.asarray(p.V(r), dtype=float) * np.ones_like(np.asarray(r, dtype=float))

    return (lambda r: np.asarray(p.w(r), dtype=float) * np.sqrt(gap(r))), gap


def wkb_phase(source, E, r0, r, panels=256):
    """``Phi = int_{r0}^{r} w sqrt(E - V) dr`` by composite Simpson.

    ``source`` is a Problem1D (w = 1), a RadialSurfaceProblem or a
    RadialReduction.

    Raises
    ------
    TurningPointInSegment
        If ``E - V <= 0`` anywhere on the quadrature nodes.
    """
    integrand, gap = _phase_integrand(source, E)
    nodes = np.linspace(min(r0, r), max(r0, r), 2 * panels + 1)
    if np.any(gap(nodes) <= 0):
        raise TurningPointInSegment(f"E - V vanishes on [{min(r0, r):g}, {max(r0, r):g}]")
    return simpson(integrand, r0, r, panels)


@dataclass(frozen=True)
class WKBSolution:
    """Tabulated WKB data on a radial or interval grid.

    ``phase`` is ``Phi(r)`` from the anchor, ``amplitude`` the leading
    ``(B (E - V))^{-1/4}`` factor in the grid variable, ``validity_mask`` the
    nodes with ``E - V >= eps_tp = 2 h^{2/3}``.
    """

    phase: ScalarField
    amplitude: ScalarField
    validity_mask: np.ndarray
    E: float
    h: float
    eps_tp: float


def turning_point_width(h):
    return 2.0 * h ** (2.0 / 3.0)


def wkb_solution(source, E, h, anchor):
    """Phase and amplitude on the grid of ``source`` (Problem1D or
    RadialReduction), anchored at the grid node nearest ``anchor``.

    For a reduction the anchor and the phase variable are r (= z); the grid
    coordinate stays s.
    """
    eps_tp = turning_point_width(h)
    if isinstance(source, Problem1D):
        coord, r, B = source.x, source.x, np.ones(source.n)
        V = source.V_values
        name = "x"
    else:
        coord, r, B, V = source.s, source.r, source.f ** 2, source.V
        name = "s"
    gap = E - V
    valid = gap >= eps_tp
    integrand, _ = _phase_integrand(source, E)
    phase = np.full(coord.shape, np.nan)
    k0 = int(np.argmin(np.abs(r - anchor)))
    if not valid[k0]:
        raise TurningPointInSegment("anchor outside the WKB validity region")
    # contiguous valid run containing the anchor
    lo = k0
    while lo > 0 and valid[lo - 1]:
        lo -= 1
    hi = k0
    while hi < coord.size - 1 and valid[hi + 1]:
        hi += 1
    phase[k0] = 0.0
    for k in range(k0 + 1, hi + 1):
        phase[k] = phase[k - 1] + simpson(integrand, r[k - 1], r[k], 2)
    for k in range(k0 - 1, lo - 1, -1):
        phase[k] = phase[k + 1] - simpson(integrand, r[k], r[k + 1], 2)
    run = np.zeros(coord.shape, dtype=bool)
    run[lo:hi + 1] = True
    amp = np.where(run, (B * np.clip(gap, eps_tp, None)) ** -0.25, np.nan)
    return WKBSolution(
        ScalarField(np.where(run, phase, 0.0), (coord,), (name,), run, "phase"),
        ScalarField(np.where(run, amp, 0.0), (coord,), (name,), run, "amplitude"),
        run, float(E), float(h), eps_tp)


# ------------------------------------------------------------ mass oracle

@dataclass(frozen=True)
class MassPrediction:
    """Leading WKB mass on the annulus and its error band."""

    mass: float
    band: float
    sliver: float
    annulus: tuple

    def contains(self, value, rel=0.0):
        return abs(value - self.mass) <= self.band + rel * self.mass


def _time_integral(p, E, a, b, n=4001):
    """``int_a^b w / sqrt(E - V) dz`` with endpoint singularities removed."""
    if b <= a:
        return 0.0
    t, z, dz = arcsine_nodes(a, b, n)
    zi = z[1:-1]
    gap = E - np.asarray(p.V(zi), dtype=float) * np.ones_like(zi)
    w = np.asarray(p.w(zi), dtype=float)
    vals = np.zeros_like(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals[1:-1] = w * dz[1:-1] / np.sqrt(np.clip(gap, 0.0, None))
    # endpoint limits of (w dz/dt) / sqrt(gap) are finite; extrapolate linearly
    vals[0] = 2 * vals[1] - vals[2]
    vals[-1] = 2 * vals[-2] - vals[-3]
    return float(np.trapezoid(vals, t))


def control_mass_oracle(reduction, E, eps, h, band_coeff=1.0):
    """Leading-order WKB mass of ``{E - eps/2 <= V <= E}`` on a surface.

    For a separated mode the WKB density in the surface measure is
    proportional to ``w / sqrt(E - V) dz`` (the classical time density);
    cross terms ``cos(2 Phi / h)`` integrate to O(h). The mass is the ratio
    of the annulus time to the full allowed time. The band is
    ``band_coeff * h`` plus the mass of the turning-point sliver of width
    ``2 h^{2/3}`` inside the annulus.

    The allowed region is taken as the z-interval from the lower pole (or the
    lower caustic) to the caustic ``V = E`` bounding the annulus; ``V`` must
    be increasing there.
    """
    p = getattr(reduction, "problem", reduction)
    Vf = lambda z: float(np.asarray(p.V(z), dtype=float)) - E
    zs = np.linspace(-1.0, 1.0, 4001)
    g = np.asarray(p.V(zs), dtype=float) * np.ones_like(zs) - E
    idx = np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0))
    if idx.size == 0:
        raise EmptyAnnulus("no caustic with V increasing through E")
    k = idx[0]
    zc = brentq(Vf, zs[k], zs[k + 1], xtol=1e-14)
    lower = np.flatnonzero((g[:-1] >= 0) & (g[1:] < 0) & (np.arange(g.size - 1) < k))
    z_lo = -1.0 if lower.size == 0 else brentq(Vf, zs[lower[-1]], zs[lower[-1] + 1])
    ga = lambda z: Vf(z) + eps / 2.0
    z_ann = z_lo if ga(z_lo + 1e-12) >= 0 else brentq(ga, z_lo, zc)
    total = _time_integral(p, E, z_lo, zc)
    ann = _time_integral(p, E, z_ann, zc)
    eps_tp = turning_point_width(h)
    gs = lambda z: Vf(z) + eps_tp
    z_sl = z_ann if gs(z_ann) >= 0 else brentq(gs, z_ann, zc)
    sliver = _time_integral(p, E, z_sl, zc) / total
    return MassPrediction(ann / total, band_coeff * h + sliver, sliver, (z_ann, zc))
