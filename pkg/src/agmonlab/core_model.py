"""Problem definitions, Fermi collars around the caustic, and tau0.

Two geometries are supported: an interval ``[a, b]`` with the flat metric
(:class:`Problem1D`) and a convex surface of revolution
``g = w(z)^2 dz^2 + f(z)^2 dtheta^2`` with an axisymmetric potential
(:class:`RadialSurfaceProblem`). Both reduce, for collar purposes, to a
:class:`NormalLine`: samples of ``V`` along a curve normal to the caustic,
parametrised by ambient arclength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import CollarOverlap, MonotonicityFailed, NoCausticFound
from .fields import ScalarField

# Truncation rule for problems posed on the whole line.
CUT_HEIGHT = 5.0
CUT_PAD = 0.2


@dataclass(frozen=True)
class ModeRule:
    """Angular quantum number as a function of h.

    ``kind="fixed"`` returns ``value`` for every h; ``kind="inverse"`` returns
    ``round(value / h)`` (the ``m h ~ 1`` family).
    """

    kind: str = "fixed"
    value: int = 1

    def __post_init__(self):
        if self.kind not in ("fixed", "inverse"):
            raise ValueError(f"unknown mode rule {self.kind!r}")

    def __call__(self, h):
        if self.kind == "fixed":
            return int(self.value)
        return int(round(self.value / h))

    def __str__(self):
        return f"m={self.value}" if self.kind == "fixed" else f"m=round({self.value}/h)"


def _check_h_seq(h_seq):
    h = np.asarray(h_seq, dtype=float)
    if h.size and (np.any(h <= 0) or np.any(np.diff(h) >= 0)):
        raise ValueError("h values must be positive and strictly decreasing")
    return tuple(float(v) for v in h)


@dataclass(frozen=True)
class NormalLine:
    """Samples of V along a line normal to the caustic.

    ``coord`` is the native grid coordinate (x for intervals, s for surfaces),
    ``ell`` the ambient arclength along the line. ``refine`` maps a bracketing
    pair of coord values to the exact crossing of ``V = E``; ``ell_of`` maps a
    coord value to arclength.
    """

    coord: np.ndarray
    ell: np.ndarray
    V: np.ndarray
    E: float
    refine: Callable
    ell_of: Callable
    name: str = "x"
    speed_sq: Callable | None = None


@dataclass(frozen=True)
class Problem1D:
    """Schrodinger data ``-h^2 d^2/dx^2 + V - E`` on ``[a, b]``.

    Parameters
    ----------
    V : callable
        Vectorised potential.
    a, b : float
        Domain endpoints (Dirichlet walls for eigenproblems).
    E : float
        Reference energy.
    n : int
        Number of grid nodes including both endpoints.
    h_seq : tuple of float
        Strictly decreasing semiclassical parameters.
    """

    V: Callable
    a: float
    b: float
    E: float
    n: int = 2001
    h_seq: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("need b > a")
        if self.n < 3:
            raise ValueError("need at least 3 grid nodes")
        object.__setattr__(self, "h_seq", _check_h_seq(self.h_seq))
        if not np.all(np.isfinite(self.V_values)):
            raise ValueError("V must be finite on every grid node")

    @cached_property
    def x(self):
        return np.linspace(self.a, self.b, self.n)

    @property
    def dx(self):
        return (self.b - self.a) / (self.n - 1)

    @cached_property
    def V_values(self):
        return np.asarray(self.V(self.x), dtype=float) * np.ones(self.n)

    def with_spacing(self, dx):
        """Copy whose grid spacing is the largest value ``<= dx`` that divides
        the domain evenly."""
        n = int(math.ceil(round((self.b - self.a) / dx, 9))) + 1
        return replace(self, n=n)

    def for_h(self, h, per_h=8):
        """Copy resolved at ``dx <= h / per_h``."""
        return self.with_spacing(h / per_h)

    def normal_line(self):
        V, E = self.V, self.E

        def refine(lo, hi):
            return brentq(lambda t: float(V(t)) - E, lo, hi, xtol=1e-14, rtol=1e-15)

        return NormalLine(self.x, self.x, self.V_values, E, refine, lambda c: float(c), "x",
                          lambda c: np.asarray(V(c), dtype=float) - E)


def truncated_domain(V, E, x_allowed, cut=CUT_HEIGHT, pad=CUT_PAD, step=1e-3, limit=1e3):
    """Interval for a whole-line problem: walk outward from an allowed point
    until ``V - E >= cut`` and pad by ``pad`` times the forbidden width."""
    if not V(x_allowed) < E:
        raise ValueError("x_allowed must lie in the allowed region")
    ends = []
    for direction in (-1.0, 1.0):
        x = x_allowed
        caustic = None
        while abs(x - x_allowed) < limit:
            x_next = x + direction * step
            if caustic is None and V(x_next) >= E:
                caustic = brentq(lambda t: V(t) - E, min(x, x_next), max(x, x_next))
            if caustic is not None and V(x_next) - E >= cut:
                x = x_next
                break
            x = x_next
        else:
            raise ValueError("potential never reaches the truncation height")
        width = abs(x - caustic)
        ends.append(x + direction * pad * width)
    return ends[0], ends[1]


def airy_problem(n=2001, h_seq=(0.1, 0.05, 0.025, 0.0125)):
    """Model Airy operator ``(h D)^2 + y`` at ``E = 0`` on ``[-4, 6]``.

    The right end is the truncation rule's cut (V - E = 5) padded by 20%.
    The allowed side has no natural end; the wall at -4 is a modelling choice.
    """
    return Problem1D(lambda y: np.asarray(y, dtype=float), -4.0, 6.0, 0.0, n, h_seq, "airy")


def quadratic_problem(n=2001, h_seq=(0.1, 0.05, 0.025, 0.0125), E=1.0):
    """Semiclassical oscillator ``V = x^2`` truncated by the whole-line rule."""
    V = lambda x: np.asarray(x, dtype=float) ** 2
    a, b = truncated_domain(V, E, 0.0)
    return Problem1D(V, a, b, E, n, h_seq, "quadratic")


def table_potential(path):
    """Vectorised potential from a two-column ``x, V`` CSV with linear
    interpolation. Returns ``(V, xmin, xmax)``."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError("potential table must have exactly two columns")
    order = np.argsort(data[:, 0])
    xs, vs = data[order, 0], data[order, 1]
    if np.any(np.diff(xs) <= 0):
        raise ValueError("table x values must be distinct")

    def V(x):
        return np.interp(np.asarray(x, dtype=float), xs, vs)

    return V, float(xs[0]), float(xs[-1])


@dataclass(frozen=True)
class RadialSurfaceProblem:
    """Axisymmetric Schrodinger problem on a convex surface of revolution.

    The surface is ``(f(z) cos t, f(z) sin t, z)`` for ``z in [-1, 1]`` with
    metric ``w^2 dz^2 + f^2 dt^2``, ``w = sqrt(1 + f'^2)``.

    Parameters
    ----------
    f, fprime : callable
        Profile and its derivative on ``(-1, 1)``.
    fsq_prime_at_poles : tuple of float
        Limits of ``(f^2)'`` at ``z = -1`` and ``z = +1``.
    V : callable
        Potential as a function of z.
    E : float
        Reference energy.
    mode : ModeRule
        Angular quantum number rule.
    n_s : int
        Base number of s-grid nodes (including the truncated pole ends).
    s_max : float
        Pole truncation: the grid spans ``|s| <= s_max``.
    """

    f: Callable
    fprime: Callable
    fsq_prime_at_poles: tuple
    V: Callable
    E: float
    mode: ModeRule = field(default_factory=ModeRule)
    n_s: int = 2049
    s_max: float = 8.0
    h_seq: tuple = ()
    name: str = "surface"

    def __post_init__(self):
        object.__setattr__(self, "h_seq", _check_h_seq(self.h_seq))
        lo, hi = self.fsq_prime_at_poles
        if not (lo > 0 and hi < 0):
            raise ValueError("need -(f^2)'(1) > 0 and (f^2)'(-1) > 0 (smooth poles)")
        z = np.linspace(-1.0, 1.0, 401)[1:-1]
        fz = np.asarray(self.f(z), dtype=float)
        if np.any(fz <= 0):
            raise ValueError("profile must be positive on (-1, 1)")
        d = z[1] - z[0]
        f2 = (fz[2:] - 2 * fz[1:-1] + fz[:-2]) / d**2
        if np.any(f2 >= 0):
            raise ValueError("profile must be strictly concave on (-1, 1)")

    def w(self, z):
        return np.sqrt(1.0 + np.asarray(self.fprime(z), dtype=float) ** 2)

    def for_h(self, h, per_h=8):
        """Copy with s-spacing ``<= h / per_h``."""
        n = int(math.ceil(2 * self.s_max / (h / per_h))) + 1
        n += (n + 1) % 2  # odd count keeps s = 0 on the grid
        return replace(self, n_s=max(n, self.n_s))

    def normal_line(self):
        from .spectral import radial_reduce

        return radial_reduce(self).normal_line()


def sphere_problem(mode=None, n_s=2049, h_seq=(0.1, 0.0562, 0.0316, 0.0178, 0.01)):
    """Round sphere ``f = sqrt(1 - z^2)`` with ``V = z`` at ``E = 0``."""

    def f(z):
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.clip((1.0 - z) * (1.0 + z), 0.0, None))

    def fprime(z):
        z = np.asarray(z, dtype=float)
        return -z / np.sqrt((1.0 - z) * (1.0 + z))

    return RadialSurfaceProblem(
        f=f, fprime=fprime, fsq_prime_at_poles=(2.0, -2.0),
        V=lambda z: np.asarray(z, dtype=float), E=0.0,
        mode=mode or ModeRule("fixed", 1), n_s=n_s, h_seq=h_seq, name="sphere")


# ---------------------------------------------------------------- caustics

@dataclass(frozen=True)
class Crossing:
    coord: float
    ell: float
    grad: float
    orientation: int  # +1 if V increases with ell


@dataclass(frozen=True)
class RegularityReport:
    regular: bool
    tol: float
    crossings: tuple

    def __bool__(self):
        return self.regular


def find_crossings(line):
    """All points where ``V - E`` changes sign or touches zero on the grid."""
    g = line.V - line.E
    dV = np.gradient(line.V, line.ell, edge_order=2)
    out = []
    n = g.size
    i = 0
    while i < n:
        if g[i] == 0.0:
            out.append(Crossing(float(line.coord[i]), float(line.ell[i]), abs(float(dV[i])),
                                int(np.sign(dV[i]))))
            i += 1
            continue
        if i + 1 < n and g[i] * g[i + 1] < 0:
            c = line.refine(float(line.coord[i]), float(line.coord[i + 1]))
            ell_c = line.ell_of(c)
            grad = float(np.interp(ell_c, line.ell[i:i + 2], dV[i:i + 2]))
            out.append(Crossing(c, ell_c, abs(grad), 1 if g[i + 1] > 0 else -1))
        i += 1
    if not out:
        raise NoCausticFound(f"V - E = {line.E:g} has no sign change on the grid")
    return tuple(out)


def check_regular_energy(problem, tol=1e-3):
    """Is E a regular value of V? Reports ``|grad V|`` at every crossing."""
    crossings = find_crossings(problem.normal_line())
    regular = min(c.grad for c in crossings) >= tol
    return RegularityReport(bool(regular), float(tol), crossings)


# ----------------------------------------------------------------- collars

@dataclass(frozen=True)
class CollarRegion:
    """Fermi collar ``{|y_n| <= r0}`` around the caustic.

    ``y_n`` is the signed ambient distance to the nearest caustic component
    (positive on the forbidden side), ``F = (V - E) / y_n`` with the removable
    singularity filled by the normal derivative, ``dV`` the normal derivative
    of V.
    """

    r0: float
    y_n: ScalarField
    F: ScalarField
    dV: ScalarField
    crossings: tuple
    line: NormalLine
    dV_dell: np.ndarray
    useful_bounds_hold: bool

    @property
    def collar(self):
        return self.y_n.mask

    @property
    def forbidden(self):
        return self.line.V > self.line.E

    @property
    def forbidden_collar(self):
        return self.collar & (self.y_n.values > 0)

    @property
    def caustic_nodes(self):
        return np.flatnonzero(self.y_n.values == 0.0)

    def dV_min_forbidden(self):
        """min of the normal derivative over the closed forbidden collar."""
        vals = list(self.dV.values[self.forbidden_collar])
        vals += [self.dV_at_caustic(c) for c in self.crossings]
        vals += self._edge_values((1,))
        return float(min(vals))

    def dV_max(self):
        """max of the normal derivative over the closed collar."""
        vals = list(self.dV.values[self.collar])
        vals += [self.dV_at_caustic(c) for c in self.crossings]
        vals += self._edge_values((-1, 1))
        return float(max(vals))

    def dV_at_caustic(self, c):
        return c.orientation * float(np.interp(c.ell, self.line.ell, self.dV_dell))

    def _edge_values(self, sides):
        # normal derivative interpolated at y_n = side * r0 for each component
        out = []
        lo, hi = self.line.ell[0], self.line.ell[-1]
        for c in self.crossings:
            for side in sides:
                e = c.ell + side * c.orientation * self.r0
                if lo <= e <= hi:
                    out.append(c.orientation * float(np.interp(e, self.line.ell, self.dV_dell)))
        return out


def build_collar(problem, r0, line=None):
    """Fermi collar of half-width ``r0`` around every caustic component.

    Raises
    ------
    MonotonicityFailed
        If the normal derivative of V is not strictly positive on a collar.
    CollarOverlap
        If two components are closer than ``2 r0``.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    line = line if line is not None else problem.normal_line()
    crossings = find_crossings(line)
    ell = line.ell
    dVdl = np.gradient(line.V, ell, edge_order=2)

    cell = np.array([c.ell for c in crossings])
    nearest = np.argmin(np.abs(ell[:, None] - cell[None, :]), axis=1)
    orient = np.array([crossings[k].orientation for k in nearest], dtype=float)
    y_n = orient * (ell - cell[nearest])
    y_n[np.abs(y_n) < 1e-13 * max(1.0, np.abs(ell).max())] = 0.0
    collar = np.abs(y_n) <= r0 * (1 + 1e-12)
    dV = orient * dVdl

    for k, c in enumerate(crossings):
        sel = collar & (nearest == k)
        bad = sel & (dV <= 0)
        if c.orientation == 0 or np.any(bad):
            where = line.coord[bad][:3] if np.any(bad) else [c.coord]
            raise MonotonicityFailed(r0, f"normal derivative <= 0 near {line.name}={list(where)}")
    if len(cell) > 1 and np.min(np.diff(np.sort(cell))) < 2 * r0:
        raise CollarOverlap(f"caustic components closer than 2*r0={2 * r0:g}")

    g = line.V - line.E
    F = np.empty_like(g)
    nz = y_n != 0
    F[nz] = g[nz] / y_n[nz]
    F[~nz] = dV[~nz]

    names = (line.name,)
    fc = collar & (y_n > 0)
    lo, hi = dV[fc | (collar & ~nz)].min(), dV[fc | (collar & ~nz)].max()
    slack = 1e-6 * max(abs(hi), 1.0)
    useful = bool(np.all((F[fc] >= lo - slack) & (F[fc] <= hi + slack))) if fc.any() else True

    return CollarRegion(
        r0=float(r0),
        y_n=ScalarField(y_n, (line.coord,), names, collar, "y_n"),
        F=ScalarField(F, (line.coord,), names, collar, "F"),
        dV=ScalarField(dV, (line.coord,), names, collar, "dV_normal"),
        crossings=crossings,
        line=line,
        dV_dell=dVdl,
        useful_bounds_hold=useful,
    )


def injectivity_proxy(problem, line=None):
    """Stand-in for inj(M, g) when choosing r0.

    Half the distance between caustic components; for a single component the
    distance to the nearest domain end (interval) or half the distance to the
    nearest pole (surface).
    """
    line = line if line is not None else problem.normal_line()
    cell = sorted(c.ell for c in find_crossings(line))
    if len(cell) > 1:
        return 0.5 * float(np.min(np.diff(cell)))
    c = cell[0]
    if isinstance(problem, RadialSurfaceProblem):
        return 0.5 * min(c - line.ell[0], line.ell[-1] - c)
    return min(c - line.ell[0], line.ell[-1] - c)


def default_r0(problem, line=None):
    """Largest dyadic ``r0 <= inj_proxy / 2`` that yields a valid collar."""
    line = line if line is not None else problem.normal_line()
    bound = 0.5 * injectivity_proxy(problem, line)
    r0 = 2.0 ** math.floor(math.log2(bound))
    while r0 > 2.0 ** -30:
        try:
            build_collar(problem, r0, line)
            return r0
        except (MonotonicityFailed, CollarOverlap):
            r0 /= 2
    raise MonotonicityFailed(r0, "no dyadic r0 works")


def tau0(collar):
    """Geometric constant ``sqrt(max dV over collar / min dV over the
    forbidden collar)``; always >= 1."""
    lo = collar.dV_min_forbidden()
    hi = collar.dV_max()
    if lo <= 0:
        raise MonotonicityFailed(collar.r0, "non-positive normal derivative")
    value = math.sqrt(hi / lo)
    assert value >= 1.0 - 1e-12
    return value
