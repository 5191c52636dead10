"""Agmon distance to the caustic: quadrature along a normal line and a
fast-marching eikonal solver on the (s, theta) grid of a surface.

The Agmon metric ``(V - E)_+ g`` degenerates on the caustic, so ``d_E`` grows
like ``y^{3/2}`` there. The 1D quadrature removes the square-root endpoint
behaviour with the substitution ``t = c + sign * u^2``; the fast-marching
solver seeds the cells cut by the caustic with the local closed form
``(2/3) F^{1/2} y^{3/2}``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core_model import Problem1D, RadialSurfaceProblem, find_crossings
from .errors import DegenerateSpeedRegion
from .fields import ScalarField
from .quadrature import simpson_cumulative
from .spectral import radial_reduce


def _line_of(problem_or_line):
    if hasattr(problem_or_line, "normal_line"):
        return problem_or_line.normal_line()
    return problem_or_line


def agmon_distance_1d(problem, collar=None):
    """``d_E`` along the normal line by quadrature of ``sqrt((V - E)_+)``.

    Each forbidden node takes the smaller of the integrals from the caustic
    points bounding its forbidden interval. Values on allowed nodes are 0; the
    mask marks ``V >= E``.

    Parameters
    ----------
    problem : Problem1D, RadialSurfaceProblem or NormalLine
    collar : CollarRegion, optional
        Reuses the collar's normal line and caustic crossings.
    """
    line = collar.line if collar is not None else _line_of(problem)
    crossings = collar.crossings if collar is not None else find_crossings(line)
    coord = line.coord
    g = line.V - line.E
    speed_sq = line.speed_sq
    cs = sorted(c.coord for c in crossings)
    d = np.full(coord.shape, np.inf)
    forb = g >= 0

    def integrand(c, sign):
        def fn(u):
            return 2.0 * u * np.sqrt(np.clip(speed_sq(c + sign * u * u), 0.0, None))
        return fn

    for k, c in enumerate(cs):
        for sign in (-1.0, 1.0):
            stop = cs[k + 1] if sign > 0 and k + 1 < len(cs) else None
            if sign < 0 and k > 0:
                stop = cs[k - 1]
            if sign > 0:
                sel = coord >= c if stop is None else (coord >= c) & (coord <= stop)
            else:
                sel = coord <= c if stop is None else (coord <= c) & (coord >= stop)
            sel &= forb
            idx = np.flatnonzero(sel)
            if idx.size == 0:
                continue
            order = idx[np.argsort(np.abs(coord[idx] - c))]
            u = np.sqrt(np.abs(coord[order] - c))
            vals = simpson_cumulative(integrand(c, sign), np.concatenate(([0.0], u)), sub=2)[1:]
            d[order] = np.minimum(d[order], vals)
    d[~forb] = 0.0
    d[np.isinf(d)] = 0.0
    return ScalarField(d, (coord,), (line.name,), forb, "d_E")


@dataclass(frozen=True)
class LemmaReport:
    """Slack of ``d_E >= (2/3) (min dV)^{1/2} y_n^{3/2}`` on the forbidden
    collar."""

    min_slack: float
    worst_node: float
    passed: bool
    tol: float
    slack: ScalarField


def lemma_lower_bound_check(dE: ScalarField, collar, tol=1e-8):
    mask = collar.forbidden_collar
    y = np.clip(collar.y_n.values, 0.0, None)
    c = math.sqrt(collar.dV_min_forbidden())
    slack = dE.values - (2.0 / 3.0) * c * y ** 1.5
    vals = np.where(mask, slack, np.inf)
    k = int(np.argmin(vals))
    s = float(vals[k])
    field_ = ScalarField(np.where(mask, slack, 0.0), dE.coords, dE.names, mask, "slack")
    return LemmaReport(s, float(dE.coords[0][k]), bool(s >= -tol), float(tol), field_)


def eikonal_residual_1d(dE: ScalarField, speed_sq):
    """``(d_E')^2 - speed^2`` at cell midpoints, one-sided differences.

    ``speed_sq`` is sampled at the midpoints. Returns ``(midpoints, residual)``.
    """
    x = dE.coords[0]
    mid = 0.5 * (x[1:] + x[:-1])
    grad = np.diff(dE.values) / np.diff(x)
    return mid, grad ** 2 - np.clip(speed_sq(mid), 0.0, None)


# ---------------------------------------------------------------- fast marching

def fast_marching(slowness, spacing, seeds, periodic=(False, True)):
    """First-order upwind fast marching for ``|grad T| = slowness`` on a 2D
    grid with isotropic (but possibly different per axis) spacing.

    Parameters
    ----------
    slowness : ndarray (n0, n1)
        Local slowness; nodes with ``nan`` are excluded from the front.
    spacing : (float, float)
    seeds : dict {(i, j): value}
        Frozen initial values.
    periodic : (bool, bool)
        Wrap-around along each axis.

    Returns
    -------
    ndarray with ``inf`` at nodes never reached.
    """
    n0, n1 = slowness.shape
    d0, d1 = spacing
    T = np.full(n0 * n1, np.inf)
    active = np.isfinite(slowness).ravel()
    slow = np.nan_to_num(slowness, nan=0.0).ravel().tolist()
    Tl = T.tolist()
    knownl = [False] * (n0 * n1)
    activel = active.tolist()
    heap = []
    for (i, j), v in seeds.items():
        k = i * n1 + j
        if v < Tl[k]:
            Tl[k] = float(v)
            heapq.heappush(heap, (float(v), k))
    p0, p1 = periodic
    inv0, inv1 = 1.0 / (d0 * d0), 1.0 / (d1 * d1)

    def neighbours(k):
        i, j = divmod(k, n1)
        out = []
        if i > 0:
            out.append(k - n1)
        elif p0:
            out.append(k + (n0 - 1) * n1)
        if i < n0 - 1:
            out.append(k + n1)
        elif p0:
            out.append(k - (n0 - 1) * n1)
        if j > 0:
            out.append(k - 1)
        elif p1:
            out.append(k + n1 - 1)
        if j < n1 - 1:
            out.append(k + 1)
        elif p1:
            out.append(k - n1 + 1)
        return out

    def upwind(q):
        """Smallest known neighbour per axis as (T, slowness) pairs."""
        i, j = divmod(q, n1)
        res = []
        for lo, hi in (
            (q - n1 if i > 0 else (q + (n0 - 1) * n1 if p0 else -1),
             q + n1 if i < n0 - 1 else (q - (n0 - 1) * n1 if p0 else -1)),
            (q - 1 if j > 0 else (q + n1 - 1 if p1 else -1),
             q + 1 if j < n1 - 1 else (q - n1 + 1 if p1 else -1)),
        ):
            best = math.inf, 0.0
            for idx in (lo, hi):
                if idx >= 0 and knownl[idx] and Tl[idx] < best[0]:
                    best = Tl[idx], slow[idx]
            res.append(best)
        return res

    while heap:
        t, k = heapq.heappop(heap)
        if knownl[k] or t > Tl[k]:
            continue
        knownl[k] = True
        for q in neighbours(k):
            if knownl[q] or not activel[q]:
                continue
            (a, fa), (b, fb) = upwind(q)
            f = slow[q]
            # slowness averaged with the upwind neighbour (trapezoid along rays)
            cand = min(a + 0.5 * (f + fa) * d0, b + 0.5 * (f + fb) * d1)
            if a < math.inf and b < math.inf:
                fe = 0.25 * (2.0 * f + fa + fb)
                A = inv0 + inv1
                B = -2.0 * (a * inv0 + b * inv1)
                C = a * a * inv0 + b * b * inv1 - fe * fe
                disc = B * B - 4.0 * A * C
                if disc >= 0.0:
                    r = (-B + math.sqrt(disc)) / (2.0 * A)
                    if r >= max(a, b):
                        cand = min(cand, r)
            if cand < Tl[q]:
                Tl[q] = cand
                heapq.heappush(heap, (cand, q))
    return np.array(Tl).reshape(n0, n1)


def _surface_grid(problem, n):
    """(coord, theta, speed_sq, metric scale f) on the tensor grid."""
    n0, n1 = n
    theta = np.linspace(0.0, 2.0 * np.pi, n1, endpoint=False)
    if isinstance(problem, RadialSurfaceProblem):
        red = radial_reduce(problem)
        s = np.linspace(-problem.s_max, problem.s_max, n0)
        r = red.r_of_s(s)
        f = np.asarray(problem.f(r), dtype=float)
        g = np.asarray(problem.V(r), dtype=float) * np.ones_like(r) - problem.E
        return s, theta, g, f, "s"
    if isinstance(problem, Problem1D):
        x = np.linspace(problem.a, problem.b, n0)
        g = np.asarray(problem.V(x), dtype=float) * np.ones_like(x) - problem.E
        return x, theta, g, np.ones_like(x), "x"
    raise TypeError(f"unsupported problem type {type(problem).__name__}")


def _components_wrapped(mask, periodic_axis=1):
    lab, n = ndimage.label(mask)
    if n == 0:
        return lab, 0
    # merge labels that touch across the periodic seam
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    first = lab.take(0, axis=periodic_axis)
    last = lab.take(-1, axis=periodic_axis)
    for a, b in zip(first, last):
        if a and b:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n + 1)])
    return roots[lab], n


def agmon_distance_fmm(problem, collar=None, n=(512, 512)):
    """``d_E`` on the 2D grid by fast marching in the Agmon metric.

    Surfaces use coordinates (s, theta) where ``g = f^2 (ds^2 + dtheta^2)``,
    so the eikonal equation reads ``|grad_{s,theta} d| = f sqrt((V - E)_+)``.
    An interval problem is extruded to the flat cylinder
    ``[a, b] x R / 2 pi Z`` with ``f = 1``.

    Raises
    ------
    DegenerateSpeedRegion
        If a connected piece of the forbidden region contains no seed.
    """
    coord, theta, g1, f1, name = _surface_grid(problem, n)
    n0, n1 = n
    d0 = float(coord[1] - coord[0])
    d1 = 2.0 * np.pi / n1
    g = np.repeat(g1[:, None], n1, axis=1)
    f = np.repeat(f1[:, None], n1, axis=1)
    forb = g >= 0
    slowness = np.where(forb, f * np.sqrt(np.clip(g, 0.0, None)), np.nan)

    # seeds: forbidden nodes with an allowed neighbour (cut cells)
    seeds = {}
    for axis, dd in ((0, d0), (1, d1)):
        for step in (-1, 1):
            nb = np.roll(g, -step, axis=axis)
            cut = forb & (nb < 0)
            if axis == 0:
                if step == 1:
                    cut[-1, :] = False
                else:
                    cut[0, :] = False
            for i, j in zip(*np.nonzero(cut)):
                gi = g[i, j]
                gn = nb[i, j]
                frac = gi / (gi - gn)  # fraction of the cell on the forbidden side
                y = f[i, j] * frac * dd
                val = (2.0 / 3.0) * math.sqrt(max(gi, 0.0)) * y
                key = (int(i), int(j))
                seeds[key] = min(seeds.get(key, math.inf), val)
    for i, j in zip(*np.nonzero(g == 0)):
        seeds[(int(i), int(j))] = 0.0

    lab, ncomp = _components_wrapped(forb)
    seeded = {int(lab[i, j]) for (i, j) in seeds}
    missing = set(np.unique(lab[forb]).tolist()) - seeded
    if not seeds or missing:
        raise DegenerateSpeedRegion(f"{len(missing) or ncomp} forbidden component(s) hold no caustic seed")

    T = fast_marching(slowness, (d0, d1), seeds, periodic=(False, True))
    T = np.where(forb, T, 0.0)
    if not np.all(np.isfinite(T)):
        raise DegenerateSpeedRegion("fast marching left forbidden nodes unreached")
    return ScalarField(T, (coord, theta), (name, "theta"), forb, "d_E")


def meridian(field2d: ScalarField, j=0):
    """1D slice of a 2D field at theta index ``j``."""
    return ScalarField(field2d.values[:, j], (field2d.coords[0],), (field2d.names[0],),
                       field2d.mask[:, j] if field2d.mask is not None else None, field2d.label)
