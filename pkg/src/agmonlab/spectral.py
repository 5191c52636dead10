"""Finite-difference Schrodinger operators and a tridiagonal eigensolver.

Every discretisation here is written in the Sturm-Liouville form

    -h^2 u'' + (A + B V) u = lam B u

on a uniform grid with Dirichlet ends. Intervals have ``A = 0, B = 1``. The
separated radial equation on a surface of revolution, written in the variable
``s = int w / f dz``, has ``A = m^2 h^2`` and ``B = f^2``. The symmetric
tridiagonal matrix acts on ``psi = sqrt(B) u``.

Eigenvalues come from bisection on the Sturm count (LDL^T inertia), vectors
from inverse iteration solved through a twisted factorisation. The twisted
solve propagates the vector multiplicatively outward from its peak, so
exponentially small tails keep their relative accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .core_model import NormalLine, Problem1D, RadialSurfaceProblem
from .errors import ConvergenceError, PoleSingularity, ResolutionError
from .fields import ScalarField

# Spacing must resolve the local wavelength 2*pi*h/sqrt(E - V).
MAX_DX_PER_H = 0.25
# Truncated poles further than this from |r| = 1 signal a singular profile.
MAX_POLE_MARGIN = 1e-3
RESIDUAL_TOL = 1e-8
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal discretisation plus the data needed to map
    matrix eigenvectors back to physical eigenfunctions.

    ``diag`` and ``off`` cover interior nodes only; ``coord`` is the full grid
    including the two Dirichlet nodes.
    """

    diag: np.ndarray
    off: np.ndarray
    coord: np.ndarray
    h: float
    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    angular: float = 1.0
    name: str = "x"
    m: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.diag.size

    @property
    def spacing(self):
        return float(self.coord[1] - self.coord[0])

    @property
    def weights(self):
        """Measure weights for ``sum(weights * u**2)`` over interior nodes."""
        return self.angular * self.spacing * self.B

    def dense(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, x):
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def norm_inf(self):
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.off)
        row[1:] += np.abs(self.off)
        return float(row.max())


def _build(coord, h, A, B, V, angular, name, m=None, meta=None):
    ds = float(coord[1] - coord[0])
    k = h * h / (ds * ds)
    diag = (2.0 * k + A) / B + V
    off = -k / np.sqrt(B[:-1] * B[1:])
    return TridiagonalOperator(diag, off, coord, float(h), A * np.ones_like(B), B, V,
                               float(angular), name, m, meta or {})


def discretize_1d(problem: Problem1D, h):
    """Second-order FD matrix of ``-h^2 d^2/dx^2 + V`` with Dirichlet walls.

    Diagonal ``2 h^2 / dx^2 + V(x_i)``, off-diagonal ``-h^2 / dx^2`` on the
    interior nodes.
    """
    if problem.dx > MAX_DX_PER_H * h * (1 + 1e-12):
        raise ResolutionError(f"dx={problem.dx:.3g} exceeds h/4={h / 4:.3g}")
    x = problem.x
    n = x.size - 2
    return _build(x, h, np.zeros(n), np.ones(n), problem.V_values[1:-1], 1.0, "x",
                  meta={"problem": problem.name})


# ------------------------------------------------------------ Sturm / bisection

def sturm_count(diag, off, x):
    """Number of eigenvalues strictly below ``x``."""
    a = diag.tolist() if isinstance(diag, np.ndarray) else diag
    b2 = (off * off).tolist() if isinstance(off, np.ndarray) else off
    return _count(a, b2, x, _pivmin(b2))


def _pivmin(b2):
    return 1e-290 * max(1.0, max(b2) if b2 else 1.0)


def _count(a, b2, x, pivmin):
    d = a[0] - x
    c = 1 if d < 0 else 0
    for i in range(1, len(a)):
        if abs(d) < pivmin:
            d = -pivmin
        d = a[i] - x - b2[i - 1] / d
        if d < 0:
            c += 1
    return c


def _gershgorin(diag, off):
    r = np.zeros_like(diag)
    r[:-1] += np.abs(off)
    r[1:] += np.abs(off)
    return float((diag - r).min()), float((diag + r).max())


def _bisect(a, b2, pivmin, k, lo, hi, max_iter=400):
    """Eigenvalue with 0-based index ``k`` inside ``(lo, hi]``."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 2 * _EPS * max(abs(lo), abs(hi)):
            break
        if _count(a, b2, mid, pivmin) > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def kth_eigenvalue(op, k):
    """Eigenvalue number ``k`` (0-based, ascending) by bisection."""
    if not 0 <= k < op.n:
        raise IndexError(k)
    a, b2 = op.diag.tolist(), (op.off ** 2).tolist()
    lo, hi = _gershgorin(op.diag, op.off)
    span = hi - lo
    return _bisect(a, b2, _pivmin(b2), k, lo - 1e-9 * span, hi + 1e-9 * span)


def _bracket(a, b2, pivmin, E, k, side, glo, ghi):
    step = max(abs(E), 1.0) * 1e-3
    while True:
        t = E - step if side < 0 else E + step
        if side < 0 and (t <= glo or _count(a, b2, t, pivmin) <= k):
            return max(t, glo)
        if side > 0 and (t >= ghi or _count(a, b2, t, pivmin) >= k + 1):
            return min(t, ghi)
        step *= 2.0


def eigenvalue_nearest(op, E):
    """Eigenvalue closest to ``E``; exact ties go to the smaller one.

    Returns ``(lam, index)``.
    """
    a, b2 = op.diag.tolist(), (op.off ** 2).tolist()
    pivmin = _pivmin(b2)
    glo, ghi = _gershgorin(op.diag, op.off)
    pad = 1e-9 * (ghi - glo) + 1e-300
    glo, ghi = glo - pad, ghi + pad
    k = _count(a, b2, E, pivmin)
    cands = []
    if k >= 1:
        lo = _bracket(a, b2, pivmin, E, k - 1, -1, glo, ghi)
        cands.append((_bisect(a, b2, pivmin, k - 1, lo, E), k - 1))
    if k < op.n:
        hi = _bracket(a, b2, pivmin, E, k, +1, glo, ghi)
        cands.append((_bisect(a, b2, pivmin, k, E, hi), k))
    lam, idx = min(cands, key=lambda c: (abs(c[0] - E), c[0]))
    return lam, idx


# --------------------------------------------------------- inverse iteration

def twisted_solve(diag, off, lam):
    """Solve ``(T - lam) z = gamma_k e_k`` with the twist index ``k`` where
    ``|gamma_k|`` is minimal; ``z_k = 1``."""
    a = (diag - lam).tolist()
    b = off.tolist()
    b2 = [v * v for v in b]
    n = len(a)
    pivmin = _pivmin(b2)
    dp = [0.0] * n
    dm = [0.0] * n
    d = a[0]
    dp[0] = d
    for i in range(1, n):
        if abs(d) < pivmin:
            d = -pivmin
            dp[i - 1] = d
        d = a[i] - b2[i - 1] / d
        dp[i] = d
    d = a[n - 1]
    dm[n - 1] = d
    for i in range(n - 2, -1, -1):
        if abs(d) < pivmin:
            d = -pivmin
            dm[i + 1] = d
        d = a[i] - b2[i] / d
        dm[i] = d
    gamma = np.abs(np.array(dp) + np.array(dm) - np.array(a))
    k = int(np.argmin(gamma))
    z = [0.0] * n
    z[k] = 1.0
    for i in range(k - 1, -1, -1):
        p = dp[i] if abs(dp[i]) >= pivmin else -pivmin
        z[i] = -b[i] * z[i + 1] / p
    for i in range(k + 1, n):
        p = dm[i] if abs(dm[i]) >= pivmin else -pivmin
        z[i] = -b[i - 1] * z[i - 1] / p
    return np.array(z), k


def inverse_iteration(op, lam, max_iter=5, tol=RESIDUAL_TOL):
    """Eigenvector for ``lam``; returns ``(psi, lam, residual)`` with
    ``||psi||_2 = 1``.

    Raises
    ------
    ConvergenceError
        If ``||(T - lam) psi|| > tol * ||T||_inf`` after ``max_iter`` sweeps.
    """
    target = tol * op.norm_inf()
    trace = []
    for it in range(max_iter):
        z, k = twisted_solve(op.diag, op.off, lam)
        z /= np.linalg.norm(z)
        Tz = op.matvec(z)
        res = float(np.linalg.norm(Tz - lam * z))
        trace.append((it, lam, k, res))
        if res <= target:
            return z, lam, res
        lam = float(z @ Tz)
    raise ConvergenceError("inverse iteration stalled", trace)


# ----------------------------------------------------------------- eigenpairs

@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue ``lam = E(h)`` and physical eigenfunction samples.

    ``u`` lives on the full grid (Dirichlet zeros at the ends) and is
    normalised so that ``sum(operator.weights * u_interior**2) == 1``; for
    surfaces that is the L^2 norm of ``u(s) e^{i m theta}`` on the surface.
    """

    h: float
    lam: float
    u: ScalarField
    operator: TridiagonalOperator
    residual: float
    index: int
    norm_convention: str
    selection: str = "eigenvalue nearest E; exact ties -> smaller"

    @property
    def interior(self):
        return self.u.values[1:-1]

    @property
    def m(self):
        return self.operator.m

    def norm(self):
        return float(np.sqrt(np.sum(self.operator.weights * self.interior ** 2)))

    def to_csv(self, path=None):
        return self.u.to_csv(path)

    def sidecar(self):
        return {"h": self.h, "lambda": self.lam, "residual": self.residual,
                "norm": self.norm(), "index": self.index, "m": self.m,
                "norm_convention": self.norm_convention, "selection": self.selection}

    def write(self, stem):
        """Write ``stem.csv`` (grid, u) and ``stem.json`` sidecar."""
        self.to_csv(f"{stem}.csv")
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def solve_near_energy(operator, E, h=None):
    """Eigenpair of ``operator`` whose eigenvalue is closest to ``E``."""
    if h is not None and not math.isclose(h, operator.h, rel_tol=1e-12):
        raise ValueError(f"operator was built for h={operator.h}, not {h}")
    lam, idx = eigenvalue_nearest(operator, E)
    return _pair(operator, lam, idx)


def solve_index(operator, k):
    """Eigenpair number ``k`` (0-based, ascending)."""
    return _pair(operator, kth_eigenvalue(operator, k), k)


def _pair(operator, lam, idx):
    psi, lam, res = inverse_iteration(operator, lam)
    psi = psi / math.sqrt(operator.angular * operator.spacing)
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    u = np.zeros(operator.coord.size)
    u[1:-1] = psi / np.sqrt(operator.B)
    conv = "dx" if operator.angular == 1.0 else "surface measure w f dz dtheta = f^2 ds dtheta"
    field_ = ScalarField(u, (operator.coord,), (operator.name,), None, "u")
    return EigenPair(operator.h, float(lam), field_, operator, res, idx, conv)


# ------------------------------------------------------------ radial reduction

@dataclass(frozen=True)
class RadialReduction:
    """Separated radial problem of a surface of revolution in the s variable.

    ``s = int_0^r w / f dz`` maps the open meridian onto the line; the grid is
    uniform in s over ``[-s_max, s_max]``. ``V_eff = f^2 (V - E) + 1``.
    """

    problem: RadialSurfaceProblem
    s: np.ndarray
    r: np.ndarray
    ell: np.ndarray
    f: np.ndarray
    V: np.ndarray
    V_eff: ScalarField
    eta: float
    _flow: tuple = field(repr=False, compare=False, default=())

    @property
    def spacing(self):
        return float(self.s[1] - self.s[0])

    def s_of_r(self, r):
        """s(r) by adaptive quadrature of w / f."""
        p = self.problem
        val, _ = quad(lambda z: float(p.w(z)) / float(p.f(z)), 0.0, r, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    def r_of_s(self, s):
        return self._eval(s, 0)

    def ell_of_s(self, s):
        return self._eval(s, 1)

    def _eval(self, s, comp):
        s = np.asarray(s, dtype=float)
        neg, pos = self._flow
        if s.ndim == 0:
            sol = neg if s < 0 else pos
            return float(sol.sol(abs(float(s)))[comp])
        out = np.empty_like(s)
        m = s < 0
        if m.any():
            out[m] = neg.sol(-s[m])[comp]
        if (~m).any():
            out[~m] = pos.sol(s[~m])[comp]
        return out

    def normal_line(self):
        V, E = self.problem.V, self.problem.E

        def refine(lo, hi):
            return brentq(lambda t: float(V(self.r_of_s(t))) - E, lo, hi, xtol=1e-14, rtol=1e-15)

        p = self.problem

        def speed_sq(t):
            r = self.r_of_s(np.asarray(t, dtype=float))
            return (np.asarray(V(r), dtype=float) - E) * np.asarray(p.f(r), dtype=float) ** 2

        return NormalLine(self.s, self.ell, self.V, E, refine, self.ell_of_s, "s", speed_sq)

    def operator(self, h, m=None):
        """Matrix of ``-h^2 d^2/ds^2 + m^2 h^2 + f^2 V = lam f^2`` on the
        interior s nodes (Dirichlet at the truncated poles)."""
        if self.spacing > MAX_DX_PER_H * h * (1 + 1e-12):
            raise ResolutionError(f"ds={self.spacing:.3g} exceeds h/4={h / 4:.3g}")
        m = self.problem.mode(h) if m is None else int(m)
        B = self.f[1:-1] ** 2
        A = np.full(B.shape, (m * h) ** 2)
        return _build(self.s, h, A, B, self.V[1:-1], 2.0 * np.pi, "s", m,
                      meta={"problem": self.problem.name, "mode": str(self.problem.mode)})


def _meridian_flow(problem, s_end):
    f, w = problem.f, problem.w
    lim = 1.0 - 1e-15

    def rhs(_, y, sign):
        r = min(max(y[0], -lim), lim)
        fr = float(f(r))
        return [sign * fr / float(w(r)), sign * fr]

    sols = []
    for sign in (-1.0, 1.0):
        sol = solve_ivp(rhs, (0.0, s_end), [0.0, 0.0], args=(sign,), method="DOP853",
                        rtol=1e-12, atol=1e-14, dense_output=True)
        if sol.status != 0:
            raise PoleSingularity(f"meridian flow failed: {sol.message}")
        sols.append(sol)
    return tuple(sols)


def radial_reduce(problem: RadialSurfaceProblem):
    """Tabulate s(r), the arclength, and V_eff on a uniform s grid."""
    s_max = problem.s_max
    neg, pos = _meridian_flow(problem, s_max)
    s = np.linspace(-s_max, s_max, problem.n_s)
    r = np.empty_like(s)
    ell = np.empty_like(s)
    m = s < 0
    r[m], ell[m] = neg.sol(-s[m])
    r[~m], ell[~m] = pos.sol(s[~m])
    eta = 1.0 - max(abs(r[0]), abs(r[-1]))
    if not np.all(np.diff(r) > 0):
        raise PoleSingularity("s(r) is not strictly increasing")
    if eta > MAX_POLE_MARGIN:
        raise PoleSingularity(f"|s| reaches {s_max} at |r| = {1 - eta:.6f}: s(r) diverges "
                              "before the pole; (f^2)'(+-1) must be nonzero")
    fv = np.asarray(problem.f(r), dtype=float)
    V = np.asarray(problem.V(r), dtype=float) * np.ones_like(r)
    veff = ScalarField(fv ** 2 * (V - problem.E) + 1.0, (s,), ("s",), None, "V_eff")
    return RadialReduction(problem, s, r, ell, fv, V, veff, float(eta), (neg, pos))


def h1h_norm(u: ScalarField, mask, h):
    """Squared semiclassical H^1 norm ``int_mask |u|^2 + |h u'|^2`` on a 1D
    grid (trapezoid rule, central differences)."""
    x = u.coords[0]
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty region")
    du = np.gradient(u.values, x, edge_order=2)
    dens = u.values ** 2 + (h * du) ** 2
    idx = np.flatnonzero(mask)
    total = 0.0
    # integrate each contiguous run separately
    for run in np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1):
        if run.size > 1:
            total += float(np.trapezoid(dens[run], x[run]))
    return total


def operator_for(problem, h, per_h=8):
    """Discretised operator for ``problem`` at semiclassical parameter h."""
    if isinstance(problem, RadialSurfaceProblem):
        return radial_reduce(problem.for_h(h, per_h)).operator(h)
    return discretize_1d(problem.for_h(h, per_h), h)


def solve_family(problem, h_seq=None, E=None, per_h=8, map_=map):
    """Eigenpairs nearest ``E`` (default ``problem.E``) over an h sequence.

    ``map_`` may be an executor's ordered ``map`` for per-h parallelism.
    """
    hs = problem.h_seq if h_seq is None else tuple(h_seq)
    E = problem.E if E is None else E
    return list(map_(_solve_one, [(problem, h, E, per_h) for h in hs]))


def _solve_one(args):
    problem, h, E, per_h = args
    return solve_near_energy(operator_for(problem, h, per_h), E, h)
