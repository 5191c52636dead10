"""Nodal intersections of eigenfunctions with closed curves in the forbidden
region, and the 1/h scaling of their number."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import CurveOutsideDomain, ResolutionError
from .fields import ScalarField
from .spectral import EigenPair

SAMPLES_PER_MODE = 8
ZERO_TOL_REL = 1e-12


@dataclass(frozen=True)
class CurveTrace:
    """Samples of a field along a closed curve ``theta -> (s(theta), theta)``.

    The parameter runs over ``[0, 2 pi)``; the sample after the last is the
    first one.
    """

    theta: np.ndarray
    s: np.ndarray
    samples: np.ndarray
    weights: np.ndarray
    m: int | None = None
    normalized: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def l2_norm(self):
        return float(math.sqrt(np.sum(self.weights * self.samples ** 2)))

    def __len__(self):
        return self.samples.size


def _closed_theta(n):
    return 2.0 * np.pi * np.arange(n) / n


def _arc_weights(s, theta, scale):
    """Arclength per sample for the metric ``scale(s)^2 (ds^2 + dtheta^2)``."""
    n = theta.size
    ds = (np.roll(s, -1) - np.roll(s, 1)) / 2.0
    return scale * np.sqrt(ds ** 2 + (2.0 * np.pi / n) ** 2)


def restrict_to_curve(source, s, theta=None, normalize=False):
    """Trace of an eigenfunction or a 2D field on a closed curve.

    Parameters
    ----------
    source : EigenPair or ScalarField
        A separated surface eigenpair, traced in its real form
        ``u(s) cos(m theta)``, or a field on an ``(s, theta)`` grid with
        ``theta`` periodic (bilinear interpolation).
    s : float or array
        Radial coordinate of each sample (a scalar gives a latitude circle).
    theta : array, optional
        Angles in ``[0, 2 pi)``; default is a uniform grid with at least 256
        and at least ``8 m`` samples.
    normalize : bool
        Divide by the curve L^2 norm.

    Raises
    ------
    CurveOutsideDomain
        If a sample leaves the radial range of the grid.
    ResolutionError
        If a separated mode has fewer than ``8 m`` samples.
    """
    if isinstance(source, EigenPair):
        m = int(source.m or 0)
        n_default = max(256, SAMPLES_PER_MODE * m)
        coord = source.u.coords[0]
        values = source.u.values
    elif isinstance(source, ScalarField) and source.ndim == 2:
        m = None
        n_default = 256
        coord = source.coords[0]
    else:
        raise TypeError("source must be an EigenPair or a 2D ScalarField")

    theta = _closed_theta(n_default) if theta is None else np.asarray(theta, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), theta.shape).copy()
    if m is not None and theta.size < SAMPLES_PER_MODE * m:
        raise ResolutionError(f"{theta.size} samples cannot resolve mode m={m} (need {SAMPLES_PER_MODE * m})")
    if s.min() < coord[0] or s.max() > coord[-1]:
        raise CurveOutsideDomain(f"curve reaches s in [{s.min():.4g}, {s.max():.4g}], grid spans "
                                 f"[{coord[0]:.4g}, {coord[-1]:.4g}]")

    if m is not None:
        samples = np.interp(s, coord, values) * np.cos(m * theta)
        op = source.operator
        scale = np.sqrt(np.interp(s, op.coord[1:-1], op.B)) if op.angular != 1.0 else np.ones_like(s)
    else:
        th = source.coords[1]
        # close the periodic direction so interpolation wraps
        th_ext = np.concatenate((th, [th[0] + 2.0 * np.pi]))
        vals = np.concatenate((source.values, source.values[:, :1]), axis=1)
        interp = RegularGridInterpolator((coord, th_ext), vals, method="linear")
        samples = interp(np.column_stack((s, np.mod(theta - th[0], 2.0 * np.pi) + th[0])))
        scale = np.ones_like(s)

    weights = _arc_weights(s, theta, scale)
    trace = CurveTrace(theta, s, samples, weights, m)
    if normalize:
        nrm = trace.l2_norm()
        if nrm == 0:
            raise ValueError("cannot normalise an identically zero trace")
        trace = CurveTrace(theta, s, samples / nrm, weights, m, True)
    return trace


def count_sign_changes(trace, zero_tol=None):
    """Number of sign changes around a closed curve.

    Samples with ``|value| <= zero_tol`` (default ``1e-12 max|trace|``) are
    zeros. A run of zeros counts as one crossing when the signs on either side
    differ; a touch without a sign change counts as none.
    """
    v = np.asarray(trace.samples if isinstance(trace, CurveTrace) else trace, dtype=float)
    if v.size == 0:
        return 0
    tol = ZERO_TOL_REL * float(np.max(np.abs(v))) if zero_tol is None else float(zero_tol)
    sg = np.sign(v)
    sg[np.abs(v) <= tol] = 0
    nz = sg[sg != 0]
    if nz.size < 2:
        return 0
    return int(np.count_nonzero(nz != np.roll(nz, 1)))


@dataclass(frozen=True)
class NodalReport:
    """Least-squares fit ``count ~ slope / h + intercept``."""

    hs: tuple
    modes: tuple
    counts: tuple
    slope: float
    intercept: float
    residual: float
    geometric_factor: float | None
    dE_gamma: float | None
    C_H: str = "not computed"

    def as_dict(self):
        return {"h": list(self.hs), "m": list(self.modes), "count": list(self.counts),
                "slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "geometric_factor": self.geometric_factor, "dE_gamma": self.dE_gamma,
                "C_H": self.C_H}


def geometric_factor(curve, dE_gamma):
    """``2 tau0 d_E^H - d_E(H) - d_E(gamma)`` for an inner curve gamma."""
    return curve.ceiling - float(dE_gamma)


def nodal_scaling_fit(hs, counts, modes=None, curve=None, dE_gamma=None):
    """Fit nodal counts against 1/h.

    The Green's-function constant of the complex tube is not computed, so the
    comparison with the geometric factor is about linearity in 1/h only.
    """
    hs = np.asarray(hs, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least 3 h values")
    coef, res, *_ = np.polyfit(1.0 / hs, counts, 1, full=True)
    r = float(res[0]) if len(res) else 0.0
    gf = None
    if curve is not None and dE_gamma is not None:
        gf = float(geometric_factor(curve, dE_gamma))
    modes = tuple(int(m) for m in modes) if modes is not None else tuple([None] * hs.size)
    return NodalReport(tuple(hs.tolist()), modes, tuple(int(c) for c in counts), float(coef[0]),
                       float(coef[1]), r, gf, None if dE_gamma is None else float(dE_gamma))
