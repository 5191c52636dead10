"""Composite Simpson rules used by the phase and distance integrals."""

import numpy as np


def simpson(func, a, b, panels=64):
    """Composite Simpson rule for a vectorised callable on ``[a, b]``.

    ``panels`` is the number of Simpson panels (each panel uses 3 nodes).
    Reversing the endpoints negates the result.
    """
    if panels < 1:
        raise ValueError("panels must be >= 1")
    if a == b:
        return 0.0
    x = np.linspace(a, b, 2 * panels + 1)
    y = np.asarray(func(x), dtype=float)
    dx = (b - a) / (2 * panels)
    return float(dx / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def simpson_cumulative(func, nodes, sub=2):
    """Running integral of ``func`` from ``nodes[0]`` to each node.

    Each gap between consecutive nodes is integrated with ``sub`` Simpson
    panels, so the callable is evaluated at interior points; the nodes need
    not be uniform.
    """
    nodes = np.asarray(nodes, dtype=float)
    out = np.zeros_like(nodes)
    if nodes.size < 2:
        return out
    lo, hi = nodes[:-1], nodes[1:]
    k = 2 * sub
    t = np.linspace(0.0, 1.0, k + 1)
    pts = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    vals = np.asarray(func(pts), dtype=float)
    w = np.ones(k + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    pieces = (hi - lo) / (3.0 * k) * (vals @ w)
    out[1:] = np.cumsum(pieces)
    return out


def arcsine_nodes(a, b, n):
    """Map of ``[0, pi]`` onto ``[a, b]`` that removes inverse square-root
    endpoint singularities: ``x = a + (b - a) * sin(t / 2)**2``.

    Returns ``(t, x, dx_dt)``.
    """
    t = np.linspace(0.0, np.pi, n)
    x = a + (b - a) * np.sin(0.5 * t) ** 2
    dx_dt = 0.5 * (b - a) * np.sin(t)
    return t, x, dx_dt
