import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from agmonlab.core_model import Problem1D, sphere_problem
from agmonlab.errors import RangeError, TurningPointInSegment
from agmonlab.spectral import radial_reduce
from agmonlab.wkb import (airy_ai, airy_reference, control_mass_oracle, turning_point_width,
                          wkb_phase, wkb_solution)

mpmath.mp.dps = 30


def envelope(x, value, slope_power):
    # oscillatory side: compare against the amplitude |x|^{p}/sqrt(pi)
    if x < 0:
        return abs(x) ** slope_power / math.sqrt(math.pi)
    return abs(value)


@pytest.fixture(scope="module")
def reduction():
    return radial_reduce(sphere_problem())


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-200.0, 100.0))
def test_airy_matches_mpmath(x):
    a, ap = airy_ai(x, derivative=True)
    ref = float(mpmath.airyai(x))
    refp = float(mpmath.airyai(x, 1))
    assert abs(a - ref) <= 1e-9 * envelope(x, ref, -0.25)
    assert abs(ap - refp) <= 1e-9 * envelope(x, refp, 0.25)


def test_airy_values_at_origin():
    a, ap = airy_ai(0.0, derivative=True)
    assert a == pytest.approx(1.0 / (3 ** (2 / 3) * math.gamma(2 / 3)), rel=1e-15)
    assert ap == pytest.approx(-1.0 / (3 ** (1 / 3) * math.gamma(1 / 3)), rel=1e-15)


def test_airy_range_is_enforced():
    with pytest.raises(RangeError):
        airy_ai(150.0)
    with pytest.raises(RangeError):
        airy_ai(np.array([0.0, -250.0]))


def test_airy_reference_solves_equation():
    h = 0.05
    y = np.linspace(-0.5, 0.5, 4001)
    u = airy_reference(y, h)
    d = y[1] - y[0]
    upp = (u[2:] - 2 * u[1:-1] + u[:-2]) / d ** 2
    res = -h * h * upp + y[1:-1] * u[1:-1]
    assert np.max(np.abs(res)) < 1e-4 * np.max(np.abs(u))


def test_phase_matches_quadrature(reduction):
    # on the sphere w = 1 / sqrt(1 - z^2) and V = z
    ref, _ = quad(lambda z: math.sqrt(-z) / math.sqrt(1 - z * z), -0.5, -0.1, epsabs=1e-14)
    assert wkb_phase(reduction, 0.0, -0.5, -0.1) == pytest.approx(ref, rel=1e-8)
    assert wkb_phase(reduction, 0.0, -0.1, -0.5) == pytest.approx(-ref, rel=1e-8)


def test_phase_refuses_turning_point(reduction):
    with pytest.raises(TurningPointInSegment):
        wkb_phase(reduction, 0.0, -0.5, 0.2)


def test_interval_phase():
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -3.0, 3.0, 1.0, 601)
    # int_0^{1/2} sqrt(1 - x^2) dx
    ref = 0.5 * (0.5 * math.sqrt(0.75) + math.asin(0.5))
    assert wkb_phase(p, 1.0, 0.0, 0.5) == pytest.approx(ref, rel=1e-9)


def test_wkb_solution_validity_region():
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -3.0, 3.0, 1.0, 601)
    h = 0.05
    sol = wkb_solution(p, 1.0, h, 0.0)
    eps = turning_point_width(h)
    assert np.all(1.0 - p.V_values[sol.validity_mask] >= eps)
    ph = sol.phase.values[sol.validity_mask]
    assert np.all(np.diff(ph) > 0)
    with pytest.raises(TurningPointInSegment):
        wkb_solution(p, 1.0, h, 2.0)


def test_mass_oracle_is_classical_time_fraction(reduction):
    time = lambda a, b: quad(lambda z: 1.0 / (math.sqrt(-z) * math.sqrt(1 - z * z)), a, b,
                             limit=200)[0]
    ref = time(-0.1, 0.0) / time(-1.0, 0.0)
    pred = control_mass_oracle(reduction, 0.0, 0.2, 0.01)
    assert pred.mass == pytest.approx(ref, rel=1e-5)
    assert pred.mass == pytest.approx(0.24145, abs=1e-4)
    assert pred.annulus == (-0.1, 0.0)


def test_mass_oracle_contains_computed_masses(sphere, reduction):
    from agmonlab.verify import annulus_mass

    for ep in sphere.family:
        pred = control_mass_oracle(reduction, 0.0, 0.2, ep.h)
        assert pred.contains(annulus_mass(ep, 0.0, 0.2))
