import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agmonlab.core_model import (ModeRule, Problem1D, RadialSurfaceProblem, build_collar,
                                 check_regular_energy, default_r0, find_crossings,
                                 quadratic_problem, table_potential, tau0)
from agmonlab.errors import CollarOverlap, MonotonicityFailed, NoCausticFound, PoleSingularity
from agmonlab.spectral import radial_reduce


def linear(slope=1.0, shift=0.0, E=0.0):
    return Problem1D(lambda x: slope * np.asarray(x, dtype=float) + shift, -2.0, 3.0, E, 1001)


def test_airy_energy_is_regular(airy):
    rep = check_regular_energy(airy.problem)
    assert rep.regular
    assert len(rep.crossings) == 1
    assert rep.crossings[0].coord == pytest.approx(0.0, abs=1e-12)
    assert rep.crossings[0].grad == pytest.approx(1.0, rel=1e-9)


def test_critical_energy_is_not_regular():
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -2.0, 2.0, 0.0, 401)
    assert not check_regular_energy(p)


def test_no_caustic_raises():
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2 + 1.0, -2.0, 2.0, 0.0, 101)
    with pytest.raises(NoCausticFound):
        find_crossings(p.normal_line())


def test_quadratic_collar_factorisation(quadratic):
    # V - E = x^2 - 1 = y (y + 2) with y = |x| - 1
    col = build_collar(quadratic.problem, 0.25)
    sel = col.collar
    y = col.y_n.values[sel]
    assert np.allclose(col.F.values[sel], y + 2.0, atol=1e-9)
    assert tau0(col) == pytest.approx(math.sqrt(2.5 / 2.0), abs=1e-6)


def test_collar_too_wide_is_rejected(quadratic):
    with pytest.raises((MonotonicityFailed, CollarOverlap)):
        build_collar(quadratic.problem, 2.0)


def test_monotonicity_failure_is_reported():
    # V = x^3 - 3x has a local min at x = 1 inside a wide collar around x = 2
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 3 - 3 * np.asarray(x, dtype=float),
                  0.5, 4.0, 2.0, 2001)
    build_collar(p, 0.5)
    with pytest.raises(MonotonicityFailed):
        build_collar(p, 1.2)


def test_default_r0_is_dyadic_and_valid(airy, quadratic):
    for s in (airy, quadratic):
        r0 = s.r0
        assert math.log2(r0) == int(math.log2(r0))
        build_collar(s.problem, r0)


def test_sphere_collar(sphere):
    t = tau0(sphere.collar)
    # dV/dell = cos(ell) on the meridian, so tau0 = cos(r0)^(-1/2)
    assert t == pytest.approx(1.0 / math.sqrt(math.cos(0.25)), rel=2e-4)


@settings(max_examples=25, deadline=None)
@given(slope=st.floats(0.2, 5.0), shift=st.floats(-1.0, 1.0))
def test_tau0_of_linear_potential_is_one(slope, shift):
    p = linear(slope, shift, E=shift)
    assert tau0(build_collar(p, 0.5)) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 10.0), shift=st.floats(-5.0, 5.0))
def test_tau0_invariant_under_affine_change_of_energy(scale, shift):
    base = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, 0.0, 3.0, 1.0, 1501)
    p = Problem1D(lambda x: scale * np.asarray(x, dtype=float) ** 2 + shift, 0.0, 3.0,
                  scale + shift, 1501)
    assert tau0(build_collar(p, 0.25)) == pytest.approx(tau0(build_collar(base, 0.25)), rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(E=st.floats(0.3, 3.0))
def test_collar_sign_and_factorisation(E):
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -3.0, 3.0, E, 1201)
    r0 = default_r0(p)
    col = build_collar(p, r0)
    y = col.y_n.values
    g = p.V_values - E
    sel = col.collar
    assert np.all(np.sign(y[sel & (np.abs(g) > 1e-12)]) == np.sign(g[sel & (np.abs(g) > 1e-12)]))
    assert np.allclose(col.F.values[sel] * y[sel], g[sel], atol=1e-12)
    assert tau0(col) >= 1.0


def test_mode_rule():
    assert ModeRule("fixed", 3)(0.01) == 3
    assert ModeRule("inverse", 1)(0.0316) == 32
    assert str(ModeRule("inverse", 2)) == "m=round(2/h)"
    with pytest.raises(ValueError):
        ModeRule("linear", 1)


def test_h_sequence_must_decrease():
    with pytest.raises(ValueError):
        Problem1D(lambda x: x, -1.0, 1.0, 0.0, 11, (0.05, 0.1, 0.01))


def test_for_h_resolution(airy):
    p = airy.problem.for_h(0.05)
    assert p.dx <= 0.05 / 8 + 1e-15
    assert p.a == airy.problem.a and p.b == airy.problem.b


def test_table_potential(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("# x, V\n1.0, 1.0\n-1.0, -1.0\n0.0, 0.0\n")
    V, lo, hi = table_potential(path)
    assert (lo, hi) == (-1.0, 1.0)
    assert V(0.5) == pytest.approx(0.5)
    bad = tmp_path / "bad.csv"
    bad.write_text("0, 1, 2\n1, 2, 3\n")
    with pytest.raises(ValueError):
        table_potential(bad)


def test_profile_with_flat_pole_is_rejected():
    def f(z):
        return np.sqrt(np.clip(1.0 - np.asarray(z, dtype=float) ** 2, 0.0, None)) ** 3

    with pytest.raises(ValueError):
        RadialSurfaceProblem(f, lambda z: 0 * z, (0.0, 0.0), lambda z: z, 0.0)


def test_pole_singularity_when_s_diverges_early():
    # a profile vanishing linearly at the poles in z gives (f^2)' = 0 there and
    # a logarithmically divergent s; a short s_max leaves |r| away from 1
    def f(z):
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.clip((1.0 - z) * (1.0 + z), 0.0, None))

    def fp(z):
        z = np.asarray(z, dtype=float)
        return -z / np.sqrt((1.0 - z) * (1.0 + z))

    p = RadialSurfaceProblem(f, fp, (2.0, -2.0), lambda z: z, 0.0, s_max=2.0, n_s=401)
    with pytest.raises(PoleSingularity):
        radial_reduce(p)


def test_quadratic_truncation():
    p = quadratic_problem()
    assert p.b == pytest.approx(-p.a)
    assert p.V(p.b) - p.E > 5.0
