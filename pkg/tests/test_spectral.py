import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal

from agmonlab.core_model import ModeRule, Problem1D, RadialSurfaceProblem, sphere_problem
from agmonlab.errors import ResolutionError
from agmonlab.fields import ScalarField
from agmonlab.spectral import (TridiagonalOperator, discretize_1d, eigenvalue_nearest,
                               h1h_norm, kth_eigenvalue, radial_reduce, solve_family,
                               solve_index, solve_near_energy, sturm_count)


def oscillator(h, per_h=8):
    p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -6.0, 6.0, 1.0).for_h(h, per_h)
    return discretize_1d(p, h)


def random_tridiagonal(seed, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=n), rng.normal(size=n - 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 40))
def test_bisection_matches_lapack(seed, n):
    d, e = random_tridiagonal(seed, n)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    op = TridiagonalOperator(d, e, np.arange(n + 2.0), 1.0, np.zeros(n), np.ones(n), d)
    got = np.array([kth_eigenvalue(op, k) for k in range(n)])
    assert np.allclose(got, ref, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 30), x=st.floats(-4, 4))
def test_sturm_count_matches_dense_spectrum(seed, n, x):
    d, e = random_tridiagonal(seed, n)
    ev = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    if np.min(np.abs(ev - x)) < 1e-9:
        return
    assert sturm_count(d, e, x) == int(np.sum(ev < x))


def test_nearest_tie_goes_to_smaller():
    d = np.array([0.0, 2.0])
    e = np.array([0.0])
    op = TridiagonalOperator(d, e, np.arange(4.0), 1.0, np.zeros(2), np.ones(2), d)
    lam, idx = eigenvalue_nearest(op, 1.0)
    assert (lam, idx) == (pytest.approx(0.0, abs=1e-12), 0)


def test_oscillator_ground_state():
    lam = kth_eigenvalue(oscillator(0.05), 0)
    assert abs(lam - 0.05) < 1e-4


def test_second_order_convergence():
    errs = [abs(kth_eigenvalue(oscillator(0.05, per), 0) - 0.05) for per in (8, 16)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_eigenpair_residual_norm_and_sign():
    op = oscillator(0.05)
    ep = solve_near_energy(op, 1.0, 0.05)
    assert abs(ep.lam - 1.05) < 1e-3  # level (2k + 1) h nearest 1
    assert ep.residual <= 1e-8 * op.norm_inf()
    assert ep.norm() == pytest.approx(1.0, rel=1e-12)
    assert ep.u.values[0] == 0.0 and ep.u.values[-1] == 0.0
    u = ep.interior
    assert u[np.argmax(np.abs(u))] > 0


def test_index_solver_counts_nodes():
    ep = solve_index(oscillator(0.1), 3)
    u = ep.interior
    nz = u[np.abs(u) > 1e-8 * np.abs(u).max()]
    assert int(np.sum(np.sign(nz[1:]) != np.sign(nz[:-1]))) == 3


def test_coarse_grid_is_rejected():
    p = Problem1D(lambda x: x, -1.0, 1.0, 0.0, 11)
    with pytest.raises(ResolutionError):
        discretize_1d(p, 0.05)


def test_free_sphere_spectrum():
    # V = 0 on the round sphere: spherical harmonics of order m have
    # eigenvalues h^2 l (l + 1), l >= m
    sp = sphere_problem()
    free = RadialSurfaceProblem(sp.f, sp.fprime, sp.fsq_prime_at_poles,
                                lambda z: 0.0 * np.asarray(z, dtype=float), -1.0,
                                ModeRule("fixed", 1), n_s=8193)
    h = 0.5
    for m in (1, 2):
        op = radial_reduce(free).operator(h, m=m)
        for k in range(3):
            l = m + k
            assert kth_eigenvalue(op, k) == pytest.approx(h * h * l * (l + 1), rel=1e-3)


def test_radial_coordinate_of_sphere():
    red = radial_reduce(sphere_problem())
    assert red.s_of_r(0.5) == pytest.approx(math.atanh(0.5), rel=1e-9)
    assert red.r_of_s(math.atanh(0.5)) == pytest.approx(0.5, rel=1e-9)
    assert red.eta < 1e-3


def test_family_modes(sphere_inverse):
    fam = sphere_inverse.family
    assert [e.m for e in fam] == [10, 18, 32, 56, 100]
    assert all(abs(e.norm() - 1.0) < 1e-10 for e in fam)


def test_family_is_map_agnostic(airy):
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(2) as pool:
        par = solve_family(airy.problem, map_=pool.map)
    seq = airy.family
    for a, b in zip(seq, par):
        assert a.lam == b.lam
        assert np.array_equal(a.u.values, b.u.values)


def test_h1h_norm_of_plane_wave():
    x = np.linspace(0.0, 2.0 * np.pi, 20001)
    u = ScalarField(np.sin(x), (x,), ("x",))
    h = 0.3
    # integral of sin^2 + h^2 cos^2 over a period
    assert h1h_norm(u, np.ones(x.size, bool), h) == pytest.approx(np.pi * (1 + h * h), rel=1e-6)
