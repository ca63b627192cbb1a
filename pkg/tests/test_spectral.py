import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skrates.spectral import (PhysicalField, SpectralBasis, SpectralVector, StateVector,
                              analyze, collocation_nodes, eigenvalue, hs_norm, project,
                              state_norm, synthesize)

PI2 = math.pi**2


@pytest.mark.parametrize("n, expected", [(1, 9.8696044), (2, 39.478418), (3, 88.826440)])
def test_eigenvalue_values(n, expected):
    assert eigenvalue(n) == pytest.approx(expected, rel=1e-7)
    assert eigenvalue(n) == pytest.approx((n * math.pi) ** 2, rel=1e-15)


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_eigenvalue_rejects_bad_index(n):
    with pytest.raises(ValueError):
        eigenvalue(n)


def test_basis_invariants():
    b = SpectralBasis.dirichlet(10)
    assert b.dimension == 10
    assert np.all(np.diff(b.eigenvalues) > 0)
    assert b.eigenvalues[0] > 0
    with pytest.raises(ValueError):
        SpectralBasis.dirichlet(0)
    with pytest.raises(ValueError):
        SpectralBasis(np.array([1.0, -2.0]))


def test_vector_rejects_nonfinite():
    b = SpectralBasis.dirichlet(2)
    with pytest.raises(ValueError):
        SpectralVector(np.array([1.0, np.nan]), b)
    with pytest.raises(ValueError):
        SpectralVector(np.array([1.0]), b)


def vec(c):
    c = np.asarray(c, dtype=float)
    return SpectralVector(c, SpectralBasis.dirichlet(c.size))


def test_hs_norm_examples():
    assert hs_norm(vec([2, 0, 0]), 0) == pytest.approx(2.0)
    assert hs_norm(vec([1, 0, 0]), 1) == pytest.approx(math.pi)
    assert hs_norm(vec([1, 1]), -1) == pytest.approx(0.355881, abs=1e-6)
    # brute-force sum
    assert hs_norm(vec([1, 1]), -1) == pytest.approx(math.sqrt(1 / PI2 + 1 / (4 * PI2)), rel=1e-14)


def test_state_norm_examples():
    b = SpectralBasis.dirichlet(4)
    e1 = SpectralVector.mode(b, 1)
    zero = SpectralVector.zeros(b)
    assert state_norm(StateVector(e1, zero), 0) == pytest.approx(1.0)
    assert state_norm(StateVector(zero, e1), 0) == pytest.approx(0.318310, abs=1e-6)
    # sqrt(1 + 1/pi^2) = 1.0494385...
    assert state_norm(StateVector(e1, e1), 0) == pytest.approx(math.sqrt(1 + 1 / PI2), rel=1e-14)


def test_state_requires_shared_basis():
    with pytest.raises(ValueError):
        StateVector(vec([1, 0]), vec([1, 0, 0]))


def test_state_norm_is_component_sum():
    rng = np.random.default_rng(3)
    b = SpectralBasis.dirichlet(6)
    u = SpectralVector(rng.normal(size=6), b)
    v = SpectralVector(rng.normal(size=6), b)
    for a in (-1.0, 0.0, 0.5, 1.0):
        assert state_norm(StateVector(u, v), a) ** 2 == pytest.approx(
            hs_norm(u, a) ** 2 + hs_norm(v, a - 1) ** 2, rel=1e-13)


def test_project_examples():
    v = vec([1, 1, 1])
    np.testing.assert_array_equal(project(v, 3).coeffs, [1, 1, 1])
    np.testing.assert_array_equal(project(v, 1).coeffs, [1, 0, 0])
    tail = hs_norm(SpectralVector(v.coeffs - project(v, 1).coeffs, v.basis), 0)
    bound = eigenvalue(1) ** -0.5 * hs_norm(v, 1)
    assert tail == pytest.approx(math.sqrt(2))
    assert bound == pytest.approx(math.sqrt(14), rel=1e-12)
    assert tail <= bound
    for bad in (0, 4):
        with pytest.raises(ValueError):
            project(v, bad)


coeffs = arrays(np.float64, st.integers(1, 12),
                elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


@settings(max_examples=60, deadline=None)
@given(coeffs, st.floats(-2, 2), st.floats(0, 2))
def test_norm_monotonicity(c, a1, gap):
    v = vec(c)
    a2 = a1 + gap
    lhs = hs_norm(v, a1)
    rhs = eigenvalue(1) ** (-(a2 - a1) / 2) * hs_norm(v, a2)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@settings(max_examples=60, deadline=None)
@given(coeffs, st.floats(-2, 2), st.data())
def test_projection_properties(c, alpha, data):
    v = vec(c)
    k = data.draw(st.integers(1, c.size))
    p = project(v, k)
    assert hs_norm(p, alpha) <= hs_norm(v, alpha) * (1 + 1e-12)
    # tail bound ||P_k v - v|| <= lam_k^{-a/2} ||v||_{H^a} for a >= 0
    a = abs(alpha)
    tail = hs_norm(SpectralVector(v.coeffs - p.coeffs, v.basis), 0)
    if k < c.size:
        assert tail <= eigenvalue(k + 1) ** (-a / 2) * hs_norm(v, a) * (1 + 1e-12) + 1e-300
    assert tail <= eigenvalue(k) ** (-a / 2) * hs_norm(v, a) * (1 + 1e-12) + 1e-300


def test_transform_examples():
    b = SpectralBasis.dirichlet(3)
    f = synthesize(SpectralVector.mode(b, 1), 9)
    x = collocation_nodes(9)
    np.testing.assert_allclose(f.samples, math.sqrt(2) * np.sin(math.pi * x), atol=1e-15)
    np.testing.assert_allclose(analyze(f, b).coeffs, [1, 0, 0], atol=1e-14)

    w = PhysicalField(np.sin(math.pi * collocation_nodes(5)))
    assert analyze(w, 1).coeffs[0] == pytest.approx(1 / math.sqrt(2), abs=1e-14)

    b6 = SpectralBasis.dirichlet(6)
    v = SpectralVector.mode(b6, 2)
    np.testing.assert_allclose(analyze(synthesize(v, 15), b6).coeffs, v.coeffs, atol=1e-13)


def test_transform_rejects_small_grid():
    b = SpectralBasis.dirichlet(8)
    with pytest.raises(ValueError):
        synthesize(SpectralVector.zeros(b), 7)
    with pytest.raises(ValueError):
        analyze(PhysicalField(np.zeros(4)), b)


@settings(max_examples=40, deadline=None)
@given(coeffs, st.integers(0, 20))
def test_round_trip_and_parseval(c, extra):
    c = c / max(1.0, np.max(np.abs(c)))
    v = vec(c)
    J = c.size + extra
    back = analyze(synthesize(v, J), v.basis)
    assert np.max(np.abs(back.coeffs - v.coeffs)) <= 1e-12
    J2 = 2 * c.size + extra
    field = synthesize(v, J2).samples
    assert hs_norm(v, 0) ** 2 == pytest.approx(np.sum(field**2) / (J2 + 1), rel=1e-10, abs=1e-12)
