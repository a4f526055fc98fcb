import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bbmsim.bathymetry import BathymetryField
from bbmsim.fem import (DUNAVANT4_POINTS, DUNAVANT4_WEIGHTS, DUNAVANT6_POINTS, DUNAVANT6_WEIGHTS, DirichletSpec,
                        ModelParams, apply_dirichlet_rhs, assemble_advective_coupling, assemble_mass,
                        assemble_weighted_stiffness, build_system_matrices, eta_rhs, l2_error, velocity_rhs)
from bbmsim.linalg import spmv
from bbmsim.mesh import Mesh, rectangle_mesh, triangle_geometry

UNIT = Mesh.from_arrays(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def jittered(nx=6, ny=5, seed=0):
    m = rectangle_mesh(0, 2, 0, 1, nx, ny)
    p = m.points.copy()
    inner = (p[:, 0] > 0) & (p[:, 0] < 2) & (p[:, 1] > 0) & (p[:, 1] < 1)
    p[inner] += np.random.default_rng(seed).uniform(-0.25, 0.25, (inner.sum(), 2)) / max(nx, ny)
    return Mesh.from_arrays(p, m.triangles, m.boundary_edges, m.edge_labels)


def bathy(mesh, f):
    return BathymetryField.from_nodal(mesh, f(mesh.points[:, 0], mesh.points[:, 1]))


def brute(mesh, kernel):
    """Element-by-element reference using the 12-point rule and explicit shape functions."""
    n = mesh.n_vertices
    A = np.zeros((n, n))
    for t in range(mesh.n_triangles):
        area, g = triangle_geometry(mesh, t)
        tri = mesh.triangles[t]
        for lam, w in zip(DUNAVANT6_POINTS, DUNAVANT6_WEIGHTS):
            for i in range(3):
                for j in range(3):
                    A[tri[i], tri[j]] += area * w * kernel(tri, lam, g, i, j)
    return A


# -------------------------------------------------------------- quadrature

@pytest.mark.parametrize("pts, wts, degree", [(DUNAVANT4_POINTS, DUNAVANT4_WEIGHTS, 4),
                                              (DUNAVANT6_POINTS, DUNAVANT6_WEIGHTS, 6)])
def test_rules_integrate_monomials(pts, wts, degree):
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(pts.sum(axis=1), 1.0, atol=1e-14)
    x, y = pts[:, 1], pts[:, 2]  # reference triangle (0,0), (1,0), (0,1)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = 2 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert wts @ (x ** a * y ** b) == pytest.approx(exact, abs=1e-12)


# -------------------------------------------------------------- matrices

def test_unit_triangle_mass_and_stiffness():
    M = assemble_mass(UNIT).to_dense()
    np.testing.assert_allclose(M, (np.ones((3, 3)) + np.eye(3)) / 24, atol=1e-16)
    K = assemble_weighted_stiffness(UNIT, BathymetryField.flat(UNIT)).to_dense()
    np.testing.assert_allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)
    K4 = assemble_weighted_stiffness(UNIT, BathymetryField.flat(UNIT, 2.0)).to_dense()
    np.testing.assert_allclose(K4, 4 * K, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_mass_and_stiffness_identities(nx, ny, seed):
    m = jittered(nx, ny, seed)
    M = assemble_mass(m)
    one = np.ones(m.n_vertices)
    assert one @ spmv(M, one) == pytest.approx(m.total_area(), rel=1e-12)
    D = bathy(m, lambda x, y: 1 + 0.3 * x + 0.2 * np.sin(3 * y))
    K = assemble_weighted_stiffness(m, D)
    assert K.is_symmetric()
    assert np.abs(spmv(K, one)).max() <= 1e-12
    # x is linear, so x^T M x = int x^2 exactly
    x = m.points[:, 0]
    assert x @ spmv(M, x) == pytest.approx(8 / 3, rel=1e-12)


def test_stiffness_matches_brute_force():
    m = jittered(4, 3, 1)
    D2 = lambda tri, lam: lam @ (bath.D ** 2)[tri]
    bath = bathy(m, lambda x, y: 1 + 0.5 * x * y)
    ref = brute(m, lambda tri, lam, g, i, j: D2(tri, lam) * (g[i] @ g[j]))
    np.testing.assert_allclose(assemble_weighted_stiffness(m, bath).to_dense(), ref, atol=1e-13)


def test_coupling_matches_brute_force():
    m = jittered(4, 3, 2)
    bath = bathy(m, lambda x, y: 1 + 0.5 * x - 0.2 * y * y)
    ref = brute(m, lambda tri, lam, g, i, j: (g.T @ (bath.D ** 2)[tri]) @ g[j] * lam[i])
    np.testing.assert_allclose(assemble_advective_coupling(m, bath).to_dense(), ref, atol=1e-13)


def test_coupling_vanishes_for_flat_bottom():
    m = jittered()
    N = assemble_advective_coupling(m, bathy(m, lambda x, y: 0 * x + 0.7))
    assert np.abs(N.to_dense()).max() <= 1e-14


def test_system_matrices_and_dirichlet():
    m = jittered()
    bath = bathy(m, lambda x, y: 1 + 0.2 * x)
    walls = {i for i in range(m.n_vertices) if m.points[i, 0] in (0.0, 2.0)}
    spec = DirichletSpec(u_nodes=walls)
    S = build_system_matrices(m, bath, ModelParams(0.1, 0.2), spec)
    D = S.A_eta.to_dense()
    ref = S.M.to_dense() + 0.1 * S.K.to_dense()
    np.testing.assert_allclose(D, ref, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(D) > 0)
    Au = S.A_vel_u.to_dense()
    full = S.M.to_dense() + 0.2 * (S.N.to_dense() + S.K.to_dense())
    free = sorted(set(range(m.n_vertices)) - walls)
    np.testing.assert_allclose(Au[np.ix_(free, free)], full[np.ix_(free, free)], atol=1e-15)
    for i in walls:
        e = np.zeros(m.n_vertices)
        e[i] = 1
        np.testing.assert_array_equal(Au[i], e)
        np.testing.assert_array_equal(Au[:, i], e)
    np.testing.assert_allclose(S.A_vel_v.to_dense(), full, atol=1e-15)
    f = apply_dirichlet_rhs(spec, np.ones(m.n_vertices), "u")
    assert f[sorted(walls)].max() == 0 and f[free].min() == 1
    with pytest.raises(ValueError):
        build_system_matrices(m, bath, ModelParams(), DirichletSpec(eta_nodes={m.n_vertices}))


def test_params_reject_negative():
    with pytest.raises(ValueError):
        ModelParams(b=-1.0)


# -------------------------------------------------------------- right-hand sides

def test_eta_rhs_total_is_minus_flux_divergence():
    m = jittered()
    one = np.ones(m.n_vertices)
    x, y = m.points.T
    zero = np.zeros(m.n_vertices)
    # div((1 + 0) (x, 0)) = 1 over an area of 2
    assert eta_rhs(m, BathymetryField.flat(m), zero, x, zero).sum() == pytest.approx(-2.0, rel=1e-12)
    # div((D + eta)(u, v)) with D = 1, eta = y, u = 0, v = y: d/dy[(1 + y) y] = 1 + 2y
    assert eta_rhs(m, BathymetryField.flat(m), y, zero, y).sum() == pytest.approx(-(2 + 2), rel=1e-12)
    assert np.abs(eta_rhs(m, BathymetryField.flat(m), zero, one, one)).max() <= 1e-15


def test_velocity_rhs_totals():
    m = jittered()
    x, y = m.points.T
    zero = np.zeros(m.n_vertices)
    assert velocity_rhs(m, x, zero, zero, "x").sum() == pytest.approx(-2.0, rel=1e-12)
    assert abs(velocity_rhs(m, x, zero, zero, "y").sum()) <= 1e-13
    # u du/dx with u = x integrates x over [0,2]x[0,1] = 2
    assert velocity_rhs(m, zero, x, zero, "x").sum() == pytest.approx(-2.0, rel=1e-12)
    # v dv/dy with v = y integrates y = 1
    assert velocity_rhs(m, zero, zero, y, "y").sum() == pytest.approx(-1.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_rhs_rules_agree_on_cubic_integrands(seed):
    rng = np.random.default_rng(seed)
    m = jittered(3, 3, seed % 100)
    n = m.n_vertices
    bath = BathymetryField.from_nodal(m, 1 + rng.random(n))
    eta, u, v = rng.normal(size=(3, n))
    np.testing.assert_allclose(eta_rhs(m, bath, eta, u, v, "deg4"), eta_rhs(m, bath, eta, u, v, "deg6"),
                               atol=1e-12)
    for c in "xy":
        np.testing.assert_allclose(velocity_rhs(m, eta, u, v, c, "deg4"), velocity_rhs(m, eta, u, v, c, "deg6"),
                                   atol=1e-12)


def test_l2_error():
    m = jittered()
    x, y = m.points.T
    err, ref = l2_error(m, 2 * x - y, lambda X, Y: 2 * X - Y)
    assert err <= 1e-13
    assert ref == pytest.approx(math.sqrt(8 * 8 / 3 / 2 - 2 * 2 + 2 / 3), rel=1e-12)
    err, _ = l2_error(m, np.zeros(m.n_vertices), lambda X, Y: 1 + 0 * X)
    assert err == pytest.approx(math.sqrt(2), rel=1e-12)
