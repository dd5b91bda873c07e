import numpy as np
import pytest
from scipy.stats import linregress

from statfem_lab.errors import EllipticityError, OutOfDomainError
from statfem_lab.fem import (
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_system,
    basis_eval_matrix,
    error_norms,
    solve_fem,
)
from statfem_lab.mesh import build_interval_mesh, build_unit_square_mesh


def _tridiag(n, d, o):
    return np.diag(np.full(n, d)) + np.diag(np.full(n - 1, o), 1) + np.diag(np.full(n - 1, o), -1)


@pytest.mark.parametrize("n", [2, 5, 16])
def test_stiffness_1d_hand_integrated(n):
    h = 1.0 / n
    A = assemble_stiffness(build_interval_mesh(n)).toarray()
    np.testing.assert_allclose(A, _tridiag(n - 1, 2 / h, -1 / h), rtol=1e-13)


def test_stiffness_single_dof():
    np.testing.assert_allclose(assemble_stiffness(build_interval_mesh(2)).toarray(), [[4.0]])


def test_stiffness_annihilates_constants_on_inner_stencils():
    m = build_unit_square_mesh(6)
    A = assemble_stiffness(m)
    r = A @ np.ones(m.n_dofs)
    # dofs whose neighbours are all interior
    inner = np.array([np.all(np.isin(A[i].indices, np.arange(m.n_dofs))) and A[i].nnz == 7 for i in range(m.n_dofs)])
    assert inner.any()
    np.testing.assert_allclose(r[inner], 0, atol=1e-12)


def test_stiffness_variable_coefficient_and_ellipticity():
    m = build_interval_mesh(4)
    A = assemble_stiffness(m, lambda x: 1.0 + x[:, 0])
    assert np.allclose(A.toarray(), A.toarray().T)
    with pytest.raises(EllipticityError):
        assemble_stiffness(m, lambda x: x[:, 0] - 0.5)
    with pytest.raises(EllipticityError):
        assemble_stiffness(m, 0.0)


@pytest.mark.parametrize("n", [3, 10])
def test_mass_1d(n):
    h = 1.0 / n
    M = assemble_mass(build_interval_mesh(n)).toarray()
    np.testing.assert_allclose(M, _tridiag(n - 1, 2 * h / 3, h / 6), rtol=1e-13)


def test_mass_row_sums_and_total():
    m = build_interval_mesh(8)
    M = assemble_mass(m).toarray()
    full_rows = M.sum(1)
    # hats not touching the boundary integrate to h; the outer two lose h/6
    np.testing.assert_allclose(full_rows[1:-1], 1 / 8, rtol=1e-13)
    np.testing.assert_allclose(full_rows[[0, -1]], 1 / 8 - 1 / 48, rtol=1e-13)
    assert M.sum() <= 1.0
    m2 = build_unit_square_mesh(5)
    M2 = assemble_mass(m2).toarray()
    assert np.all(np.linalg.eigvalsh(M2) > 0)
    assert M2.sum() <= 1.0


def test_load_vectors():
    m = build_interval_mesh(10)
    np.testing.assert_allclose(assemble_load(m, 1.0), 0.1, rtol=1e-13)
    np.testing.assert_array_equal(assemble_load(m, 0.0), 0.0)
    # sum = integral of the interior hats = 1 - h
    assert assemble_load(m, lambda x: np.ones(len(x))).sum() == pytest.approx(0.9)
    m2 = build_unit_square_mesh(4)
    # in 2D: 1 minus the mass carried by the boundary hats
    assert assemble_load(m2, 1.0).sum() == pytest.approx(m2.n_dofs * (1 / 16))


def test_solve_two_cells_nodal_exact():
    u = solve_fem(assemble_system(build_interval_mesh(2)), assemble_load(build_interval_mesh(2), 1.0))
    np.testing.assert_allclose(u, [0.125], rtol=1e-14)


def test_solve_four_cells_nodal_exact():
    m = build_interval_mesh(4)
    u = solve_fem(assemble_system(m), assemble_load(m, 1.0))
    x = m.nodes[m.interior_nodes, 0]
    np.testing.assert_allclose(u, 0.5 * x * (1 - x), atol=1e-12)


def test_zero_load_gives_zero():
    sysm = assemble_system(build_unit_square_mesh(4))
    assert np.all(solve_fem(sysm, np.zeros(sysm.mesh.n_dofs)) == 0)


def test_solve_matches_dense():
    sysm = assemble_system(build_unit_square_mesh(7))
    b = np.random.default_rng(0).standard_normal((sysm.mesh.n_dofs, 3))
    np.testing.assert_allclose(sysm.solve(b), np.linalg.solve(sysm.stiffness.toarray(), b), rtol=1e-10, atol=1e-14)


def test_basis_eval_nodes_midpoints_boundary():
    m = build_interval_mesh(4)
    P = basis_eval_matrix(m, m.nodes[m.interior_nodes]).matrix.toarray()
    np.testing.assert_allclose(P, np.eye(3))
    P = basis_eval_matrix(m, [0.375]).matrix.toarray()
    np.testing.assert_allclose(P, [[0.5, 0.5, 0]])
    P = basis_eval_matrix(m, [0.0, 1.0]).matrix.toarray()
    assert np.all(P == 0)
    m2 = build_unit_square_mesh(4)
    P2 = basis_eval_matrix(m2, m2.nodes[m2.interior_nodes]).matrix.toarray()
    np.testing.assert_allclose(P2, np.eye(m2.n_dofs))
    P2 = basis_eval_matrix(m2, [[0.0, 0.3], [0.5, 1.0]]).matrix.toarray()
    assert np.all(P2 == 0)


def test_basis_eval_partition_of_unity_2d():
    m = build_unit_square_mesh(5)
    pts = np.random.default_rng(3).uniform(0.2, 0.8, (50, 2))
    # interior hats sum to one away from the boundary strip
    P = basis_eval_matrix(m, pts).matrix
    np.testing.assert_allclose(P.sum(1).A.ravel(), 1.0, atol=1e-14)


def test_basis_eval_out_of_domain():
    with pytest.raises(OutOfDomainError):
        basis_eval_matrix(build_interval_mesh(4), [1.5])
    with pytest.raises(OutOfDomainError):
        basis_eval_matrix(build_unit_square_mesh(4), [[-0.1, 0.5]])


def test_error_norms_zero_for_piecewise_linear():
    m = build_interval_mesh(4)
    x = m.nodes[m.interior_nodes, 0]
    hat = lambda p: np.interp(p[:, 0], [0, 0.25, 0.5, 0.75, 1], [0, 0.25, 0.5, 0.25, 0])  # noqa: E731
    dhat = lambda p: np.where(p[:, 0] < 0.5, 1.0, -1.0)[:, None]  # noqa: E731
    l2, h1 = error_norms(m, np.interp(x, [0, 0.5, 1], [0, 0.5, 0]), hat, dhat)
    assert l2 < 1e-14 and h1 < 1e-13


def _manufactured_rates(dim, ns):
    pi = np.pi
    if dim == 1:
        f = lambda p: pi**2 * np.sin(pi * p[:, 0])  # noqa: E731
        u = lambda p: np.sin(pi * p[:, 0])  # noqa: E731
        du = lambda p: (pi * np.cos(pi * p[:, 0]))[:, None]  # noqa: E731
        build = build_interval_mesh
    else:
        f = lambda p: 2 * pi**2 * np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])  # noqa: E731
        u = lambda p: np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])  # noqa: E731
        du = lambda p: pi * np.column_stack(  # noqa: E731
            [np.cos(pi * p[:, 0]) * np.sin(pi * p[:, 1]), np.sin(pi * p[:, 0]) * np.cos(pi * p[:, 1])]
        )
        build = build_unit_square_mesh
    hs, l2s, h1s = [], [], []
    for n in ns:
        m = build(n)
        uh = solve_fem(assemble_system(m), assemble_load(m, f))
        l2, h1 = error_norms(m, uh, u, du)
        hs.append(m.h)
        l2s.append(l2)
        h1s.append(h1)
    lh = np.log(hs)
    return linregress(lh, np.log(l2s)).slope, linregress(lh, np.log(h1s)).slope


@pytest.mark.parametrize("dim, ns", [(1, [4, 8, 16, 32, 64, 128]), (2, [4, 8, 16, 32])])
def test_manufactured_solution_rates(dim, ns):
    p_l2, p_h1 = _manufactured_rates(dim, ns)
    assert 1.9 <= p_l2 <= 2.1
    assert 0.9 <= p_h1 <= 1.1


def test_halving_h_quarters_l2_error():
    p_l2, _ = _manufactured_rates(1, [16, 32])
    assert p_l2 == pytest.approx(2.0, abs=0.02)
