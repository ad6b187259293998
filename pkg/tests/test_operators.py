import numpy as np
import pytest
import scipy.sparse as sp

from membrane_logistic import (
    DimensionMismatch,
    FieldPair,
    Geometry,
    NegativePermeability,
    ProblemSpec,
    RefugeRegion,
    assemble_interface,
    assemble_stiffness,
    assemble_weighted_mass,
    build_interval_mesh,
    build_rect_mesh,
    compose_LF,
    solve_linear,
    tag_refuges,
)
from membrane_logistic.discretize import discretize
from membrane_logistic.operators import weak_form_rows


def test_stiffness_interior_stencil_1d():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 8)
    K = assemble_stiffness(mesh).matrix()
    h = 1.0 / 16.0
    row = K.getrow(3).toarray().ravel()
    assert row[2] == pytest.approx(-1.0 / h)
    assert row[3] == pytest.approx(2.0 / h)
    assert row[4] == pytest.approx(-1.0 / h)


def test_stiffness_kills_constants():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 6, 6)
    K = assemble_stiffness(mesh).matrix()
    ones = np.ones(mesh.num_dofs)
    assert np.max(np.abs(K @ ones)) <= 1e-12


def test_stiffness_five_point_structure_2d():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 6, 6)
    K = assemble_stiffness(mesh).A11.tocsr()
    interior = 3 * 7 + 3  # ix = 3, iy = 3
    assert K.getrow(interior).nnz == 5


def test_interface_jump_form_1d():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 8)
    B = assemble_interface(mesh, 2.0)
    u = np.zeros(mesh.num_dofs)
    i1 = mesh.global_index(1, mesh.interface_pairs[0, 0])
    i2 = mesh.global_index(2, mesh.interface_pairs[0, 1])
    u[i1], u[i2] = 1.0, 3.0
    assert u @ (B @ u) == pytest.approx(2.0 * (3.0 - 1.0) ** 2)


def test_interface_zero_permeability():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 8)
    assert assemble_interface(mesh, 0.0).nnz == 0
    with pytest.raises(NegativePermeability):
        assemble_interface(mesh, -1.0)


def test_interface_constant_jump_2d():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 2.0), 0.5, 4, 8)
    mu, c = 1.7, 0.9
    B = assemble_interface(mesh, mu)
    u = np.zeros(mesh.num_dofs)
    u[mesh.global_index(2, mesh.interface_pairs[:, 1])] = c
    # Trapezoid quadrature of a constant jump over the interface length.
    assert u @ (B @ u) == pytest.approx(mu * c * c * 2.0)


def test_lumped_mass_partition_of_unity():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 32)
    lump = assemble_weighted_mass(mesh, 1.0, 1.0)
    assert np.sum(lump) == pytest.approx(1.0, abs=1e-12)
    h = 1.0 / 64.0
    assert lump[5] == pytest.approx(h)


def test_weighted_mass_vanishes_on_refuges():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 64)
    tagged = tag_refuges(mesh, [RefugeRegion(1, (0.2, 0.3))])
    spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5),
                       refuges=tagged.refuge_regions)
    Ma = assemble_weighted_mass(tagged, spec.crowding_field(1),
                                spec.crowding_field(2))
    inside = np.concatenate([tagged.refuge_mask_1, tagged.refuge_mask_2])
    assert np.all(Ma[inside] == 0.0)
    assert np.all(Ma[~inside & (assemble_weighted_mass(tagged, 1, 1) > 0)]
                  >= 0.0)


def test_compose_symmetry_and_dimension_check():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 16)
    stiff = assemble_stiffness(mesh)
    B = assemble_interface(mesh, 3.0)
    pot = assemble_weighted_mass(mesh, 1.0, 1.0)
    op = compose_LF(stiff, B, pot)
    A = op.matrix()
    assert abs(A - A.T).max() == 0.0
    with pytest.raises(DimensionMismatch):
        compose_LF(stiff, B, pot[:-1])


def test_solve_linear_zero_rhs():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 16)
    op = compose_LF(assemble_stiffness(mesh),
                    assemble_interface(mesh, 1.0), None)
    mass = assemble_weighted_mass(mesh, 1.0, 1.0)
    sol = solve_linear(op, 1.0, mass, FieldPair.zeros(mesh))
    assert sol.sup_norm == 0.0


def test_solve_linear_quadratic_oracle():
    # -u'' = 1 on (0, gamma), u(0) = 0, natural (zero-flux) end at gamma:
    # exact solution x * (2 gamma - x) / 2, reproduced exactly at nodes.
    gamma = 0.5
    mesh = build_interval_mesh(0.0, 1.0, gamma, 64)
    op = compose_LF(assemble_stiffness(mesh), None, None)
    mass = assemble_weighted_mass(mesh, 1.0, 1.0)
    rhs = np.zeros(mesh.num_dofs)
    rhs[:mesh.n1] = mass[:mesh.n1]
    sol = solve_linear(op, 0.0, mass, FieldPair.from_global(mesh, rhs))
    x = mesh.nodes_1[:, 0]
    exact = x * (2 * gamma - x) / 2.0
    assert np.max(np.abs(sol.u1 - exact)) <= 1e-12


def test_solve_linear_positivity():
    rng = np.random.default_rng(7)
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 10, 10)
    stiff = assemble_stiffness(mesh)
    mass = assemble_weighted_mass(mesh, 1.0, 1.0)
    op = compose_LF(stiff, assemble_interface(mesh, 2.0), 0.3 * mass)
    g = rng.random(mesh.num_dofs) * mass
    g[mesh.dirichlet_mask()] = 0.0
    sol = solve_linear(op, 0.0, mass, FieldPair.from_global(mesh, g))
    assert np.min(sol.global_vector()) >= 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_residual_two_code_paths_agree(dim):
    rng = np.random.default_rng(42)
    if dim == 1:
        spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 0.4), mu=2.5,
                           p=2.0, m2=3.0, a1=0.7)
        disc = discretize(spec, 48)
    else:
        spec = ProblemSpec(Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.6),
                           mu=1.5, p=2.0, m1=2.0)
        disc = discretize(spec, 10, ny=12)
    u = rng.standard_normal(disc.mesh.num_dofs)
    lam = 4.2
    direct = disc.residual_rows(lam, u)
    quad = weak_form_rows(disc.mesh, spec.mu, disc.m_vec, disc.a_vec,
                          spec.p, lam, u)
    scale = np.max(np.abs(direct)) + 1.0
    assert np.max(np.abs(direct - quad)) / scale <= 1e-12


def test_residual_zero_state(sym_disc):
    assert sym_disc.residual(5.0, FieldPair.zeros(sym_disc.mesh)) == 0.0


def test_residual_scales_with_p_at_threshold(sym_disc):
    from membrane_logistic import find_lambda_star
    from membrane_logistic.spectral import sigma_of_lambda

    lam_star = find_lambda_star(sym_disc)
    _, eig = sigma_of_lambda(sym_disc, lam_star, return_eig=True)
    phi = eig.eigenfunction.global_vector()
    phi /= np.max(np.abs(phi))
    r1 = sym_disc.residual(lam_star,
                           FieldPair.from_global(sym_disc.mesh, 1e-3 * phi))
    r2 = sym_disc.residual(lam_star,
                           FieldPair.from_global(sym_disc.mesh, 5e-4 * phi))
    # Only the crowding term contributes: halving the scale divides the
    # residual by 2**p.
    assert r1 / r2 == pytest.approx(2.0 ** sym_disc.spec.p, rel=1e-3)
